#pragma once

// File ingestion for the documented dataset schemas. JSONL is one object
// per line; the CSV variant uses identical header names. Row order is
// preserved and malformed rows report their line number.

#include <string>
#include <vector>

#include "retentia/types.hpp"

namespace retentia::io {

enum class Format { csv, jsonl };

Format format_from_string(const std::string& s);
// Picks by file extension (.csv vs anything else -> jsonl).
Format format_from_path(const std::string& path);

std::vector<InteractionRecord> load_interactions(const std::string& path, Format format);
std::vector<SurveyResponse> load_surveys(const std::string& path, Format format);
std::vector<RetentionLabel> load_labels(const std::string& path, Format format);

void write_interactions_jsonl(const std::string& path,
                              const std::vector<InteractionRecord>& records);
void write_surveys_jsonl(const std::string& path,
                         const std::vector<SurveyResponse>& surveys);
void write_labels_jsonl(const std::string& path,
                        const std::vector<RetentionLabel>& labels);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace retentia::io
