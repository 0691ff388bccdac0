#pragma once

// Human-readable report rendering: a model-comparison table over the
// cross-validated deltas and an experiment table over the A/B metrics, plus
// a directory scanner that picks up recognized stage outputs.

#include <string>
#include <vector>

#include <json.hpp>

#include "retentia/evaluation.hpp"
#include "retentia/ranking.hpp"

namespace retentia::report {

// "***" p < 0.001, "**" p < 0.01, "*" p < 0.05, "" otherwise.
std::string significance_marker(double p_value);

// One row per comparison: construct, segment, accuracy / AUC deltas with
// bootstrap CIs and significance markers.
std::string render_model_comparison(const std::vector<evaluation::DeltaReport>& reports);

// Category / metric / delta +- CI rows, absolute and relative deltas.
std::string render_ab_table(const ranking::AbReport& report);

struct RenderedReport {
    std::string json_path;
    std::string text_path;
    nlohmann::json content;
};

// Recursively scans stage_dir for *.json files whose "kind" field is recognized
// (delta_report, ab_report), renders them, and writes report.json plus
// report.txt under out_dir. Throws "nothing to render" when no recognized
// artifact is found.
RenderedReport render_directory(const std::string& stage_dir, const std::string& out_dir);

}  // namespace retentia::report
