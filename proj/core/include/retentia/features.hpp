#pragma once

// Feature assembly. Retention mode emits groups {H,R,U,C,D} plus the
// optional survey one-hot S; proxy mode emits {P,E,C,I,N}. Missing raw
// data is imputed as zeros plus a presence flag, so assembly never fails.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "retentia/types.hpp"

namespace retentia {

enum class FeatureMode { retention, proxy };

// Item-level aggregates, either derived from interaction logs or supplied
// by the synthetic world.
struct ItemMetadata {
    std::string item_id;
    int topic = -1;  // -1 when unknown
    double popularity = 0.0;
    double mean_watch_time = 0.0;
    double skip_rate = 0.0;
};

struct Demographics {
    int age_cohort = 0;        // 0..3
    double tenure_days = 0.0;
    int region = 0;
};

struct AssemblyContext {
    // item_id -> topic, for topic-share features; shares are zero when absent.
    const std::unordered_map<std::string, int>* item_topic = nullptr;
    int n_topics = 0;
    // Behavioral prediction scores for the P group (outputs of auxiliary
    // engagement models); zero when no predictor is available.
    double pred_like = 0.0;
    double pred_long_watch = 0.0;
};

// Deterministic for identical inputs. The 28-day aggregation window is
// [as_of_day - 28, as_of_day - 1]; same-day signals use as_of_day itself.
FeatureVector assemble_features(const std::vector<InteractionRecord>& history,
                                const ItemMetadata& item,
                                const Demographics& demographics,
                                const std::optional<SurveyResponse>& survey,
                                FeatureMode mode,
                                std::int64_t as_of_day,
                                const AssemblyContext& ctx = {});

std::unordered_map<std::string, ItemMetadata> compute_item_metadata(
    const std::vector<InteractionRecord>& interactions,
    const std::unordered_map<std::string, int>* item_topic = nullptr);

// Per-survey-row retention dataset: one row per response to `construct`,
// features assembled at the response day, label joined on user and day.
// Rows without a matching label are dropped.
Dataset build_retention_dataset(
    const std::vector<InteractionRecord>& interactions,
    const std::vector<SurveyResponse>& surveys,
    const std::vector<RetentionLabel>& labels,
    Construct construct,
    const std::unordered_map<std::string, Demographics>* demographics = nullptr,
    const AssemblyContext& ctx = {});

}  // namespace retentia
