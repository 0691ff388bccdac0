#pragma once

// Offline evaluation harness: stratified k-fold cross-validation, paired
// baseline/augmented model comparison, and the low-signal segment filter.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "retentia/gbt.hpp"
#include "retentia/stats.hpp"
#include "retentia/types.hpp"

namespace retentia::evaluation {

struct FoldAssignment {
    std::vector<int> fold_of_row;
    int k = 10;
    std::uint64_t seed = 0;

    std::vector<std::size_t> fold_rows(int fold) const;
    std::vector<std::size_t> train_rows(int fold) const;
};

// Per-fold positive counts differ by at most one; deterministic given seed.
FoldAssignment stratified_kfold(const std::vector<int>& labels, int k = 10,
                                std::uint64_t seed = 0);

enum class Segment { overall, low_signal };

Segment parse_segment(const std::string& s);
const char* segment_name(Segment s);

struct DeltaReport {
    std::string construct;  // augmented survey construct, or "none"
    std::string segment = "overall";
    int k = 10;
    std::vector<double> fold_accuracy_baseline, fold_accuracy_augmented;
    std::vector<double> fold_auc_baseline, fold_auc_augmented;
    double delta_accuracy = 0.0;  // mean of per-fold differences, exactly
    double delta_auc = 0.0;
    stats::TestResult accuracy_test, auc_test;
    double accuracy_ci_low = 0.0, accuracy_ci_high = 0.0;  // bootstrap over fold deltas
    double auc_ci_low = 0.0, auc_ci_high = 0.0;
    std::string note;  // e.g. "no incremental signal" on degenerate deltas

    nlohmann::json to_json() const;
    static DeltaReport from_json(const nlohmann::json& j);
};

// Trains baseline (base_groups) and augmented (base_groups + S) models per
// fold, evaluates on the held-out fold, aggregates mean deltas with a
// paired t-test, Cohen's d and a bootstrap CI over fold deltas. The
// dataset's S columns must already be restricted to the construct under
// test; survey_construct labels the report. threads > 1 trains folds
// concurrently (results are order-independent).
DeltaReport paired_comparison(const Dataset& dataset,
                              const std::set<FeatureGroup>& base_groups,
                              std::optional<Construct> survey_construct,
                              const gbt::GbtParams& params, int k = 10,
                              std::uint64_t seed = 0, int bootstrap_iterations = 1000,
                              int threads = 1);

// low_signal keeps rows whose 28-day engagement total is strictly below
// the population median; overall is the identity.
Dataset segment_filter(const Dataset& dataset, Segment segment);

}  // namespace retentia::evaluation
