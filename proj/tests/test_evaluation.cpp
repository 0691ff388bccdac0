#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "retentia/evaluation.hpp"
#include "retentia/rng.hpp"

using namespace retentia;

namespace {

// Dataset with informative base features and an S group whose usefulness is
// controlled by `survey_signal`.
Dataset make_dataset(std::size_t n, double survey_signal, std::uint64_t seed) {
    Dataset ds;
    ds.feature_names = {"h0", "h1", "rr_level_1", "rr_level_2", "rr_level_4",
                        "rr_level_5"};
    ds.feature_groups = {FeatureGroup::H, FeatureGroup::H, FeatureGroup::S,
                         FeatureGroup::S, FeatureGroup::S, FeatureGroup::S};
    auto s = rng::Stream::keyed(seed, 17, 0, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double h0 = s.normal();
        const double h1 = s.normal();
        const double latent = 0.8 * h0 + survey_signal * s.normal();
        // survey level tracks the latent only when survey_signal > 0
        const double su = survey_signal > 0.0 ? latent : s.normal();
        int level_idx = su < -0.6 ? 0 : su < 0.0 ? 1 : su < 0.6 ? 2 : 3;
        std::vector<double> row = {h0, h1, 0, 0, 0, 0};
        row[2 + level_idx] = 1.0;
        const double z = 0.6 * h0 - 0.4 * h1 + (survey_signal > 0 ? 1.5 * su : 0.0);
        ds.x.insert(ds.x.end(), row.begin(), row.end());
        ds.labels.push_back(s.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0);
        ds.engagement_28d.push_back(std::floor(50.0 * s.uniform()));
        ds.user_ids.push_back("u" + std::to_string(i));
    }
    return ds;
}

}  // namespace

TEST_CASE("stratified k-fold balances positives and partitions rows") {
    std::vector<int> labels(100);
    for (std::size_t i = 0; i < 50; ++i) labels[i] = 1;
    const auto folds = evaluation::stratified_kfold(labels, 10, 3);
    REQUIRE(folds.fold_of_row.size() == 100);
    for (int f = 0; f < 10; ++f) {
        const auto rows = folds.fold_rows(f);
        CHECK(rows.size() == 10);
        int pos = 0;
        for (auto r : rows) pos += labels[r];
        CHECK(pos == 5);
        const auto train = folds.train_rows(f);
        CHECK(train.size() == 90);
    }

    // 101 rows, 51 positives: fold sizes 10 or 11, positives 5 or 6
    std::vector<int> odd(101);
    for (std::size_t i = 0; i < 51; ++i) odd[i] = 1;
    const auto f2 = evaluation::stratified_kfold(odd, 10, 3);
    std::vector<int> pos_count(10, 0), size_count(10, 0);
    for (std::size_t i = 0; i < odd.size(); ++i) {
        ++size_count[f2.fold_of_row[i]];
        pos_count[f2.fold_of_row[i]] += odd[i];
    }
    for (int f = 0; f < 10; ++f) {
        CHECK(size_count[f] >= 10);
        CHECK(size_count[f] <= 11);
        CHECK(pos_count[f] >= 5);
        CHECK(pos_count[f] <= 6);
    }

    // deterministic given the seed
    const auto again = evaluation::stratified_kfold(labels, 10, 3);
    CHECK(again.fold_of_row == folds.fold_of_row);
    const auto other = evaluation::stratified_kfold(labels, 10, 4);
    CHECK(other.fold_of_row != folds.fold_of_row);

    // fewer positives than folds is rejected
    std::vector<int> sparse(30, 0);
    sparse[0] = 1;
    CHECK_THROWS_AS(evaluation::stratified_kfold(sparse, 10, 0), std::invalid_argument);
}

TEST_CASE("segment_filter keeps strictly-below-median engagement rows") {
    Dataset ds = make_dataset(200, 0.0, 5);
    const Dataset all = evaluation::segment_filter(ds, evaluation::Segment::overall);
    CHECK(all.n() == ds.n());
    CHECK(all.x == ds.x);

    const Dataset low = evaluation::segment_filter(ds, evaluation::Segment::low_signal);
    CHECK(low.n() > 0);
    CHECK(low.n() < ds.n());
    std::vector<double> sorted = ds.engagement_28d;
    std::sort(sorted.begin(), sorted.end());
    const double median = (sorted[99] + sorted[100]) / 2.0;
    for (double e : low.engagement_28d) CHECK(e < median);

    // all-equal engagement: nothing is strictly below the median
    Dataset flat = ds;
    std::fill(flat.engagement_28d.begin(), flat.engagement_28d.end(), 7.0);
    const Dataset none = evaluation::segment_filter(flat, evaluation::Segment::low_signal);
    CHECK(none.n() == 0);
}

TEST_CASE("segment names round-trip") {
    CHECK(evaluation::parse_segment("overall") == evaluation::Segment::overall);
    CHECK(evaluation::parse_segment("low_signal") == evaluation::Segment::low_signal);
    CHECK(std::string(evaluation::segment_name(evaluation::Segment::low_signal)) ==
          "low_signal");
    CHECK_THROWS_AS(evaluation::parse_segment("nope"), std::invalid_argument);
}

TEST_CASE("paired comparison with no survey augmentation reports zero deltas") {
    const Dataset ds = make_dataset(600, 0.0, 7);
    gbt::GbtParams params;
    params.n_trees = 10;
    params.max_depth = 2;
    const auto report = evaluation::paired_comparison(
        ds, {FeatureGroup::H}, std::nullopt, params, 5, 1, 200);
    CHECK(report.construct == "none");
    CHECK(report.delta_accuracy == 0.0);
    CHECK(report.delta_auc == 0.0);
    CHECK(report.note == "no incremental signal");
    CHECK(report.fold_accuracy_baseline == report.fold_accuracy_augmented);
    CHECK(report.fold_auc_baseline == report.fold_auc_augmented);
}

TEST_CASE("paired comparison detects a planted survey signal") {
    const Dataset ds = make_dataset(3000, 0.8, 8);
    gbt::GbtParams params;
    params.n_trees = 30;
    params.max_depth = 3;
    const auto report = evaluation::paired_comparison(
        ds, {FeatureGroup::H}, Construct::RetentiveRelevance, params, 5, 1, 300);
    CHECK(report.construct == "retentive_relevance");
    CHECK(report.delta_auc > 0.02);
    CHECK(report.auc_test.p_value < 0.05);
    CHECK(report.auc_ci_low > 0.0);

    // mean deltas recompute bit-exactly from the per-fold series
    double d_acc = 0.0, d_auc = 0.0;
    for (std::size_t f = 0; f < report.fold_auc_baseline.size(); ++f) {
        d_acc += report.fold_accuracy_augmented[f] - report.fold_accuracy_baseline[f];
        d_auc += report.fold_auc_augmented[f] - report.fold_auc_baseline[f];
    }
    d_acc /= static_cast<double>(report.fold_accuracy_baseline.size());
    d_auc /= static_cast<double>(report.fold_auc_baseline.size());
    CHECK(report.delta_accuracy == d_acc);
    CHECK(report.delta_auc == d_auc);
}

TEST_CASE("paired comparison is deterministic and thread-count invariant") {
    const Dataset ds = make_dataset(1200, 0.5, 9);
    gbt::GbtParams params;
    params.n_trees = 12;
    params.max_depth = 2;
    const auto a = evaluation::paired_comparison(
        ds, {FeatureGroup::H}, Construct::RetentiveRelevance, params, 5, 2, 200, 1);
    const auto b = evaluation::paired_comparison(
        ds, {FeatureGroup::H}, Construct::RetentiveRelevance, params, 5, 2, 200, 4);
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("delta report round-trips through json") {
    const Dataset ds = make_dataset(600, 0.5, 10);
    gbt::GbtParams params;
    params.n_trees = 8;
    params.max_depth = 2;
    const auto report = evaluation::paired_comparison(
        ds, {FeatureGroup::H}, Construct::RetentiveRelevance, params, 5, 3, 100);
    const auto j = report.to_json();
    CHECK(j.at("kind") == "delta_report");
    const auto restored = evaluation::DeltaReport::from_json(j);
    CHECK(restored.to_json() == j);
}
