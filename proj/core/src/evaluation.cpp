#include "retentia/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "retentia/rng.hpp"

using nlohmann::json;

namespace retentia::evaluation {

std::vector<std::size_t> FoldAssignment::fold_rows(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
        if (fold_of_row[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::train_rows(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
        if (fold_of_row[i] != fold) out.push_back(i);
    }
    return out;
}

FoldAssignment stratified_kfold(const std::vector<int>& labels, int k,
                                std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: k >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? pos : neg).push_back(i);
    }
    if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("stratified_kfold: each class needs at least k rows");

    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    fa.fold_of_row.assign(labels.size(), 0);

    auto deal = [&](std::vector<std::size_t>& rows, std::uint64_t cls) {
        auto stream = rng::Stream::keyed(seed, 0x666f6c64ULL, cls);
        for (std::size_t j = rows.size(); j > 1; --j) {
            std::swap(rows[j - 1], rows[stream.uniform_int(j)]);
        }
        for (std::size_t j = 0; j < rows.size(); ++j) {
            fa.fold_of_row[rows[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
        }
    };
    deal(pos, 1);
    deal(neg, 0);
    return fa;
}

Segment parse_segment(const std::string& s) {
    if (s == "overall") return Segment::overall;
    if (s == "low_signal") return Segment::low_signal;
    throw std::invalid_argument("unknown segment '" + s + "'");
}

const char* segment_name(Segment s) {
    return s == Segment::overall ? "overall" : "low_signal";
}

json DeltaReport::to_json() const {
    auto test_json = [](const stats::TestResult& t) {
        return json{{"statistic", t.statistic},
                    {"p_value", t.p_value},
                    {"effect_size_d", t.effect_size_d},
                    {"ci_low", t.ci_low},
                    {"ci_high", t.ci_high}};
    };
    return json{{"kind", "delta_report"},
                {"construct", construct},
                {"segment", segment},
                {"k", k},
                {"fold_accuracy_baseline", fold_accuracy_baseline},
                {"fold_accuracy_augmented", fold_accuracy_augmented},
                {"fold_auc_baseline", fold_auc_baseline},
                {"fold_auc_augmented", fold_auc_augmented},
                {"delta_accuracy", delta_accuracy},
                {"delta_auc", delta_auc},
                {"accuracy_test", test_json(accuracy_test)},
                {"auc_test", test_json(auc_test)},
                {"accuracy_ci", {accuracy_ci_low, accuracy_ci_high}},
                {"auc_ci", {auc_ci_low, auc_ci_high}},
                {"note", note}};
}

DeltaReport DeltaReport::from_json(const json& j) {
    auto test_from = [](const json& t) {
        stats::TestResult out;
        out.statistic = t.at("statistic").get<double>();
        out.p_value = t.at("p_value").get<double>();
        out.effect_size_d = t.at("effect_size_d").get<double>();
        out.ci_low = t.at("ci_low").get<double>();
        out.ci_high = t.at("ci_high").get<double>();
        return out;
    };
    DeltaReport r;
    r.construct = j.at("construct").get<std::string>();
    r.segment = j.at("segment").get<std::string>();
    r.k = j.at("k").get<int>();
    r.fold_accuracy_baseline = j.at("fold_accuracy_baseline").get<std::vector<double>>();
    r.fold_accuracy_augmented = j.at("fold_accuracy_augmented").get<std::vector<double>>();
    r.fold_auc_baseline = j.at("fold_auc_baseline").get<std::vector<double>>();
    r.fold_auc_augmented = j.at("fold_auc_augmented").get<std::vector<double>>();
    r.delta_accuracy = j.at("delta_accuracy").get<double>();
    r.delta_auc = j.at("delta_auc").get<double>();
    r.accuracy_test = test_from(j.at("accuracy_test"));
    r.auc_test = test_from(j.at("auc_test"));
    r.accuracy_ci_low = j.at("accuracy_ci")[0].get<double>();
    r.accuracy_ci_high = j.at("accuracy_ci")[1].get<double>();
    r.auc_ci_low = j.at("auc_ci")[0].get<double>();
    r.auc_ci_high = j.at("auc_ci")[1].get<double>();
    r.note = j.at("note").get<std::string>();
    return r;
}

namespace {

struct FoldMetrics {
    double acc_base = 0, acc_aug = 0, auc_base = 0, auc_aug = 0;
};

FoldMetrics evaluate_fold(const Dataset& base_ds, const Dataset& aug_ds,
                          const FoldAssignment& folds, int fold,
                          const gbt::GbtParams& params) {
    const auto train = folds.train_rows(fold);
    const auto test = folds.fold_rows(fold);

    const Dataset base_train = base_ds.select_rows(train);
    const Dataset aug_train = aug_ds.select_rows(train);
    const gbt::GbtEnsemble m_base = gbt::train_gbt(base_train, params);
    const gbt::GbtEnsemble m_aug = gbt::train_gbt(aug_train, params);

    std::vector<double> s_base(test.size()), s_aug(test.size());
    std::vector<int> y(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        s_base[i] = m_base.predict_proba(base_ds.row(test[i]));
        s_aug[i] = m_aug.predict_proba(aug_ds.row(test[i]));
        y[i] = base_ds.labels[test[i]];
    }
    FoldMetrics fm;
    fm.acc_base = stats::accuracy(s_base, y);
    fm.acc_aug = stats::accuracy(s_aug, y);
    fm.auc_base = stats::roc_auc(s_base, y);
    fm.auc_aug = stats::roc_auc(s_aug, y);
    return fm;
}

}  // namespace

DeltaReport paired_comparison(const Dataset& dataset,
                              const std::set<FeatureGroup>& base_groups,
                              std::optional<Construct> survey_construct,
                              const gbt::GbtParams& params, int k,
                              std::uint64_t seed, int bootstrap_iterations,
                              int threads) {
    const Dataset base_ds = dataset.select_groups(base_groups);
    std::set<FeatureGroup> aug_groups = base_groups;
    if (survey_construct.has_value()) aug_groups.insert(FeatureGroup::S);
    const Dataset aug_ds = dataset.select_groups(aug_groups);

    const FoldAssignment folds = stratified_kfold(dataset.labels, k, seed);

    std::vector<FoldMetrics> metrics(k);
    if (threads > 1) {
        std::vector<std::future<FoldMetrics>> futures;
        futures.reserve(k);
        for (int f = 0; f < k; ++f) {
            futures.push_back(std::async(std::launch::async, [&, f] {
                return evaluate_fold(base_ds, aug_ds, folds, f, params);
            }));
        }
        for (int f = 0; f < k; ++f) metrics[f] = futures[f].get();
    } else {
        for (int f = 0; f < k; ++f) metrics[f] = evaluate_fold(base_ds, aug_ds, folds, f, params);
    }

    DeltaReport r;
    r.construct = survey_construct.has_value() ? construct_name(*survey_construct) : "none";
    r.k = k;
    std::vector<double> acc_delta(k), auc_delta(k);
    for (int f = 0; f < k; ++f) {
        r.fold_accuracy_baseline.push_back(metrics[f].acc_base);
        r.fold_accuracy_augmented.push_back(metrics[f].acc_aug);
        r.fold_auc_baseline.push_back(metrics[f].auc_base);
        r.fold_auc_augmented.push_back(metrics[f].auc_aug);
        acc_delta[f] = metrics[f].acc_aug - metrics[f].acc_base;
        auc_delta[f] = metrics[f].auc_aug - metrics[f].auc_base;
    }
    r.delta_accuracy = stats::mean(acc_delta);
    r.delta_auc = stats::mean(auc_delta);
    try {
        r.accuracy_test = stats::paired_t_test(r.fold_accuracy_augmented, r.fold_accuracy_baseline);
        r.auc_test = stats::paired_t_test(r.fold_auc_augmented, r.fold_auc_baseline);
    } catch (const std::invalid_argument&) {
        // identical fold metrics: the paired test is degenerate
        r.note = "no incremental signal";
        r.accuracy_test = stats::TestResult{};
        r.auc_test = stats::TestResult{};
    }
    const auto mean_stat = [](std::span<const double> v) { return stats::mean(v); };
    std::tie(r.accuracy_ci_low, r.accuracy_ci_high) = stats::bootstrap_ci(
        acc_delta, mean_stat, bootstrap_iterations, 0.95, rng::mix(seed, 0xacc));
    std::tie(r.auc_ci_low, r.auc_ci_high) = stats::bootstrap_ci(
        auc_delta, mean_stat, bootstrap_iterations, 0.95, rng::mix(seed, 0xa0c));
    return r;
}

Dataset segment_filter(const Dataset& dataset, Segment segment) {
    if (segment == Segment::overall) return dataset;
    if (dataset.engagement_28d.size() != dataset.n())
        throw std::invalid_argument("segment_filter: dataset lacks engagement totals");
    std::vector<double> totals = dataset.engagement_28d;
    std::sort(totals.begin(), totals.end());
    const double median = totals.empty()
                              ? 0.0
                              : (totals.size() % 2 == 1
                                     ? totals[totals.size() / 2]
                                     : 0.5 * (totals[totals.size() / 2 - 1] +
                                              totals[totals.size() / 2]));
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dataset.n(); ++i) {
        if (dataset.engagement_28d[i] < median) keep.push_back(i);
    }
    return dataset.select_rows(keep);
}

}  // namespace retentia::evaluation
