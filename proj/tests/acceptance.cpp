// End-to-end acceptance checks: planted-effect reproductions on the
// synthetic world plus numerical oracles with pinned tolerances. Each case
// is registered as its own ctest entry.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "retentia/bias.hpp"
#include "retentia/evaluation.hpp"
#include "retentia/features.hpp"
#include "retentia/gbt.hpp"
#include "retentia/pipeline.hpp"
#include "retentia/proxy.hpp"
#include "retentia/ranking.hpp"
#include "retentia/rng.hpp"
#include "retentia/shap.hpp"
#include "retentia/stats.hpp"
#include "retentia/synthworld.hpp"

using namespace retentia;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

// World with a strong planted intent -> retention path; the comparison
// constructs still share only the common factor with the retention one.
synth::WorldConfig strong_world(std::size_t n_users, std::uint64_t seed) {
    synth::WorldConfig cfg;
    cfg.n_users = n_users;
    cfg.n_items = 400;
    cfg.horizon_days = 7;
    cfg.intent_effect = 0.30;
    cfg.seed = seed;
    return cfg;
}

struct BuiltWorld {
    synth::SynthWorld world;
    synth::SimData sim;
    std::unordered_map<std::string, Demographics> demo;
    AssemblyContext ctx;
};

BuiltWorld build_world(const synth::WorldConfig& cfg) {
    BuiltWorld b{synth::SynthWorld::generate(cfg), {}, {}, {}};
    b.sim = b.world.simulate();
    b.demo = b.world.demographics();
    b.ctx.item_topic = &b.world.item_topic();
    b.ctx.n_topics = cfg.n_topics;
    return b;
}

Dataset retention_dataset(const BuiltWorld& b, Construct c) {
    return build_retention_dataset(b.sim.interactions, b.sim.surveys, b.sim.labels,
                                   c, &b.demo, b.ctx);
}

// Mean served-affinity exposure per user over the history window, matching
// the generative outcome draw.
std::unordered_map<std::string, double> exposure_by_user(const BuiltWorld& b) {
    const std::int64_t sday = b.world.survey_day();
    std::unordered_map<std::string, double> sum;
    std::unordered_map<std::string, std::int64_t> count;
    for (const auto& r : b.sim.interactions) {
        if (r.day > sday) continue;
        const std::size_t u = b.world.user_index(r.user_id);
        const std::size_t v = static_cast<std::size_t>(std::stoul(r.item_id.substr(1)));
        sum[r.user_id] += b.world.affinity(u, v);
        ++count[r.user_id];
    }
    std::unordered_map<std::string, double> out;
    for (const auto& [id, s] : sum) out[id] = s / static_cast<double>(count[id]);
    return out;
}

const std::set<FeatureGroup> kBaseGroups = {FeatureGroup::H, FeatureGroup::R,
                                            FeatureGroup::U, FeatureGroup::C,
                                            FeatureGroup::D};

gbt::GbtParams acceptance_gbt(int n_trees = 50) {
    gbt::GbtParams p;
    p.n_trees = n_trees;
    p.learning_rate = 0.1;
    p.max_depth = 3;
    p.min_samples_leaf = 20;
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RETENTIA_CLI_PATH) + " " + args +
                            " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("paired_comparison_structure") {
    const BuiltWorld b = build_world(strong_world(50000, 101));
    const auto params = acceptance_gbt();
    const int threads = worker_threads();

    const Dataset rr = retention_dataset(b, Construct::RetentiveRelevance);
    const auto rr_report = evaluation::paired_comparison(
        rr, kBaseGroups, Construct::RetentiveRelevance, params, 10, 7, 1000, threads);
    CHECK(rr_report.delta_accuracy > 0.0);
    CHECK(rr_report.delta_auc >= 0.02);
    CHECK(rr_report.auc_test.p_value < 0.01);
    CHECK(rr_report.accuracy_test.p_value < 0.01);

    const Dataset wyt = retention_dataset(b, Construct::WorthYourTime);
    const auto wyt_report = evaluation::paired_comparison(
        wyt, kBaseGroups, Construct::WorthYourTime, params, 10, 7, 1000, threads);
    CHECK(wyt_report.auc_test.p_value > 0.05);
    CHECK(std::abs(wyt_report.delta_auc) < 0.01);

    const Dataset im = retention_dataset(b, Construct::InterestMatching);
    const auto im_report = evaluation::paired_comparison(
        im, kBaseGroups, Construct::InterestMatching, params, 10, 7, 1000, threads);
    CHECK(im_report.auc_test.p_value > 0.05);
    CHECK(std::abs(im_report.delta_auc) < 0.01);

    // the generative oracle upper-bounds any model's held-out AUC
    const auto exposure = exposure_by_user(b);
    std::vector<double> oracle;
    for (const auto& id : rr.user_ids) {
        const auto it = exposure.find(id);
        oracle.push_back(
            b.world.true_retention_prob(id, it == exposure.end() ? 0.0 : it->second));
    }
    const double oracle_auc = stats::roc_auc(oracle, rr.labels);
    const double model_auc = stats::mean(rr_report.fold_auc_augmented);
    CHECK(model_auc <= oracle_auc + 0.01);
}

TEST_CASE("low_signal_amplification") {
    const auto params = acceptance_gbt(30);
    const int threads = worker_threads();
    int ordered = 0;
    for (int rep = 0; rep < 10; ++rep) {
        const BuiltWorld b =
            build_world(strong_world(12000, 200 + static_cast<std::uint64_t>(rep)));
        const Dataset rr = retention_dataset(b, Construct::RetentiveRelevance);
        const auto overall = evaluation::paired_comparison(
            rr, kBaseGroups, Construct::RetentiveRelevance, params, 5,
            static_cast<std::uint64_t>(rep), 200, threads);
        const Dataset low =
            evaluation::segment_filter(rr, evaluation::Segment::low_signal);
        const auto low_report = evaluation::paired_comparison(
            low, kBaseGroups, Construct::RetentiveRelevance, params, 5,
            static_cast<std::uint64_t>(rep), 200, threads);
        if (low_report.delta_auc > overall.delta_auc) ++ordered;
    }
    CHECK(ordered >= 8);
}

TEST_CASE("cbps_balance") {
    auto cfg = strong_world(20000, 303);
    cfg.nonresponse_coefs = {1.2, 0.3, 0.0, 0.2};  // tier-loaded nonresponse
    const auto world = synth::SynthWorld::generate(cfg);
    const auto sim = world.simulate();

    std::vector<int> responded(cfg.n_users, 0);
    for (const auto& s : sim.surveys) {
        if (s.construct == Construct::RetentiveRelevance)
            responded[world.user_index(s.user_id)] = 1;
    }
    std::vector<std::vector<double>> covariates;
    covariates.reserve(cfg.n_users);
    for (std::size_t u = 0; u < cfg.n_users; ++u)
        covariates.push_back(world.covariate_row(u));

    // pre-weighting imbalance on the loaded covariate
    const std::size_t p = covariates.front().size();
    std::vector<std::vector<double>> columns(p, std::vector<double>(cfg.n_users));
    for (std::size_t u = 0; u < cfg.n_users; ++u)
        for (std::size_t j = 0; j < p; ++j) columns[j][u] = covariates[u][j];
    CHECK(std::abs(bias::compute_smd(columns[0], responded)) > 0.3);

    const auto model = bias::fit_cbps(covariates, responded,
                                      synth::WorldConfig::covariate_names());
    CHECK(model.moment_residual <= 1e-8);

    const auto report = bias::balance_report(
        covariates, synth::WorldConfig::covariate_names(), responded, model);
    for (const auto& row : report.at("covariates")) {
        INFO("covariate: " << row.at("covariate").get<std::string>());
        CHECK(std::abs(row.at("smd_weighted").get<double>()) < 0.1);
    }
}

TEST_CASE("threshold_calibration") {
    // i.i.d. calibrated probabilistic scores, disjoint calibration/held-out;
    // uniform on [0.35, 0.95] so both precision targets are reachable with
    // tau_demote < tau_boost (crossings at 0.45 and 0.65)
    auto draw = [](std::size_t n, std::uint64_t key) {
        auto s = rng::Stream::keyed(404, key, 0, 0);
        std::pair<std::vector<double>, std::vector<int>> out;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 0.35 + 0.60 * s.uniform();
            out.first.push_back(p);
            out.second.push_back(s.bernoulli(p) ? 1 : 0);
        }
        return out;
    };
    const auto [cal_scores, cal_labels] = draw(20000, 1);
    const auto [held_scores, held_labels] = draw(20000, 2);

    const auto t = proxy::calibrate_thresholds(cal_scores, cal_labels, 0.80, 0.60);
    CHECK(t.tau_demote < t.tau_boost);
    CHECK(t.achieved_pos_precision >= 0.80);
    CHECK(t.achieved_neg_precision >= 0.60);

    auto precision_above = [](const std::vector<double>& scores,
                              const std::vector<int>& labels, double tau) {
        double sel = 0.0, pos = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] > tau) {
                sel += 1.0;
                pos += labels[i];
            }
        }
        return pos / sel;
    };
    auto precision_below = [](const std::vector<double>& scores,
                              const std::vector<int>& labels, double tau) {
        double sel = 0.0, neg = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] < tau) {
                sel += 1.0;
                neg += 1 - labels[i];
            }
        }
        return neg / sel;
    };
    CHECK(precision_above(held_scores, held_labels, t.tau_boost) >= 0.80 - 0.02);
    CHECK(precision_below(held_scores, held_labels, t.tau_demote) >= 0.60 - 0.02);
}

TEST_CASE("ranking_algebra") {
    proxy::ProxyModel model;
    model.weights = {1.0};
    model.bias = 0.0;
    model.feature_schema = {"s"};

    auto s = rng::Stream::keyed(505, 0, 0, 0);
    int violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        ranking::RankingPolicy policy;
        policy.alpha = s.uniform();
        policy.beta = 0.95 * s.uniform();
        const double a = 0.05 + 0.9 * s.uniform();
        const double bnd = 0.05 + 0.9 * s.uniform();
        policy.thresholds.tau_boost = std::max(a, bnd);
        policy.thresholds.tau_demote = std::min(a, bnd);
        if (policy.thresholds.tau_boost == policy.thresholds.tau_demote) continue;
        policy.validate();

        const std::size_t n = 5 + s.uniform_int(26);
        std::vector<ranking::Candidate> cands;
        std::vector<double> p_hats;
        for (std::size_t i = 0; i < n; ++i) {
            ranking::Candidate c;
            c.item_id = "i" + std::to_string(i);
            c.score_base = 2.0 * s.normal();
            const double p_hat = 0.01 + 0.98 * s.uniform();
            c.features.push(FeatureGroup::P, "s",
                            std::log(p_hat / (1.0 - p_hat)));
            p_hats.push_back(p_hat);
            cands.push_back(std::move(c));
        }
        const auto ranked = ranking::rank_slate(cands, model, policy);

        for (const auto& r : ranked) {
            // exact decomposition
            if (r.score_final != r.score_base + r.boost + r.demote) ++violations;
            // boost and demote never both fire
            if (r.boost != 0.0 && r.demote != 0.0) ++violations;
            // closed forms
            const double expect_boost =
                r.p_hat > policy.thresholds.tau_boost ? policy.alpha : 0.0;
            const double expect_demote =
                r.p_hat < policy.thresholds.tau_demote
                    ? -policy.beta * (policy.thresholds.tau_demote - r.p_hat)
                    : 0.0;
            if (r.boost != expect_boost) ++violations;
            if (r.demote != expect_demote) ++violations;
        }
        // descending final-score order
        for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
            if (ranked[i].score_final < ranked[i + 1].score_final) ++violations;
        }
        // neutral-zone candidates preserve their base-score order
        std::vector<const ranking::ScoredCandidate*> neutral;
        for (const auto& r : ranked) {
            if (r.boost == 0.0 && r.demote == 0.0) neutral.push_back(&r);
        }
        for (std::size_t i = 0; i + 1 < neutral.size(); ++i) {
            if (neutral[i]->score_base < neutral[i + 1]->score_base) ++violations;
        }
        // raising one candidate's score never lowers its rank
        const std::size_t pick = s.uniform_int(n);
        const double bumped = 0.5 + 0.5 * p_hats[pick];
        auto bumped_cands = cands;
        bumped_cands[pick].features.values[0] = std::log(bumped / (1.0 - bumped));
        const auto reranked = ranking::rank_slate(bumped_cands, model, policy);
        auto rank_of = [](const std::vector<ranking::ScoredCandidate>& v,
                          const std::string& id) {
            for (std::size_t i = 0; i < v.size(); ++i)
                if (v[i].item_id == id) return i;
            return v.size();
        };
        if (rank_of(reranked, cands[pick].item_id) >
            rank_of(ranked, cands[pick].item_id))
            ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("ab_harness_validity") {
    // A/A: identical null policies in both arms, false-positive rate of the
    // sessions-per-user test across 100 replications
    synth::WorldConfig aa_cfg;
    aa_cfg.n_users = 1500;
    aa_cfg.n_items = 120;
    aa_cfg.horizon_days = 6;
    aa_cfg.seed = 606;
    const auto aa_world = synth::SynthWorld::generate(aa_cfg);
    const auto aa_sim = aa_world.simulate();
    const auto aa_bundle = pipeline::build_proxy_dataset(
        aa_sim.interactions, aa_sim.surveys, &aa_world.item_topic(),
        aa_cfg.n_topics, aa_world.survey_day());
    const auto aa_model = proxy::train_proxy(aa_bundle.dataset, 1e-2);

    ranking::RankingPolicy null_policy;
    null_policy.thresholds.tau_boost = 0.76;
    null_policy.thresholds.tau_demote = 0.38;

    ranking::AbOptions aa_opts;
    aa_opts.slate_size = 4;
    aa_opts.candidate_pool = 10;
    aa_opts.bootstrap_iterations = 50;
    int false_positives = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto report = ranking::ab_simulate(
            aa_world, *aa_bundle.featurizer, aa_model, null_policy, null_policy, 3,
            1000 + static_cast<std::uint64_t>(rep), aa_opts);
        if (report.metric("sessions_per_user").test.p_value < 0.05) ++false_positives;
    }
    CHECK(false_positives >= 2);
    CHECK(false_positives <= 9);

    // planted effect: boosting predicted-retentive items raises sessions and
    // demotion suppresses low-quality exposure
    synth::WorldConfig fx_cfg;
    fx_cfg.n_users = 20000;
    fx_cfg.n_items = 400;
    fx_cfg.horizon_days = 9;
    fx_cfg.exposure_effect = 0.25;
    fx_cfg.seed = 607;
    const auto fx_world = synth::SynthWorld::generate(fx_cfg);
    const auto fx_sim = fx_world.simulate();
    const auto fx_bundle = pipeline::build_proxy_dataset(
        fx_sim.interactions, fx_sim.surveys, &fx_world.item_topic(),
        fx_cfg.n_topics, fx_world.survey_day());
    const auto fx_model = proxy::train_proxy(fx_bundle.dataset, 1e-3);

    // thresholds at score quantiles keep both zones populated
    std::vector<double> scores;
    const Dataset& ds = fx_bundle.dataset;
    for (std::size_t i = 0; i < ds.n(); ++i) scores.push_back(fx_model.predict(ds.row(i)));
    std::sort(scores.begin(), scores.end());
    ranking::RankingPolicy treatment;
    treatment.alpha = 0.2;
    treatment.beta = 0.5;
    treatment.thresholds.tau_boost = stats::quantile_sorted(scores, 0.70);
    treatment.thresholds.tau_demote = stats::quantile_sorted(scores, 0.30);
    treatment.validate();
    ranking::RankingPolicy control;
    control.thresholds = treatment.thresholds;

    const auto report = ranking::ab_simulate(fx_world, *fx_bundle.featurizer,
                                             fx_model, control, treatment, 14, 99);
    const auto& sessions = report.metric("sessions_per_user");
    CHECK(sessions.delta > 0.0);
    CHECK(sessions.test.p_value < 0.05);
    const auto& low_quality = report.metric("low_quality_exposure_rate");
    CHECK(low_quality.delta < 0.0);
}

TEST_CASE("numerical_oracles") {
    // logistic gradient vs finite differences
    auto stream = rng::Stream::keyed(707, 0, 0, 0);
    {
        std::vector<double> x;
        std::vector<int> labels;
        const std::size_t n = 300;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = stream.normal();
            const double b = stream.normal();
            x.insert(x.end(), {a, b});
            labels.push_back(stream.bernoulli(1.0 / (1.0 + std::exp(-a))) ? 1 : 0);
        }
        const std::vector<double> w = {0.4, -0.7};
        const double bias_term = 0.2;
        const double lambda = 0.01;
        const auto grad = proxy::proxy_gradient(x, n, labels, w, bias_term, lambda);
        const double eps = 1e-6;
        for (std::size_t j = 0; j < 2; ++j) {
            auto wp = w, wm = w;
            wp[j] += eps;
            wm[j] -= eps;
            const double fd =
                (proxy::proxy_objective(x, n, labels, wp, bias_term, lambda) -
                 proxy::proxy_objective(x, n, labels, wm, bias_term, lambda)) /
                (2.0 * eps);
            CHECK(std::abs(grad[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-6);
        }
    }

    // GBT log-loss gradient/hessian vs finite differences in margin space
    {
        auto loss = [](double y, double margin) {
            const double p = gbt::sigmoid(margin);
            return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        };
        const double eps = 1e-6;
        for (double margin : {-1.5, 0.0, 0.8, 2.0}) {
            for (double y : {0.0, 1.0}) {
                const double p = gbt::sigmoid(margin);
                const double fd =
                    (loss(y, margin + eps) - loss(y, margin - eps)) / (2.0 * eps);
                CHECK(std::abs(gbt::logloss_gradient(y, p) + fd) /
                          std::max(1.0, std::abs(fd)) <
                      1e-6);
                const double heps = 1e-4;  // wider step for the second difference
                const double fd2 = (loss(y, margin + heps) - 2.0 * loss(y, margin) +
                                    loss(y, margin - heps)) /
                                   (heps * heps);
                CHECK(gbt::logloss_hessian(p) == doctest::Approx(fd2).epsilon(1e-3));
            }
        }
    }

    // AUC vs the O(n^2) pairwise oracle, bit-exact at n = 500 with ties
    {
        std::vector<double> scores(500);
        std::vector<int> labels(500);
        for (std::size_t i = 0; i < 500; ++i) {
            scores[i] = std::floor(stream.uniform() * 25.0) / 25.0;
            labels[i] = stream.bernoulli(0.4) ? 1 : 0;
        }
        double num = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < 500; ++i) {
            if (labels[i] != 1) continue;
            for (std::size_t j = 0; j < 500; ++j) {
                if (labels[j] != 0) continue;
                ++pairs;
                if (scores[i] > scores[j]) num += 1.0;
                else if (scores[i] == scores[j]) num += 0.5;
            }
        }
        CHECK(stats::roc_auc(scores, labels) == num / static_cast<double>(pairs));
    }

    // exact Shapley vs subset enumeration, plus the efficiency identity
    {
        const std::size_t p = 4, n = 600;
        std::vector<double> x;
        std::vector<int> labels;
        std::vector<std::string> schema = {"f0", "f1", "f2", "f3"};
        for (std::size_t i = 0; i < n; ++i) {
            double z = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double v = stream.normal();
                x.push_back(v);
                if (j < 2) z += (j == 0 ? 1.4 : -1.0) * v;
            }
            labels.push_back(stream.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0);
        }
        auto params = acceptance_gbt(20);
        const auto model = gbt::train_gbt(x, n, schema, labels, params);
        const std::size_t rows = 30;
        std::vector<double> background(x.begin(), x.begin() + rows * p);

        auto coalition_value = [&](const std::vector<double>& point, unsigned mask) {
            double total = 0.0;
            std::vector<double> row(p);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < p; ++j)
                    row[j] = (mask >> j) & 1u ? point[j] : background[r * p + j];
                total += model.predict_proba(std::span<const double>(row));
            }
            return total / static_cast<double>(rows);
        };
        auto factorial = [](std::size_t k) {
            double f = 1.0;
            for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
            return f;
        };
        for (int point_idx = 0; point_idx < 3; ++point_idx) {
            std::vector<double> point = {stream.normal(), stream.normal(),
                                         stream.normal(), stream.normal()};
            const auto report = shap::shap_values(model, point, background, rows,
                                                  shap::ShapMode::exact);
            std::vector<double> oracle(p, 0.0);
            for (unsigned mask = 0; mask < (1u << p); ++mask) {
                const int sz = __builtin_popcount(mask);
                const double v = coalition_value(point, mask);
                for (std::size_t j = 0; j < p; ++j) {
                    if ((mask >> j) & 1u) continue;
                    const double w = factorial(sz) * factorial(p - sz - 1) / factorial(p);
                    oracle[j] += w * (coalition_value(point, mask | (1u << j)) - v);
                }
            }
            for (std::size_t j = 0; j < p; ++j)
                CHECK(std::abs(report.phi[j] - oracle[j]) <= 1e-9);
            const double total =
                std::accumulate(report.phi.begin(), report.phi.end(), 0.0);
            CHECK(std::abs(report.explained - report.baseline - total) <= 1e-9);
        }
    }

    // MI: non-negativity, symmetry, and H of a fair binary variable
    {
        const std::size_t n = 100000;
        std::vector<double> coin(n), other(n);
        for (std::size_t i = 0; i < n; ++i) {
            coin[i] = static_cast<double>(i % 2);  // exactly fair
            other[i] = stream.normal();
        }
        CHECK(stats::mutual_information(coin, coin) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-3));
        const double mxy = stats::mutual_information(coin, other);
        CHECK(mxy >= 0.0);
        CHECK(mxy ==
              doctest::Approx(stats::mutual_information(other, coin)).epsilon(1e-12));
    }
}

TEST_CASE("validity_statistics") {
    synth::WorldConfig cfg;
    cfg.n_users = 50000;
    cfg.n_items = 400;
    cfg.seed = 808;
    const auto world = synth::SynthWorld::generate(cfg);

    std::vector<double> rr, wyt, im, intent;
    auto s = rng::Stream::keyed(809, 0, 0, 0);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        // each construct surveys its own item, as the survey generator does
        rr.push_back(world.survey_rating(u, world.sample_item(s),
                                         Construct::RetentiveRelevance));
        wyt.push_back(world.survey_rating(u, world.sample_item(s),
                                          Construct::WorthYourTime));
        im.push_back(world.survey_rating(u, world.sample_item(s),
                                         Construct::InterestMatching));
        intent.push_back(world.users()[u].intent);
    }
    CHECK(std::abs(stats::pearson_r(rr, wyt).r - 0.63) <= 0.03);
    CHECK(std::abs(stats::pearson_r(rr, im).r - 0.58) <= 0.03);

    const auto cmp = stats::fisher_z_compare(0.69, 2000, 0.51, 2000);
    CHECK(cmp.statistic > 2.58);

    // the survey signal couples only weakly to the latent driver
    const double mi = stats::mutual_information(rr, intent);
    CHECK(mi < 0.15);
    CHECK(mi > 0.0);
}

TEST_CASE("determinism") {
    const fs::path dir = fs::temp_directory_path() / "retentia_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const json cfg = {
        {"world",
         {{"n_users", 3000},
          {"n_items", 120},
          {"horizon_days", 5},
          {"behavior_intent_weight", 0.3},
          {"nonresponse_coefs", {0.8, 0.0, 0.0, 0.0}}}},
        {"gbt", {{"n_trees", 8}, {"max_depth", 2}}},
        {"k_folds", 5},
        {"bootstrap_iterations", 100},
        {"pos_precision_target", 0.70},
        {"neg_precision_target", 0.65},
        {"ab_days", 2},
        {"slate_size", 4},
        {"candidate_pool", 10},
        {"explain_rows", 1},
        {"explain_background", 20},
        {"seed", 9}};
    const fs::path cfg_path = dir / "config.json";
    std::ofstream(cfg_path) << cfg.dump(2);

    const std::vector<std::string> stages = {
        "generate", "debias",  "validity",    "train-retention",
        "evaluate", "explain", "train-proxy", "calibrate",
        "rank",     "ab-sim",  "report"};
    for (const char* out : {"run_a", "run_b"}) {
        const std::string base =
            "--config " + cfg_path.string() + " --out " + (dir / out).string();
        for (const auto& stage : stages) {
            INFO("stage: " << stage << " run: " << out);
            REQUIRE(run_cli(stage + " " + base) == 0);
        }
    }
    for (const char* file : {"report/report.json", "report/report.txt",
                             "ab-sim/ab_report.json",
                             "evaluate/delta_retentive_relevance_overall.json",
                             "generate/interactions.jsonl"}) {
        INFO("file: " << file);
        const std::string a = slurp(dir / "run_a" / file);
        CHECK(!a.empty());
        CHECK(a == slurp(dir / "run_b" / file));
    }
}
