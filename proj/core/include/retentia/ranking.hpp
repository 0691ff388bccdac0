#pragma once

// Final-stage score adjustment and the A/B harness: predicted retention
// intent boosts candidates above tau_boost by a flat alpha and demotes
// candidates below tau_demote proportionally to the gap; everything in the
// neutral zone is untouched.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "retentia/pipeline.hpp"
#include "retentia/proxy.hpp"
#include "retentia/stats.hpp"
#include "retentia/synthworld.hpp"
#include "retentia/types.hpp"

namespace retentia::ranking {

struct RankingPolicy {
    double alpha = 0.0;  // flat boost above tau_boost
    double beta = 0.0;   // demotion slope below tau_demote
    proxy::ThresholdPair thresholds;

    void validate() const;  // alpha >= 0, beta in [0,1), tau_demote < tau_boost

    nlohmann::json to_payload() const;
    static RankingPolicy from_payload(const nlohmann::json& payload);
};

// alpha if p_hat > tau_boost else 0 (strict).
double boost(double p_hat, const RankingPolicy& policy);
// -beta * (tau_demote - p_hat) if p_hat < tau_demote else 0 (strict).
double demote(double p_hat, const RankingPolicy& policy);

struct Candidate {
    std::string item_id;
    double score_base = 0.0;
    FeatureVector features;  // proxy-mode schema
};

struct ScoredCandidate {
    std::string item_id;
    double score_base = 0.0;
    double p_hat = 0.0;
    double boost = 0.0;
    double demote = 0.0;
    double score_final = 0.0;
};

// Scores every candidate, applies the adjustment, sorts descending by
// score_final with ties broken by descending score_base then item_id.
std::vector<ScoredCandidate> rank_slate(const std::vector<Candidate>& candidates,
                                        const proxy::ProxyModel& model,
                                        const RankingPolicy& policy);

struct MetricComparison {
    std::string metric;
    double control_mean = 0.0;
    double treatment_mean = 0.0;
    double delta = 0.0;           // treatment - control
    double relative_delta = 0.0;  // delta / |control_mean|, 0 when undefined
    stats::TestResult test;       // two-sample t
    double cohens_d = 0.0;
    double ci_low = 0.0;  // bootstrap CI of the mean difference
    double ci_high = 0.0;
    std::vector<double> control_daily;
    std::vector<double> treatment_daily;

    nlohmann::json to_json() const;
};

struct AbReport {
    std::size_t n_control = 0;
    std::size_t n_treatment = 0;
    int days = 0;
    std::vector<MetricComparison> metrics;

    const MetricComparison& metric(const std::string& name) const;
    nlohmann::json to_json() const;
};

struct AbOptions {
    int slate_size = 6;
    int candidate_pool = 25;
    int bootstrap_iterations = 400;
};

// Simulates `days` of serving: users are split into arms by a stable hash of
// (seed, user id); each active user-day draws a popularity-weighted candidate
// pool, ranks it under the arm's policy, and engagement / next-day activity
// follow the world's generative model with served affinity as the exposure
// value. Metrics are per-user aggregates over the horizon.
AbReport ab_simulate(const synth::SynthWorld& world,
                     const pipeline::ProxyFeaturizer& featurizer,
                     const proxy::ProxyModel& model,
                     const RankingPolicy& control_policy,
                     const RankingPolicy& treatment_policy,
                     int days, std::uint64_t seed, const AbOptions& options = {});

}  // namespace retentia::ranking
