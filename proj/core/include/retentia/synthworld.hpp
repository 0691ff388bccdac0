#pragma once

// Deterministic synthetic world: users carry a latent return intent that
// drives both next-day return and the retention-oriented survey construct;
// the two comparison constructs share only a common factor with it, so any
// retention signal they show is spurious by construction. Nonresponse and
// low-quality items are planted with configurable strength.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "retentia/features.hpp"
#include "retentia/rng.hpp"
#include "retentia/types.hpp"

namespace retentia::synth {

struct WorldConfig {
    std::size_t n_users = 2000;
    std::size_t n_items = 400;
    int n_topics = 6;
    int horizon_days = 9;  // history + survey day + outcome day

    // next-day return: clamp(base + i*intent + e*exposure + t*tier, floor, cap)
    double intent_effect = 0.12;
    double exposure_effect = 0.06;
    double tier_effect = 0.20;
    double base_return_prob = 0.35;
    double return_floor = 0.05;
    double return_cap = 0.95;

    // empirical Likert correlation targets between construct ratings
    double rho_rr_wyt = 0.63;
    double rho_rr_im = 0.58;
    double rho_wyt_im = 0.60;
    double rating_affinity_weight = 0.20;  // surveyed-item affinity in the rating
    double rating_noise = 0.25;

    // survey response: sigma(intercept + coefs . covariates)
    double response_intercept = 0.5;
    std::vector<double> nonresponse_coefs;  // per covariate_names(); empty = zeros

    double low_quality_fraction = 0.08;
    double low_activity_fraction = 0.5;
    double high_daily_rate = 6.0;
    double low_daily_rate = 1.5;
    double behavior_intent_weight = 0.15;  // intent leakage into engagement

    std::uint64_t seed = 1;

    static const std::vector<std::string>& covariate_names();

    void validate() const;
    nlohmann::json to_json() const;
    static WorldConfig from_json(const nlohmann::json& j);
};

struct WorldUser {
    std::string id;
    double common = 0.0;        // shared construct factor
    double intent = 0.0;        // retention driver, unique to the RR construct
    double satisfaction = 0.0;  // unique WYT part
    double interest = 0.0;      // unique IM part
    int tier = 0;               // 1 = high-activity
    Demographics demographics;
    std::vector<double> topic_prefs;  // simplex over topics
};

struct WorldItem {
    std::string id;
    int topic = 0;
    bool low_quality = false;
    double popularity = 0.0;  // sampling weight, max-normalized
};

struct SimData {
    std::vector<InteractionRecord> interactions;
    std::vector<SurveyResponse> surveys;
    std::vector<RetentionLabel> labels;
};

struct EmittedPaths {
    std::string interactions;
    std::string surveys;
    std::string labels;
};

class SynthWorld {
public:
    static SynthWorld generate(const WorldConfig& config);

    const WorldConfig& config() const { return config_; }
    const std::vector<WorldUser>& users() const { return users_; }
    const std::vector<WorldItem>& items() const { return items_; }
    const std::unordered_map<std::string, int>& item_topic() const { return item_topic_; }
    std::unordered_map<std::string, Demographics> demographics() const;

    std::size_t user_index(const std::string& user_id) const;  // throws on unknown id

    // Standardized user-item affinity (topic match minus quality penalty).
    double affinity(std::size_t user, std::size_t item) const;

    // Exact generative next-day return probability.
    double retention_prob(double intent, int tier, double exposure_value) const;
    double true_retention_prob(const std::string& user_id, double exposure_value) const;

    double response_propensity(std::size_t user) const;
    std::vector<double> covariate_row(std::size_t user) const;

    // Likert rating for (user, surveyed item, construct); salt decorrelates
    // repeated draws for the same triple.
    int survey_rating(std::size_t user, std::size_t item, Construct construct,
                      std::uint64_t salt = 0) const;

    std::size_t sample_item(rng::Stream& stream) const;  // popularity-weighted

    double activity_prob(std::size_t user) const;
    double daily_rate(std::size_t user) const;

    struct Engagement {
        bool like = false, comment = false, share = false, skip = false;
        bool negative_feedback = false;
        double watch_time = 0.0;
    };
    Engagement draw_engagement(std::size_t user, std::size_t item,
                               rng::Stream& stream) const;

    // History over days [0, horizon-2], surveys on day horizon-2, labels from
    // day horizon-1 outcomes. horizon_days = -1 uses the configured horizon.
    SimData simulate(int horizon_days = -1) const;
    EmittedPaths emit_datasets(const std::string& directory, int horizon_days = -1) const;

    std::int64_t survey_day(int horizon_days = -1) const;

private:
    WorldConfig config_;
    std::vector<WorldUser> users_;
    std::vector<WorldItem> items_;
    std::unordered_map<std::string, std::size_t> user_index_;
    std::unordered_map<std::string, int> item_topic_;
    std::vector<double> popularity_cdf_;
    double loading_common_[3] = {0, 0, 0};  // per construct
    double loading_unique_[3] = {0, 0, 0};
    double affinity_mean_ = 0.0;
    double affinity_sd_ = 1.0;

    double raw_affinity(std::size_t user, std::size_t item) const;
    double construct_latent(const WorldUser& u, Construct c) const;
};

}  // namespace retentia::synth
