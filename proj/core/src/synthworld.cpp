#include "retentia/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "linalg.hpp"
#include "retentia/io.hpp"

using nlohmann::json;

namespace retentia::synth {

namespace {

// stream keys for the independent random substreams
constexpr std::uint64_t kUserKey = 0x75736572;      // "user"
constexpr std::uint64_t kItemKey = 0x6974656d;      // "item"
constexpr std::uint64_t kActivityKey = 0x61637469;  // "acti"
constexpr std::uint64_t kSurveyKey = 0x73757276;    // "surv"
constexpr std::uint64_t kReturnKey = 0x72657475;    // "retu"
constexpr std::uint64_t kRatingKey = 0x72617465;    // "rate"
constexpr std::uint64_t kCalibKey = 0x63616c69;     // "cali"
constexpr std::uint64_t kAffKey = 0x61666669;       // "affi"

constexpr double kQualityPenalty = 0.8;

int construct_index(Construct c) { return static_cast<int>(c); }

// equal-mass 5-level cuts on a standard normal
const double kLikertCuts[4] = {-0.8416212336, -0.2533471031, 0.2533471031, 0.8416212336};

int quantize_likert(double z) {
    int level = 1;
    for (double cut : kLikertCuts) level += (z > cut) ? 1 : 0;
    return level;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

const std::vector<std::string>& WorldConfig::covariate_names() {
    static const std::vector<std::string> names = {"engagement_tier", "age_cohort",
                                                   "tenure_years", "region"};
    return names;
}

void WorldConfig::validate() const {
    if (n_users < 1 || n_items < 1 || n_topics < 1)
        throw std::invalid_argument("world config: counts must be >= 1");
    if (horizon_days < 2)
        throw std::invalid_argument("world config: horizon_days must be >= 2");
    for (double r : {rho_rr_wyt, rho_rr_im, rho_wyt_im}) {
        if (!(r > -1.0 && r < 1.0))
            throw std::invalid_argument("world config: correlation targets must lie in (-1,1)");
    }
    for (double f : {low_quality_fraction, low_activity_fraction}) {
        if (!(f >= 0.0 && f <= 1.0))
            throw std::invalid_argument("world config: fractions must lie in [0,1]");
    }
    if (!(return_floor > 0.0 && return_floor < return_cap && return_cap < 1.0))
        throw std::invalid_argument("world config: need 0 < floor < cap < 1");
    if (!nonresponse_coefs.empty() && nonresponse_coefs.size() != covariate_names().size())
        throw std::invalid_argument("world config: nonresponse_coefs must match covariates");
    if (rating_noise < 0.0 || rating_affinity_weight < 0.0)
        throw std::invalid_argument("world config: rating noise terms must be >= 0");
    if (high_daily_rate <= 0.0 || low_daily_rate <= 0.0)
        throw std::invalid_argument("world config: daily rates must be > 0");
}

json WorldConfig::to_json() const {
    return json{{"n_users", n_users},
                {"n_items", n_items},
                {"n_topics", n_topics},
                {"horizon_days", horizon_days},
                {"intent_effect", intent_effect},
                {"exposure_effect", exposure_effect},
                {"tier_effect", tier_effect},
                {"base_return_prob", base_return_prob},
                {"return_floor", return_floor},
                {"return_cap", return_cap},
                {"rho_rr_wyt", rho_rr_wyt},
                {"rho_rr_im", rho_rr_im},
                {"rho_wyt_im", rho_wyt_im},
                {"rating_affinity_weight", rating_affinity_weight},
                {"rating_noise", rating_noise},
                {"response_intercept", response_intercept},
                {"nonresponse_coefs", nonresponse_coefs},
                {"low_quality_fraction", low_quality_fraction},
                {"low_activity_fraction", low_activity_fraction},
                {"high_daily_rate", high_daily_rate},
                {"low_daily_rate", low_daily_rate},
                {"behavior_intent_weight", behavior_intent_weight},
                {"seed", seed}};
}

WorldConfig WorldConfig::from_json(const json& j) {
    WorldConfig c;
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
    };
    opt("n_users", c.n_users);
    opt("n_items", c.n_items);
    opt("n_topics", c.n_topics);
    opt("horizon_days", c.horizon_days);
    opt("intent_effect", c.intent_effect);
    opt("exposure_effect", c.exposure_effect);
    opt("tier_effect", c.tier_effect);
    opt("base_return_prob", c.base_return_prob);
    opt("return_floor", c.return_floor);
    opt("return_cap", c.return_cap);
    opt("rho_rr_wyt", c.rho_rr_wyt);
    opt("rho_rr_im", c.rho_rr_im);
    opt("rho_wyt_im", c.rho_wyt_im);
    opt("rating_affinity_weight", c.rating_affinity_weight);
    opt("rating_noise", c.rating_noise);
    opt("response_intercept", c.response_intercept);
    opt("nonresponse_coefs", c.nonresponse_coefs);
    opt("low_quality_fraction", c.low_quality_fraction);
    opt("low_activity_fraction", c.low_activity_fraction);
    opt("high_daily_rate", c.high_daily_rate);
    opt("low_daily_rate", c.low_daily_rate);
    opt("behavior_intent_weight", c.behavior_intent_weight);
    opt("seed", c.seed);
    c.validate();
    return c;
}

SynthWorld SynthWorld::generate(const WorldConfig& config) {
    config.validate();
    SynthWorld w;
    w.config_ = config;

    // --- items ------------------------------------------------------------
    w.items_.resize(config.n_items);
    double max_weight = 0.0;
    std::vector<double> weights(config.n_items);
    for (std::size_t v = 0; v < config.n_items; ++v) {
        rng::Stream s = rng::Stream::keyed(config.seed, kItemKey, v);
        WorldItem& item = w.items_[v];
        item.id = "i" + std::to_string(v);
        item.topic = static_cast<int>(s.uniform_int(static_cast<std::uint64_t>(config.n_topics)));
        item.low_quality = s.bernoulli(config.low_quality_fraction);
        weights[v] = std::exp(0.8 * s.normal());
        max_weight = std::max(max_weight, weights[v]);
        w.item_topic_[item.id] = item.topic;
    }
    w.popularity_cdf_.resize(config.n_items);
    double acc = 0.0;
    for (std::size_t v = 0; v < config.n_items; ++v) {
        w.items_[v].popularity = weights[v] / max_weight;
        acc += weights[v];
        w.popularity_cdf_[v] = acc;
    }
    for (double& c : w.popularity_cdf_) c /= acc;

    // --- users ------------------------------------------------------------
    w.users_.resize(config.n_users);
    for (std::size_t u = 0; u < config.n_users; ++u) {
        rng::Stream s = rng::Stream::keyed(config.seed, kUserKey, u);
        WorldUser& user = w.users_[u];
        user.id = "u" + std::to_string(u);
        user.common = s.normal();
        user.intent = s.normal();
        user.satisfaction = s.normal();
        user.interest = s.normal();
        user.tier = s.bernoulli(1.0 - config.low_activity_fraction) ? 1 : 0;
        user.demographics.age_cohort = static_cast<int>(s.uniform_int(4));
        user.demographics.tenure_days = 30.0 + s.uniform() * 1000.0;
        user.demographics.region = static_cast<int>(s.uniform_int(5));
        user.topic_prefs.resize(config.n_topics);
        double norm = 0.0;
        for (int t = 0; t < config.n_topics; ++t) {
            user.topic_prefs[t] = std::exp(1.2 * s.normal());
            norm += user.topic_prefs[t];
        }
        for (double& p : user.topic_prefs) p /= norm;
        w.user_index_[user.id] = u;
    }

    // --- affinity standardization ----------------------------------------
    {
        rng::Stream s = rng::Stream::keyed(config.seed, kAffKey);
        const std::size_t n_pairs = 20000;
        double m = 0, m2 = 0;
        for (std::size_t k = 0; k < n_pairs; ++k) {
            const std::size_t u = s.uniform_int(config.n_users);
            const std::size_t v = s.uniform_int(config.n_items);
            const double a = w.raw_affinity(u, v);
            m += a;
            m2 += a * a;
        }
        m /= static_cast<double>(n_pairs);
        m2 = m2 / static_cast<double>(n_pairs) - m * m;
        w.affinity_mean_ = m;
        w.affinity_sd_ = std::sqrt(std::max(m2, 1e-12));
    }

    // --- construct correlation calibration --------------------------------
    // Latent pairwise correlations are inflated until the quantized Likert
    // correlations (with the affinity and noise terms mixed in) hit the
    // configured targets. The single-factor decomposition fails when the
    // target triple is incompatible with one shared factor.
    {
        const double targets[3] = {config.rho_rr_wyt, config.rho_rr_im, config.rho_wyt_im};
        for (double t : targets) {
            if (t == 0.0)
                throw std::invalid_argument(
                    "infeasible correlation target triple: zero pairwise target");
        }
        if (targets[0] * targets[1] * targets[2] <= 0.0)
            throw std::invalid_argument(
                "infeasible correlation target triple: sign pattern has no "
                "single-factor representation");

        double lat[3] = {targets[0], targets[1], targets[2]};
        auto loadings_from = [&](const double l[3], double a[3]) {
            const double a0sq = l[0] * l[1] / l[2];
            const double a1sq = l[0] * l[2] / l[1];
            const double a2sq = l[1] * l[2] / l[0];
            if (!(a0sq > 0.0 && a0sq < 1.0 && a1sq > 0.0 && a1sq < 1.0 &&
                  a2sq > 0.0 && a2sq < 1.0))
                throw std::invalid_argument(
                    "infeasible correlation target triple: implied factor "
                    "loadings leave (0,1)");
            a[0] = std::sqrt(a0sq);
            a[1] = std::sqrt(a1sq);
            a[2] = std::sqrt(a2sq);
        };

        const double m = config.rating_affinity_weight;
        const double g = config.rating_noise;
        const double scale = std::sqrt(1.0 + m * m + g * g);
        const std::size_t n_mc = 60000;

        double a[3] = {0, 0, 0};
        for (int iter = 0; iter < 3; ++iter) {
            loadings_from(lat, a);
            rng::Stream s = rng::Stream::keyed(config.seed, kCalibKey, static_cast<std::uint64_t>(iter));
            std::vector<double> ratings[3];
            for (auto& r : ratings) r.reserve(n_mc);
            for (std::size_t k = 0; k < n_mc; ++k) {
                const double c = s.normal();
                for (int j = 0; j < 3; ++j) {
                    const double latent = a[j] * c + std::sqrt(1.0 - a[j] * a[j]) * s.normal();
                    // independent surveyed items per construct: resample an
                    // affinity from the standardized pool distribution
                    const std::size_t uu = s.uniform_int(config.n_users);
                    const std::size_t vv = s.uniform_int(config.n_items);
                    const double aff = w.affinity(uu, vv);
                    const double z = (latent + m * aff + g * s.normal()) / scale;
                    ratings[j].push_back(static_cast<double>(quantize_likert(z)));
                }
            }
            const double achieved[3] = {pearson(ratings[0], ratings[1]),
                                        pearson(ratings[0], ratings[2]),
                                        pearson(ratings[1], ratings[2])};
            for (int j = 0; j < 3; ++j) {
                if (std::fabs(achieved[j]) < 1e-6)
                    throw std::invalid_argument(
                        "infeasible correlation target triple: degenerate calibration");
                const double ratio = std::clamp(targets[j] / achieved[j], 0.5, 2.0);
                lat[j] = std::clamp(lat[j] * ratio, -0.999, 0.999);
            }
        }
        loadings_from(lat, a);
        for (int j = 0; j < 3; ++j) {
            w.loading_common_[j] = a[j];
            w.loading_unique_[j] = std::sqrt(1.0 - a[j] * a[j]);
        }
    }

    return w;
}

std::unordered_map<std::string, Demographics> SynthWorld::demographics() const {
    std::unordered_map<std::string, Demographics> out;
    for (const auto& u : users_) out[u.id] = u.demographics;
    return out;
}

std::size_t SynthWorld::user_index(const std::string& user_id) const {
    auto it = user_index_.find(user_id);
    if (it == user_index_.end())
        throw std::invalid_argument("unknown user: " + user_id);
    return it->second;
}

double SynthWorld::raw_affinity(std::size_t user, std::size_t item) const {
    const WorldUser& u = users_[user];
    const WorldItem& v = items_[item];
    double a = u.topic_prefs[v.topic] * static_cast<double>(config_.n_topics) - 1.0;
    if (v.low_quality) a -= kQualityPenalty;
    return a;
}

double SynthWorld::affinity(std::size_t user, std::size_t item) const {
    return (raw_affinity(user, item) - affinity_mean_) / affinity_sd_;
}

double SynthWorld::retention_prob(double intent, int tier, double exposure_value) const {
    const double p = config_.base_return_prob + config_.intent_effect * intent +
                     config_.exposure_effect * exposure_value +
                     config_.tier_effect * static_cast<double>(tier);
    return std::clamp(p, config_.return_floor, config_.return_cap);
}

double SynthWorld::true_retention_prob(const std::string& user_id,
                                       double exposure_value) const {
    const WorldUser& u = users_[user_index(user_id)];
    return retention_prob(u.intent, u.tier, exposure_value);
}

std::vector<double> SynthWorld::covariate_row(std::size_t user) const {
    const WorldUser& u = users_[user];
    return {static_cast<double>(u.tier), static_cast<double>(u.demographics.age_cohort),
            u.demographics.tenure_days / 365.0, static_cast<double>(u.demographics.region)};
}

double SynthWorld::response_propensity(std::size_t user) const {
    double z = config_.response_intercept;
    if (!config_.nonresponse_coefs.empty()) {
        const std::vector<double> cov = covariate_row(user);
        for (std::size_t j = 0; j < cov.size(); ++j) z += config_.nonresponse_coefs[j] * cov[j];
    }
    return detail::sigmoid(z);
}

double SynthWorld::construct_latent(const WorldUser& u, Construct c) const {
    const int j = construct_index(c);
    double unique = 0.0;
    switch (c) {
        case Construct::RetentiveRelevance: unique = u.intent; break;
        case Construct::WorthYourTime: unique = u.satisfaction; break;
        case Construct::InterestMatching: unique = u.interest; break;
    }
    return loading_common_[j] * u.common + loading_unique_[j] * unique;
}

int SynthWorld::survey_rating(std::size_t user, std::size_t item, Construct construct,
                              std::uint64_t salt) const {
    const double m = config_.rating_affinity_weight;
    const double g = config_.rating_noise;
    rng::Stream s(rng::mix(rng::mix(config_.seed, kRatingKey, user, item),
                           static_cast<std::uint64_t>(construct_index(construct)), salt));
    const double latent = construct_latent(users_[user], construct) +
                          m * affinity(user, item) + g * s.normal();
    return quantize_likert(latent / std::sqrt(1.0 + m * m + g * g));
}

std::size_t SynthWorld::sample_item(rng::Stream& stream) const {
    const double u = stream.uniform();
    const auto it = std::lower_bound(popularity_cdf_.begin(), popularity_cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - popularity_cdf_.begin()),
                                 items_.size() - 1);
}

double SynthWorld::activity_prob(std::size_t user) const {
    return users_[user].tier == 1 ? 0.85 : 0.45;
}

double SynthWorld::daily_rate(std::size_t user) const {
    return users_[user].tier == 1 ? config_.high_daily_rate : config_.low_daily_rate;
}

SynthWorld::Engagement SynthWorld::draw_engagement(std::size_t user, std::size_t item,
                                                   rng::Stream& stream) const {
    const WorldUser& u = users_[user];
    const WorldItem& v = items_[item];
    const double a = affinity(user, item);
    const double leak = config_.behavior_intent_weight * u.intent;

    Engagement e;
    e.skip = stream.bernoulli(
        detail::sigmoid(-0.8 - 1.5 * a - leak + (v.low_quality ? 0.7 : 0.0)));
    e.like = !e.skip && stream.bernoulli(detail::sigmoid(-1.8 + 1.2 * a + leak));
    e.comment = !e.skip && stream.bernoulli(detail::sigmoid(-3.2 + 0.8 * a + 0.5 * leak));
    e.share = !e.skip && stream.bernoulli(detail::sigmoid(-3.5 + 0.8 * a + 0.5 * leak));
    e.negative_feedback =
        stream.bernoulli(detail::sigmoid(-4.5 + (v.low_quality ? 2.5 : 0.0) - 0.8 * a));
    const double log_watch = e.skip ? std::log(5.0) + 0.5 * stream.normal()
                                    : std::log(25.0) + 0.4 * a + 0.3 * leak +
                                          0.6 * stream.normal();
    e.watch_time = std::exp(log_watch);
    return e;
}

std::int64_t SynthWorld::survey_day(int horizon_days) const {
    const int horizon = horizon_days < 0 ? config_.horizon_days : horizon_days;
    if (horizon < 2) throw std::invalid_argument("horizon_days must be >= 2");
    return static_cast<std::int64_t>(horizon - 2);
}

SimData SynthWorld::simulate(int horizon_days) const {
    const int horizon = horizon_days < 0 ? config_.horizon_days : horizon_days;
    const std::int64_t sday = survey_day(horizon);

    SimData out;
    std::vector<double> exposure(config_.n_users, 0.0);
    std::vector<std::int64_t> exposure_n(config_.n_users, 0);

    auto record_view = [&](std::size_t u, std::size_t v, std::int64_t day,
                           rng::Stream& s) {
        const Engagement e = draw_engagement(u, v, s);
        InteractionRecord r;
        r.user_id = users_[u].id;
        r.item_id = items_[v].id;
        r.day = day;
        r.like = e.like ? 1 : 0;
        r.comment = e.comment ? 1 : 0;
        r.share = e.share ? 1 : 0;
        r.skip = e.skip ? 1 : 0;
        r.watch_time_seconds = e.watch_time;
        out.interactions.push_back(std::move(r));
    };

    // history through the survey day
    for (std::size_t u = 0; u < config_.n_users; ++u) {
        for (std::int64_t day = 0; day <= sday; ++day) {
            rng::Stream s = rng::Stream::keyed(config_.seed, kActivityKey, u,
                                               static_cast<std::uint64_t>(day));
            if (!s.bernoulli(activity_prob(u))) continue;
            const int views = std::max(1, s.poisson(daily_rate(u)));
            for (int k = 0; k < views; ++k) {
                const std::size_t v = sample_item(s);
                exposure[u] += affinity(u, v);
                ++exposure_n[u];
                record_view(u, v, day, s);
            }
        }
    }

    // surveys on the survey day, one popularity-weighted item per construct,
    // response subject to the planted nonresponse mechanism
    for (std::size_t u = 0; u < config_.n_users; ++u) {
        for (Construct c : {Construct::RetentiveRelevance, Construct::WorthYourTime,
                            Construct::InterestMatching}) {
            rng::Stream s = rng::Stream::keyed(config_.seed, kSurveyKey, u,
                                               static_cast<std::uint64_t>(construct_index(c)));
            const std::size_t v = sample_item(s);
            if (!s.bernoulli(response_propensity(u))) continue;
            SurveyResponse resp;
            resp.user_id = users_[u].id;
            resp.item_id = items_[v].id;
            resp.construct = c;
            resp.rating = survey_rating(u, v, c);
            resp.day = sday;
            out.surveys.push_back(std::move(resp));
        }
    }

    // next-day outcome
    std::vector<std::int64_t> next_views(config_.n_users, 0);
    for (std::size_t u = 0; u < config_.n_users; ++u) {
        rng::Stream s = rng::Stream::keyed(config_.seed, kReturnKey, u);
        const double expo =
            exposure_n[u] > 0 ? exposure[u] / static_cast<double>(exposure_n[u]) : 0.0;
        const double p = retention_prob(users_[u].intent, users_[u].tier, expo);
        if (s.bernoulli(p)) {
            next_views[u] = 1 + s.poisson(0.8 * daily_rate(u));
        } else if (s.bernoulli(0.03)) {
            next_views[u] = 1;  // brief visit below the retention bar
        }
        for (std::int64_t k = 0; k < next_views[u]; ++k) {
            const std::size_t v = sample_item(s);
            record_view(u, v, sday + 1, s);
        }
    }

    std::vector<std::int64_t> active_views;
    for (std::int64_t v : next_views) {
        if (v > 0) active_views.push_back(v);
    }
    if (active_views.empty())
        throw std::runtime_error("simulate: no active users on the outcome day");
    for (std::size_t u = 0; u < config_.n_users; ++u) {
        RetentionLabel l;
        l.user_id = users_[u].id;
        l.day = sday;
        l.retained = retention_label(next_views[u], active_views);
        out.labels.push_back(std::move(l));
    }
    return out;
}

EmittedPaths SynthWorld::emit_datasets(const std::string& directory,
                                       int horizon_days) const {
    std::filesystem::create_directories(directory);
    const SimData data = simulate(horizon_days);
    EmittedPaths paths;
    paths.interactions = (std::filesystem::path(directory) / "interactions.jsonl").string();
    paths.surveys = (std::filesystem::path(directory) / "surveys.jsonl").string();
    paths.labels = (std::filesystem::path(directory) / "labels.jsonl").string();
    io::write_interactions_jsonl(paths.interactions, data.interactions);
    io::write_surveys_jsonl(paths.surveys, data.surveys);
    io::write_labels_jsonl(paths.labels, data.labels);
    return paths;
}

}  // namespace retentia::synth
