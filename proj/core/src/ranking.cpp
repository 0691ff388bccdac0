#include "retentia/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "linalg.hpp"
#include "retentia/rng.hpp"

using nlohmann::json;

namespace retentia::ranking {

void RankingPolicy::validate() const {
    if (alpha < 0.0) throw std::invalid_argument("ranking policy: alpha must be >= 0");
    if (beta < 0.0 || beta >= 1.0)
        throw std::invalid_argument("ranking policy: beta must lie in [0,1)");
    const bool active = alpha > 0.0 || beta > 0.0;
    if (active && !(thresholds.tau_demote < thresholds.tau_boost))
        throw std::invalid_argument("ranking policy: tau_demote must be < tau_boost");
}

json RankingPolicy::to_payload() const {
    return json{{"alpha", alpha},
                {"beta", beta},
                {"tau_boost", thresholds.tau_boost},
                {"tau_demote", thresholds.tau_demote}};
}

RankingPolicy RankingPolicy::from_payload(const json& payload) {
    RankingPolicy p;
    p.alpha = payload.at("alpha").get<double>();
    p.beta = payload.at("beta").get<double>();
    p.thresholds.tau_boost = payload.at("tau_boost").get<double>();
    p.thresholds.tau_demote = payload.at("tau_demote").get<double>();
    p.validate();
    return p;
}

double boost(double p_hat, const RankingPolicy& policy) {
    return p_hat > policy.thresholds.tau_boost ? policy.alpha : 0.0;
}

double demote(double p_hat, const RankingPolicy& policy) {
    return p_hat < policy.thresholds.tau_demote
               ? -policy.beta * (policy.thresholds.tau_demote - p_hat)
               : 0.0;
}

namespace {

ScoredCandidate score_candidate(std::string item_id, double score_base, double p_hat,
                                const RankingPolicy& policy) {
    ScoredCandidate sc;
    sc.item_id = std::move(item_id);
    sc.score_base = score_base;
    sc.p_hat = p_hat;
    sc.boost = boost(p_hat, policy);
    sc.demote = demote(p_hat, policy);
    sc.score_final = sc.score_base + sc.boost + sc.demote;
    return sc;
}

void sort_slate(std::vector<ScoredCandidate>& slate) {
    std::sort(slate.begin(), slate.end(),
              [](const ScoredCandidate& a, const ScoredCandidate& b) {
                  if (a.score_final != b.score_final) return a.score_final > b.score_final;
                  if (a.score_base != b.score_base) return a.score_base > b.score_base;
                  return a.item_id < b.item_id;
              });
}

}  // namespace

std::vector<ScoredCandidate> rank_slate(const std::vector<Candidate>& candidates,
                                        const proxy::ProxyModel& model,
                                        const RankingPolicy& policy) {
    if (candidates.empty()) throw std::invalid_argument("rank_slate: empty candidate list");
    policy.validate();
    std::vector<ScoredCandidate> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        out.push_back(score_candidate(c.item_id, c.score_base,
                                      model.predict(c.features), policy));
    }
    sort_slate(out);
    return out;
}

json MetricComparison::to_json() const {
    return json{{"metric", metric},
                {"control_mean", control_mean},
                {"treatment_mean", treatment_mean},
                {"delta", delta},
                {"relative_delta", relative_delta},
                {"t_statistic", test.statistic},
                {"p_value", test.p_value},
                {"cohens_d", cohens_d},
                {"ci_low", ci_low},
                {"ci_high", ci_high},
                {"control_daily", control_daily},
                {"treatment_daily", treatment_daily}};
}

const MetricComparison& AbReport::metric(const std::string& name) const {
    for (const auto& m : metrics) {
        if (m.metric == name) return m;
    }
    throw std::invalid_argument("unknown A/B metric: " + name);
}

json AbReport::to_json() const {
    json ms = json::array();
    for (const auto& m : metrics) ms.push_back(m.to_json());
    return json{{"kind", "ab_report"},
                {"n_control", n_control},
                {"n_treatment", n_treatment},
                {"days", days},
                {"metrics", ms}};
}

namespace {

constexpr std::uint64_t kArmKey = 0x61726d73;        // "arms"
constexpr std::uint64_t kDayKey = 0x61626461;        // "abda"
constexpr std::uint64_t kCandidateKey = 0x61626364;  // "abcd"
constexpr std::uint64_t kBootKey = 0x6162626f;       // "abbo"

std::uint64_t fnv1a(std::uint64_t seed, const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL ^ rng::mix(seed, kArmKey);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct UserTotals {
    double active_days = 0;
    double served = 0;
    double likes = 0, skips = 0, negatives = 0, low_quality = 0;
};

struct DayTotals {
    double users = 0, active = 0, served = 0;
    double likes = 0, skips = 0, negatives = 0, low_quality = 0;
};

// Percentile bootstrap of the difference of arm means, (seed, iteration)
// keyed so the interval is order-independent.
std::pair<double, double> difference_ci(const std::vector<double>& treatment,
                                        const std::vector<double>& control,
                                        int iterations, std::uint64_t seed,
                                        std::uint64_t metric_key) {
    std::vector<double> deltas(iterations);
    for (int it = 0; it < iterations; ++it) {
        rng::Stream s = rng::Stream::keyed(seed, kBootKey, metric_key,
                                           static_cast<std::uint64_t>(it));
        double mt = 0, mc = 0;
        for (std::size_t k = 0; k < treatment.size(); ++k)
            mt += treatment[s.uniform_int(treatment.size())];
        for (std::size_t k = 0; k < control.size(); ++k)
            mc += control[s.uniform_int(control.size())];
        deltas[it] = mt / static_cast<double>(treatment.size()) -
                     mc / static_cast<double>(control.size());
    }
    std::sort(deltas.begin(), deltas.end());
    return {stats::quantile_sorted(deltas, 0.025), stats::quantile_sorted(deltas, 0.975)};
}

}  // namespace

AbReport ab_simulate(const synth::SynthWorld& world,
                     const pipeline::ProxyFeaturizer& featurizer,
                     const proxy::ProxyModel& model,
                     const RankingPolicy& control_policy,
                     const RankingPolicy& treatment_policy,
                     int days, std::uint64_t seed, const AbOptions& options) {
    if (days < 1) throw std::invalid_argument("ab_simulate: days must be >= 1");
    if (options.slate_size < 1 || options.candidate_pool < options.slate_size)
        throw std::invalid_argument("ab_simulate: bad slate/pool sizes");
    control_policy.validate();
    treatment_policy.validate();

    const auto& users = world.users();
    const auto& items = world.items();
    const std::size_t n_users = users.size();

    std::vector<int> arm(n_users);  // 1 = treatment
    std::size_t n_treatment = 0;
    for (std::size_t u = 0; u < n_users; ++u) {
        arm[u] = static_cast<int>(fnv1a(seed, users[u].id) & 1ULL);
        n_treatment += arm[u];
    }
    const std::size_t n_control = n_users - n_treatment;
    if (n_control < 2 || n_treatment < 2)
        throw std::invalid_argument("ab_simulate: degenerate arm sizes");

    // predicted intent cache: the proxy features are static over the horizon
    std::unordered_map<std::uint64_t, double> p_hat_cache;
    auto predicted_intent = [&](std::size_t u, std::size_t v) {
        const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | v;
        auto it = p_hat_cache.find(key);
        if (it != p_hat_cache.end()) return it->second;
        const double p = model.predict(featurizer.features(users[u].id, items[v].id));
        p_hat_cache.emplace(key, p);
        return p;
    };

    std::vector<UserTotals> totals(n_users);
    std::vector<DayTotals> daily[2];
    daily[0].resize(days);
    daily[1].resize(days);
    std::vector<double> prev_exposure(n_users, 0.0);

    std::vector<ScoredCandidate> slate;
    std::vector<std::size_t> pool;
    for (int day = 0; day < days; ++day) {
        for (std::size_t u = 0; u < n_users; ++u) {
            DayTotals& dt = daily[arm[u]][day];
            dt.users += 1.0;
            rng::Stream s = rng::Stream::keyed(seed, kDayKey, u,
                                               static_cast<std::uint64_t>(day));
            const double p_active =
                day == 0 ? world.activity_prob(u)
                         : world.retention_prob(users[u].intent, users[u].tier,
                                                prev_exposure[u]);
            const bool active = s.bernoulli(p_active);
            prev_exposure[u] = 0.0;
            if (!active) continue;
            totals[u].active_days += 1.0;
            dt.active += 1.0;

            // popularity-weighted candidate pool, first occurrence kept
            rng::Stream cs = rng::Stream::keyed(seed, kCandidateKey, u,
                                                static_cast<std::uint64_t>(day));
            pool.clear();
            while (pool.size() < static_cast<std::size_t>(options.candidate_pool)) {
                const std::size_t v = world.sample_item(cs);
                if (std::find(pool.begin(), pool.end(), v) == pool.end()) pool.push_back(v);
                if (pool.size() >= items.size()) break;
            }

            const RankingPolicy& policy = arm[u] == 1 ? treatment_policy : control_policy;
            slate.clear();
            for (std::size_t v : pool) {
                const double score_base = retentia::detail::sigmoid(
                    1.5 * (items[v].popularity - 0.5) + 0.6 * cs.normal());
                slate.push_back(score_candidate(items[v].id, score_base,
                                                predicted_intent(u, v), policy));
            }
            sort_slate(slate);

            const std::size_t served =
                std::min<std::size_t>(options.slate_size, slate.size());
            double exposure_sum = 0.0;
            for (std::size_t k = 0; k < served; ++k) {
                std::size_t v = 0;
                for (std::size_t cand : pool) {
                    if (items[cand].id == slate[k].item_id) {
                        v = cand;
                        break;
                    }
                }
                const auto e = world.draw_engagement(u, v, s);
                totals[u].served += 1.0;
                dt.served += 1.0;
                if (e.like) {
                    totals[u].likes += 1.0;
                    dt.likes += 1.0;
                }
                if (e.skip) {
                    totals[u].skips += 1.0;
                    dt.skips += 1.0;
                }
                if (e.negative_feedback) {
                    totals[u].negatives += 1.0;
                    dt.negatives += 1.0;
                }
                if (items[v].low_quality) {
                    totals[u].low_quality += 1.0;
                    dt.low_quality += 1.0;
                }
                exposure_sum += world.affinity(u, v);
            }
            prev_exposure[u] = served > 0 ? exposure_sum / static_cast<double>(served) : 0.0;
        }
    }

    // per-user metric values by arm
    const char* metric_names[5] = {"sessions_per_user", "like_rate", "skip_rate",
                                   "negative_feedback_rate", "low_quality_exposure_rate"};
    std::vector<double> values[5][2];
    for (std::size_t u = 0; u < n_users; ++u) {
        const UserTotals& t = totals[u];
        const double served = std::max(t.served, 1.0);
        const double row[5] = {t.active_days, t.likes / served, t.skips / served,
                               t.negatives / served, t.low_quality / served};
        for (int m = 0; m < 5; ++m) values[m][arm[u]].push_back(row[m]);
    }

    AbReport report;
    report.n_control = n_control;
    report.n_treatment = n_treatment;
    report.days = days;
    for (int m = 0; m < 5; ++m) {
        MetricComparison mc;
        mc.metric = metric_names[m];
        const std::vector<double>& control = values[m][0];
        const std::vector<double>& treatment = values[m][1];
        mc.control_mean = stats::mean(control);
        mc.treatment_mean = stats::mean(treatment);
        mc.delta = mc.treatment_mean - mc.control_mean;
        mc.relative_delta =
            mc.control_mean != 0.0 ? mc.delta / std::fabs(mc.control_mean) : 0.0;
        mc.test = stats::two_sample_t_test(treatment, control);
        mc.cohens_d = stats::cohens_d_independent(treatment, control);
        std::tie(mc.ci_low, mc.ci_high) =
            difference_ci(treatment, control, options.bootstrap_iterations, seed,
                          static_cast<std::uint64_t>(m));

        for (int day = 0; day < days; ++day) {
            for (int a = 0; a < 2; ++a) {
                const DayTotals& dt = daily[a][day];
                const double served = std::max(dt.served, 1.0);
                double v = 0.0;
                switch (m) {
                    case 0: v = dt.users > 0 ? dt.active / dt.users : 0.0; break;
                    case 1: v = dt.likes / served; break;
                    case 2: v = dt.skips / served; break;
                    case 3: v = dt.negatives / served; break;
                    case 4: v = dt.low_quality / served; break;
                }
                (a == 0 ? mc.control_daily : mc.treatment_daily).push_back(v);
            }
        }
        report.metrics.push_back(std::move(mc));
    }
    return report;
}

}  // namespace retentia::ranking
