#include "retentia/bias.hpp"

#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

using nlohmann::json;

namespace retentia::bias {

using detail::sigmoid;
using detail::solve_spd;

double PropensityModel::propensity(std::span<const double> covariates) const {
    if (covariates.size() != coefficients.size())
        throw std::invalid_argument("propensity: covariate dimension mismatch");
    double z = intercept;
    for (std::size_t j = 0; j < covariates.size(); ++j) z += coefficients[j] * covariates[j];
    const double p = sigmoid(z);
    return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

PropensityModel fit_cbps(const std::vector<std::vector<double>>& covariates,
                         const std::vector<int>& responded,
                         std::vector<std::string> covariate_names,
                         double tolerance, int max_iterations) {
    const std::size_t n = covariates.size();
    if (n == 0 || n != responded.size())
        throw std::invalid_argument("fit_cbps: empty or mismatched inputs");
    const std::size_t p = covariates[0].size();
    if (n <= p) throw std::invalid_argument("fit_cbps: need n > p");

    std::size_t n_resp = 0;
    for (int z : responded) n_resp += (z == 1);
    if (n_resp == 0 || n_resp == n)
        throw std::invalid_argument("fit_cbps: both response classes required");

    // standardize covariates
    std::vector<double> mu(p, 0.0), sd(p, 0.0);
    for (const auto& row : covariates) {
        if (row.size() != p) throw std::invalid_argument("fit_cbps: ragged covariate matrix");
        for (std::size_t j = 0; j < p; ++j) mu[j] += row[j];
    }
    for (std::size_t j = 0; j < p; ++j) mu[j] /= static_cast<double>(n);
    for (const auto& row : covariates) {
        for (std::size_t j = 0; j < p; ++j) sd[j] += (row[j] - mu[j]) * (row[j] - mu[j]);
    }
    for (std::size_t j = 0; j < p; ++j) {
        sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
        if (sd[j] == 0.0) throw std::invalid_argument("fit_cbps: constant covariate");
    }
    std::vector<double> xs(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) xs[i * p + j] = (covariates[i][j] - mu[j]) / sd[j];
    }

    const std::size_t d = p + 1;  // [intercept, coefficients]
    std::vector<double> theta(d, 0.0);
    std::vector<double> pi(n);

    auto propensities = [&](const std::vector<double>& th) {
        for (std::size_t i = 0; i < n; ++i) {
            double z = th[0];
            for (std::size_t j = 0; j < p; ++j) z += th[j + 1] * xs[i * p + j];
            pi[i] = sigmoid(z);
        }
    };
    auto neg_log_lik = [&](const std::vector<double>& th) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = th[0];
            for (std::size_t j = 0; j < p; ++j) z += th[j + 1] * xs[i * p + j];
            // log(1 + e^z) - Z z, numerically stable
            ll += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
            if (responded[i] == 1) ll -= z;
        }
        return ll / static_cast<double>(n);
    };
    // residual of the original-scale moment condition (1/n) sum (Z - pi)[1, X]
    auto original_residual = [&]() {
        std::vector<double> m(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = static_cast<double>(responded[i]) - pi[i];
            m[0] += r;
            for (std::size_t j = 0; j < p; ++j) m[j + 1] += r * covariates[i][j];
        }
        double worst = 0.0;
        for (double v : m) worst = std::max(worst, std::fabs(v / static_cast<double>(n)));
        return worst;
    };

    propensities(theta);
    double obj = neg_log_lik(theta);
    double residual = original_residual();
    int it = 0;
    for (; it < max_iterations && residual > tolerance; ++it) {
        // gradient and hessian in standardized scale
        std::vector<double> grad(d, 0.0);
        std::vector<double> hess(d * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = pi[i] - static_cast<double>(responded[i]);
            const double w = std::max(pi[i] * (1.0 - pi[i]), 1e-12);
            grad[0] += r;
            hess[0] += w;
            for (std::size_t j = 0; j < p; ++j) {
                const double xj = xs[i * p + j];
                grad[j + 1] += r * xj;
                hess[(j + 1) * d] += w * xj;
                for (std::size_t k = 0; k <= j; ++k) {
                    hess[(j + 1) * d + (k + 1)] += w * xj * xs[i * p + k];
                }
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& g : grad) g *= inv_n;
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k <= j; ++k) {
                hess[j * d + k] *= inv_n;
                hess[k * d + j] = hess[j * d + k];
            }
        }
        std::vector<double> step = solve_spd(hess, grad);

        // damped step with halving line search
        double t = 1.0;
        std::vector<double> trial(d);
        double trial_obj = obj;
        for (int half = 0; half < 40; ++half) {
            for (std::size_t j = 0; j < d; ++j) trial[j] = theta[j] - t * step[j];
            trial_obj = neg_log_lik(trial);
            if (trial_obj <= obj + 1e-14) break;
            t *= 0.5;
        }
        theta = trial;
        obj = trial_obj;
        propensities(theta);
        residual = original_residual();
    }
    if (residual > tolerance)
        throw std::runtime_error("fit_cbps did not converge: moment residual " +
                                 std::to_string(residual) + " after " +
                                 std::to_string(it) + " iterations");

    PropensityModel model;
    model.coefficients.resize(p);
    model.intercept = theta[0];
    for (std::size_t j = 0; j < p; ++j) {
        model.coefficients[j] = theta[j + 1] / sd[j];
        model.intercept -= theta[j + 1] * mu[j] / sd[j];
    }
    if (covariate_names.empty()) {
        for (std::size_t j = 0; j < p; ++j) covariate_names.push_back("x" + std::to_string(j));
    }
    model.covariate_names = std::move(covariate_names);
    model.moment_residual = residual;
    model.iterations = it;
    return model;
}

double compute_smd(std::span<const double> values, std::span<const int> group,
                   std::span<const double> weights) {
    if (values.size() != group.size())
        throw std::invalid_argument("compute_smd: length mismatch");
    if (!weights.empty() && weights.size() != values.size())
        throw std::invalid_argument("compute_smd: weight length mismatch");

    double sw1 = 0, sw0 = 0, m1 = 0, m0 = 0;
    std::vector<double> g1, g0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (w < 0.0) throw std::invalid_argument("compute_smd: negative weight");
        if (group[i] == 1) {
            sw1 += w;
            m1 += w * values[i];
            g1.push_back(values[i]);
        } else {
            sw0 += w;
            m0 += w * values[i];
            g0.push_back(values[i]);
        }
    }
    if (sw1 <= 0.0 || sw0 <= 0.0 || g1.size() < 2 || g0.size() < 2)
        throw std::invalid_argument("compute_smd: both groups must be non-empty after weighting");
    m1 /= sw1;
    m0 /= sw0;

    // pooled sd over the unweighted groups
    auto var = [](const std::vector<double>& g) {
        double m = 0;
        for (double v : g) m += v;
        m /= static_cast<double>(g.size());
        double s = 0;
        for (double v : g) s += (v - m) * (v - m);
        return s / static_cast<double>(g.size() - 1);
    };
    const double pooled = std::sqrt((var(g1) + var(g0)) / 2.0);
    if (pooled == 0.0) throw std::invalid_argument("compute_smd: degenerate covariate");
    return (m1 - m0) / pooled;
}

std::vector<WeightedSample> trim_and_weight(std::span<const double> propensities,
                                            std::span<const int> responded,
                                            std::pair<double, double> bounds) {
    if (propensities.size() != responded.size())
        throw std::invalid_argument("trim_and_weight: length mismatch");
    const auto [low, high] = bounds;
    if (!(0.0 <= low && low < high && high <= 1.0))
        throw std::invalid_argument("trim_and_weight: need 0 <= low < high <= 1");

    std::vector<WeightedSample> out;
    out.reserve(propensities.size());
    for (std::size_t i = 0; i < propensities.size(); ++i) {
        const double pi = propensities[i];
        if (!(pi > 0.0 && pi < 1.0))
            throw std::invalid_argument("trim_and_weight: propensity outside (0,1)");
        WeightedSample s;
        s.row = i;
        s.responded = responded[i];
        s.propensity = pi;
        s.trimmed = pi < low || pi > high;
        s.weight = (!s.trimmed && s.responded == 1) ? 1.0 / pi : 0.0;
        out.push_back(s);
    }
    return out;
}

json balance_report(const std::vector<std::vector<double>>& covariates,
                    const std::vector<std::string>& covariate_names,
                    const std::vector<int>& responded,
                    const PropensityModel& model,
                    std::pair<double, double> trim_bounds,
                    double smd_threshold) {
    const std::size_t n = covariates.size();
    const std::size_t p = covariate_names.size();

    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) pi[i] = model.propensity(covariates[i]);

    std::size_t n_trimmed = 0;
    std::vector<double> diag_weights(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (pi[i] < trim_bounds.first || pi[i] > trim_bounds.second) {
            ++n_trimmed;
            continue;
        }
        diag_weights[i] = responded[i] == 1 ? 1.0 / pi[i] : 1.0 / (1.0 - pi[i]);
    }

    json rows = json::array();
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = covariates[i][j];
        const double unweighted = compute_smd(col, responded);
        const double weighted = compute_smd(col, responded, diag_weights);
        rows.push_back({{"covariate", covariate_names[j]},
                        {"smd_unweighted", unweighted},
                        {"smd_weighted", weighted},
                        {"passed", std::fabs(weighted) < smd_threshold}});
    }
    return json{{"covariates", rows},
                {"trimming", {{"n_trimmed", n_trimmed},
                              {"bounds", {trim_bounds.first, trim_bounds.second}}}},
                {"moment_residual", model.moment_residual}};
}

}  // namespace retentia::bias
