#include "retentia/proxy.hpp"

#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

using nlohmann::json;

namespace retentia::proxy {

using detail::sigmoid;
using detail::solve_spd;

double ProxyModel::predict(std::span<const double> x) const {
    if (x.size() != weights.size())
        throw std::invalid_argument("predict_intent: feature dimension mismatch (expected " +
                                    std::to_string(weights.size()) + ", got " +
                                    std::to_string(x.size()) + ")");
    double z = bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
    return std::clamp(sigmoid(z), 1e-12, 1.0 - 1e-12);
}

double ProxyModel::predict(const FeatureVector& x) const {
    if (x.names != feature_schema)
        throw std::invalid_argument("predict_intent: feature schema mismatch");
    return predict(std::span<const double>(x.values));
}

json ProxyModel::to_payload() const {
    return json{{"weights", weights},
                {"bias", bias},
                {"lambda", lambda},
                {"final_objective", final_objective},
                {"final_gradient_norm", final_gradient_norm},
                {"iterations", iterations}};
}

ProxyModel ProxyModel::from_payload(const json& payload,
                                    std::vector<std::string> feature_schema) {
    ProxyModel m;
    m.weights = payload.at("weights").get<std::vector<double>>();
    m.bias = payload.at("bias").get<double>();
    m.lambda = payload.at("lambda").get<double>();
    m.final_objective = payload.value("final_objective", 0.0);
    m.final_gradient_norm = payload.value("final_gradient_norm", 0.0);
    m.iterations = payload.value("iterations", 0);
    m.feature_schema = std::move(feature_schema);
    if (m.weights.size() != m.feature_schema.size())
        throw std::runtime_error("proxy payload dimensionality mismatch");
    return m;
}

double proxy_objective(std::span<const double> x, std::size_t n_rows,
                       std::span<const int> labels,
                       std::span<const double> weights, double bias, double lambda) {
    const std::size_t p = weights.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n_rows; ++i) {
        double z = bias;
        for (std::size_t j = 0; j < p; ++j) z += weights[j] * x[i * p + j];
        // -y z + log(1 + e^z), stable in both tails
        loss += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
        if (labels[i] == 1) loss -= z;
    }
    loss /= static_cast<double>(n_rows);
    for (double w : weights) loss += lambda * w * w;
    return loss;
}

std::vector<double> proxy_gradient(std::span<const double> x, std::size_t n_rows,
                                   std::span<const int> labels,
                                   std::span<const double> weights, double bias,
                                   double lambda) {
    const std::size_t p = weights.size();
    std::vector<double> grad(p + 1, 0.0);
    for (std::size_t i = 0; i < n_rows; ++i) {
        double z = bias;
        for (std::size_t j = 0; j < p; ++j) z += weights[j] * x[i * p + j];
        const double r = sigmoid(z) - static_cast<double>(labels[i]);
        for (std::size_t j = 0; j < p; ++j) grad[j] += r * x[i * p + j];
        grad[p] += r;
    }
    const double inv_n = 1.0 / static_cast<double>(n_rows);
    for (auto& g : grad) g *= inv_n;
    for (std::size_t j = 0; j < p; ++j) grad[j] += 2.0 * lambda * weights[j];
    return grad;
}

ProxyModel train_proxy(std::span<const double> x, std::size_t n_rows,
                       const std::vector<std::string>& feature_schema,
                       std::span<const int> labels, double lambda,
                       double tolerance, int max_iterations) {
    const std::size_t p = feature_schema.size();
    if (n_rows == 0 || x.size() != n_rows * p)
        throw std::invalid_argument("train_proxy: matrix size mismatch");
    if (labels.size() != n_rows) throw std::invalid_argument("train_proxy: label size mismatch");
    if (lambda < 0.0) throw std::invalid_argument("train_proxy: lambda must be >= 0");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0 || n_pos == n_rows)
        throw std::invalid_argument("train_proxy: both classes required");

    std::vector<double> w(p, 0.0);
    double b = 0.0;
    double obj = proxy_objective(x, n_rows, labels, w, b, lambda);

    int it = 0;
    double gnorm = 0.0;
    const std::size_t d = p + 1;
    for (; it < max_iterations; ++it) {
        const std::vector<double> grad = proxy_gradient(x, n_rows, labels, w, b, lambda);
        gnorm = 0.0;
        for (double g : grad) gnorm = std::max(gnorm, std::fabs(g));
        if (gnorm <= tolerance) break;

        // Hessian: (1/n) X^T W X + 2 lambda I (bias unpenalized)
        std::vector<double> hess(d * d, 0.0);
        for (std::size_t i = 0; i < n_rows; ++i) {
            double z = b;
            for (std::size_t j = 0; j < p; ++j) z += w[j] * x[i * p + j];
            const double pi = sigmoid(z);
            const double hw = std::max(pi * (1.0 - pi), 1e-12);
            for (std::size_t j = 0; j < p; ++j) {
                const double xj = x[i * p + j];
                for (std::size_t k = 0; k <= j; ++k) hess[j * d + k] += hw * xj * x[i * p + k];
                hess[p * d + j] += hw * xj;
            }
            hess[p * d + p] += hw;
        }
        const double inv_n = 1.0 / static_cast<double>(n_rows);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k <= j; ++k) {
                hess[j * d + k] *= inv_n;
                hess[k * d + j] = hess[j * d + k];
            }
        }
        for (std::size_t j = 0; j < p; ++j) hess[j * d + j] += 2.0 * lambda;

        std::vector<double> rhs(grad);
        std::vector<double> step = solve_spd(std::move(hess), std::move(rhs));

        double t = 1.0;
        std::vector<double> wt(p);
        double bt = b, trial_obj = obj;
        for (int half = 0; half < 40; ++half) {
            for (std::size_t j = 0; j < p; ++j) wt[j] = w[j] - t * step[j];
            bt = b - t * step[p];
            trial_obj = proxy_objective(x, n_rows, labels, wt, bt, lambda);
            if (trial_obj <= obj + 1e-14) break;
            t *= 0.5;
        }
        w = wt;
        b = bt;
        obj = trial_obj;
    }
    if (gnorm > tolerance)
        throw std::runtime_error("train_proxy did not converge: gradient norm " +
                                 std::to_string(gnorm) + " after " +
                                 std::to_string(it) + " iterations");

    ProxyModel m;
    m.weights = std::move(w);
    m.bias = b;
    m.lambda = lambda;
    m.feature_schema = feature_schema;
    m.final_objective = obj;
    m.final_gradient_norm = gnorm;
    m.iterations = it;
    return m;
}

ProxyModel train_proxy(const Dataset& ds, double lambda, double tolerance,
                       int max_iterations) {
    return train_proxy(std::span<const double>(ds.x), ds.n(), ds.feature_names,
                       std::span<const int>(ds.labels), lambda, tolerance, max_iterations);
}

json ThresholdPair::to_json() const {
    return json{{"tau_boost", tau_boost},
                {"tau_demote", tau_demote},
                {"achieved_pos_precision", achieved_pos_precision},
                {"achieved_neg_precision", achieved_neg_precision},
                {"n_calibration", n_calibration},
                {"n_boosted", n_boosted},
                {"n_demoted", n_demoted}};
}

ThresholdPair calibrate_thresholds(std::span<const double> scores,
                                   std::span<const int> labels,
                                   double pos_precision_target,
                                   double neg_precision_target) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("calibrate_thresholds: length mismatch");
    if (scores.empty()) throw std::invalid_argument("calibrate_thresholds: empty input");
    if (pos_precision_target <= 0.0 || pos_precision_target >= 1.0 ||
        neg_precision_target <= 0.0 || neg_precision_target >= 1.0)
        throw std::invalid_argument("calibrate_thresholds: targets must lie in (0,1)");
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0 || n_pos == labels.size())
        throw std::invalid_argument("calibrate_thresholds: both classes required");

    // sort by score; sweep candidate thresholds over observed values
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    ThresholdPair out;
    out.n_calibration = n;

    // tau_boost: smallest observed tau with precision of {score > tau} >= target
    bool found_boost = false;
    {
        double above_pos = 0, above_all = 0;
        for (std::size_t i = 0; i < n; ++i) {
            above_all += 1.0;
            above_pos += labels[order[i]] == 1 ? 1.0 : 0.0;
        }
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            const double tau = scores[order[i]];
            while (j < n && scores[order[j]] == tau) {
                above_all -= 1.0;
                above_pos += labels[order[j]] == 1 ? -1.0 : 0.0;
                ++j;
            }
            if (above_all > 0 && above_pos / above_all >= pos_precision_target) {
                out.tau_boost = tau;
                out.achieved_pos_precision = above_pos / above_all;
                out.n_boosted = static_cast<std::size_t>(above_all);
                found_boost = true;
                break;
            }
            i = j;
        }
    }
    if (!found_boost)
        throw std::runtime_error(
            "calibrate_thresholds: positive precision target unreachable (target " +
            std::to_string(pos_precision_target) + ")");

    // tau_demote: largest observed tau with negative precision of {score < tau} >= target
    bool found_demote = false;
    {
        // ascending pass records |{score < tau}| per candidate, then a
        // descending scan picks the largest tau meeting the target
        std::vector<double> below_all_at(n), below_neg_at(n);
        double all = 0, neg = 0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            const double tau = scores[order[i]];
            while (j < n && scores[order[j]] == tau) ++j;
            for (std::size_t t = i; t < j; ++t) {
                below_all_at[t] = all;
                below_neg_at[t] = neg;
            }
            for (std::size_t t = i; t < j; ++t) {
                all += 1.0;
                neg += labels[order[t]] == 0 ? 1.0 : 0.0;
            }
            i = j;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            if (below_all_at[ii] > 0 &&
                below_neg_at[ii] / below_all_at[ii] >= neg_precision_target) {
                out.tau_demote = scores[order[ii]];
                out.achieved_neg_precision = below_neg_at[ii] / below_all_at[ii];
                out.n_demoted = static_cast<std::size_t>(below_all_at[ii]);
                found_demote = true;
                break;
            }
        }
    }
    if (!found_demote)
        throw std::runtime_error(
            "calibrate_thresholds: negative precision target unreachable (target " +
            std::to_string(neg_precision_target) + ")");

    if (out.tau_demote >= out.tau_boost)
        throw std::runtime_error("calibrate_thresholds: crossed thresholds (tau_demote " +
                                 std::to_string(out.tau_demote) + " >= tau_boost " +
                                 std::to_string(out.tau_boost) + ")");
    return out;
}

}  // namespace retentia::proxy
