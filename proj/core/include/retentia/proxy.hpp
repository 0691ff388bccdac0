#pragma once

// Production-style proxy: L2-regularized logistic regression over the
// {P,E,C,I,N} feature groups predicting binary retention intent, plus
// precision-targeted boost/demote threshold calibration.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "retentia/types.hpp"

namespace retentia::proxy {

struct ProxyModel {
    std::vector<double> weights;
    double bias = 0.0;
    double lambda = 1e-3;
    std::vector<std::string> feature_schema;
    double final_objective = 0.0;
    double final_gradient_norm = 0.0;
    int iterations = 0;

    // sigma(w . x + b), strictly inside (0, 1)
    double predict(std::span<const double> x) const;
    double predict(const FeatureVector& x) const;

    nlohmann::json to_payload() const;
    static ProxyModel from_payload(const nlohmann::json& payload,
                                   std::vector<std::string> feature_schema);
};

// Minimizes mean log-loss + lambda * ||w||^2 (bias unpenalized) by damped
// Newton iteration until the gradient inf-norm falls below tolerance.
ProxyModel train_proxy(std::span<const double> x, std::size_t n_rows,
                       const std::vector<std::string>& feature_schema,
                       std::span<const int> labels, double lambda = 1e-3,
                       double tolerance = 1e-8, int max_iterations = 500);

ProxyModel train_proxy(const Dataset& ds, double lambda = 1e-3,
                       double tolerance = 1e-8, int max_iterations = 500);

// Objective and gradient at (weights, bias); exposed for gradient checks.
double proxy_objective(std::span<const double> x, std::size_t n_rows,
                       std::span<const int> labels,
                       std::span<const double> weights, double bias, double lambda);
std::vector<double> proxy_gradient(std::span<const double> x, std::size_t n_rows,
                                   std::span<const int> labels,
                                   std::span<const double> weights, double bias,
                                   double lambda);  // [dw..., db]

struct ThresholdPair {
    double tau_boost = 0.0;
    double tau_demote = 0.0;  // always < tau_boost
    double achieved_pos_precision = 0.0;
    double achieved_neg_precision = 0.0;
    std::size_t n_calibration = 0;
    std::size_t n_boosted = 0;
    std::size_t n_demoted = 0;

    nlohmann::json to_json() const;
};

// tau_boost: smallest observed score value whose strictly-above selection
// reaches the positive precision target; tau_demote: largest observed value
// whose strictly-below selection reaches the negative precision target.
// Throws when a target is unreachable or the thresholds cross.
ThresholdPair calibrate_thresholds(std::span<const double> scores,
                                   std::span<const int> labels,
                                   double pos_precision_target = 0.80,
                                   double neg_precision_target = 0.60);

}  // namespace retentia::proxy
