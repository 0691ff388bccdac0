#pragma once

// Nonresponse-bias correction: covariate-balancing propensity scores
// (just-identified form, logistic score condition), inverse-propensity
// weighting, trimming and balance diagnostics.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace retentia::bias {

// Logistic-form response-propensity model in the original covariate scale.
struct PropensityModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    std::vector<std::string> covariate_names;
    // max |(1/n) sum (Z_i - pi(X_i)) [1, X_i]| at convergence
    double moment_residual = 0.0;
    int iterations = 0;

    // Propensity strictly inside (0, 1).
    double propensity(std::span<const double> covariates) const;
};

struct WeightedSample {
    std::size_t row = 0;
    int responded = 0;
    double propensity = 0.5;
    double weight = 0.0;  // 0 iff trimmed or nonresponder
    bool trimmed = false;
};

// Fits by damped Newton iteration until the sample moment condition
// (1/n) sum (Z_i - pi(X_i)) [1, X_i] = 0 holds to `tolerance` in max
// absolute component. Covariates are standardized internally; returned
// coefficients are in the original scale.
PropensityModel fit_cbps(const std::vector<std::vector<double>>& covariates,
                         const std::vector<int>& responded,
                         std::vector<std::string> covariate_names = {},
                         double tolerance = 1e-8, int max_iterations = 100);

// Weighted standardized mean difference: (mean1 - mean0) / pooled sd,
// pooled sd = sqrt((s1^2 + s0^2) / 2) over the unweighted groups.
double compute_smd(std::span<const double> values, std::span<const int> group,
                   std::span<const double> weights = {});

// Responders get weight 1/propensity unless trimmed; nonresponders carry
// weight 0 but keep their propensity for diagnostics.
std::vector<WeightedSample> trim_and_weight(std::span<const double> propensities,
                                            std::span<const int> responded,
                                            std::pair<double, double> bounds = {0.1, 0.9});

// Balance report: per-covariate unweighted vs weighted SMD (responders vs
// nonresponders; the weighted comparison uses the standard IPW diagnostic
// weights Z/pi and (1-Z)/(1-pi) restricted to untrimmed samples), plus a
// trimming summary.
nlohmann::json balance_report(const std::vector<std::vector<double>>& covariates,
                              const std::vector<std::string>& covariate_names,
                              const std::vector<int>& responded,
                              const PropensityModel& model,
                              std::pair<double, double> trim_bounds = {0.1, 0.9},
                              double smd_threshold = 0.1);

}  // namespace retentia::bias
