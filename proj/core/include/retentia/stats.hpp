#pragma once

// Statistical primitives shared by the validity analyses, the offline
// evaluation harness and the A/B machinery. All functions are pure.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace retentia::stats {

struct CorrelationResult {
    double r = 0.0;
    std::size_t n = 0;
    double ci_low = 0.0;   // 95% Fisher-z interval
    double ci_high = 0.0;
    double p_value = 1.0;
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double effect_size_d = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// --- special functions -----------------------------------------------------

double normal_cdf(double z);
double normal_quantile(double p);
// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Two-sided p-value for a Student-t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);
double student_t_quantile(double p, double df);

// --- correlations ----------------------------------------------------------

// Product-moment correlation with Fisher-z CI (se = 1/sqrt(n-3)) and a
// two-sided p from the z statistic. Throws on constant input or n < 4.
CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y);

// z = (atanh(r1) - atanh(r2)) / sqrt(1/(n1-3) + 1/(n2-3)), two-sided p.
// effect_size_d carries the difference of z-transforms.
TestResult fisher_z_compare(double r1, std::size_t n1, double r2, std::size_t n2);

// --- mutual information ----------------------------------------------------

// Plug-in MI estimate in nats over an equal-frequency joint histogram.
// Inputs with <= bins distinct values are binned by value instead.
double mutual_information(std::span<const double> x, std::span<const double> y,
                          int x_bins = 5, int y_bins = 5);

// --- bootstrap -------------------------------------------------------------

using Statistic = std::function<double(std::span<const double>)>;

// Percentile bootstrap interval; deterministic given seed. Per-iteration
// resampling streams are keyed by (seed, iteration) so the result is
// independent of evaluation order.
std::pair<double, double> bootstrap_ci(std::span<const double> samples,
                                       const Statistic& statistic,
                                       int iterations = 1000,
                                       double level = 0.95,
                                       std::uint64_t seed = 0);

// --- t-tests and effect sizes ----------------------------------------------

TestResult paired_t_test(std::span<const double> a, std::span<const double> b);
TestResult two_sample_t_test(std::span<const double> a, std::span<const double> b);
double cohens_d_paired(std::span<const double> a, std::span<const double> b);
double cohens_d_independent(std::span<const double> a, std::span<const double> b);

// --- classification metrics ------------------------------------------------

double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);
// Probability a random positive outscores a random negative, ties half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

double mean(std::span<const double> v);
double sample_sd(std::span<const double> v);
// Linear-interpolation quantile of a sorted vector, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace retentia::stats
