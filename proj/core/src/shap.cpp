#include "retentia/shap.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "retentia/rng.hpp"

namespace retentia::shap {

namespace {

// v(S): mean model output over background rows with features in S taken
// from x and the rest from the background row.
double coalition_value(const gbt::GbtEnsemble& model, std::span<const double> x,
                       std::span<const double> background, std::size_t rows,
                       std::uint32_t mask) {
    const std::size_t d = x.size();
    std::vector<double> hybrid(d);
    double sum = 0.0;
    for (std::size_t b = 0; b < rows; ++b) {
        for (std::size_t j = 0; j < d; ++j) {
            hybrid[j] = (mask >> j) & 1u ? x[j] : background[b * d + j];
        }
        sum += model.predict_proba(std::span<const double>(hybrid));
    }
    return sum / static_cast<double>(rows);
}

ShapReport exact_shap(const gbt::GbtEnsemble& model, std::span<const double> x,
                      std::span<const double> background, std::size_t rows) {
    const int d = static_cast<int>(x.size());
    const std::uint32_t n_subsets = 1u << d;

    std::vector<double> v(n_subsets);
    for (std::uint32_t mask = 0; mask < n_subsets; ++mask) {
        v[mask] = coalition_value(model, x, background, rows, mask);
    }

    std::vector<double> fact(d + 1, 1.0);
    for (int i = 1; i <= d; ++i) fact[i] = fact[i - 1] * i;

    ShapReport report;
    report.phi.assign(d, 0.0);
    for (int j = 0; j < d; ++j) {
        for (std::uint32_t mask = 0; mask < n_subsets; ++mask) {
            if ((mask >> j) & 1u) continue;
            const int s = std::popcount(mask);
            const double w = fact[s] * fact[d - 1 - s] / fact[d];
            report.phi[j] += w * (v[mask | (1u << j)] - v[mask]);
        }
    }
    report.baseline = v[0];
    report.explained = v[n_subsets - 1];
    return report;
}

ShapReport sampled_shap(const gbt::GbtEnsemble& model, std::span<const double> x,
                        std::span<const double> background, std::size_t rows,
                        std::uint64_t seed, int n_permutations) {
    const std::size_t d = x.size();
    ShapReport report;
    report.phi.assign(d, 0.0);
    report.baseline = coalition_value(model, x, background, rows, 0u);
    report.explained =
        coalition_value(model, x, background, rows, (1u << d) - 1u);

    std::vector<std::size_t> perm(d);
    for (int it = 0; it < n_permutations; ++it) {
        auto stream = rng::Stream::keyed(seed, 0x73686170ULL, static_cast<std::uint64_t>(it));
        std::iota(perm.begin(), perm.end(), 0u);
        for (std::size_t j = d; j > 1; --j) {
            std::swap(perm[j - 1], perm[stream.uniform_int(j)]);
        }
        std::uint32_t mask = 0;
        double prev = report.baseline;
        for (std::size_t j : perm) {
            mask |= 1u << j;
            const double cur = (mask == (1u << d) - 1u)
                                   ? report.explained
                                   : coalition_value(model, x, background, rows, mask);
            report.phi[j] += cur - prev;
            prev = cur;
        }
    }
    const double inv = 1.0 / static_cast<double>(n_permutations);
    for (double& v : report.phi) v *= inv;
    return report;
}

}  // namespace

ShapReport shap_values(const gbt::GbtEnsemble& model, std::span<const double> x,
                       std::span<const double> background, std::size_t background_rows,
                       ShapMode mode, std::uint64_t seed, int n_permutations) {
    const std::size_t d = model.feature_schema().size();
    if (x.size() != d) throw std::invalid_argument("shap_values: feature count mismatch");
    if (background_rows == 0 || background.size() != background_rows * d)
        throw std::invalid_argument("shap_values: background must be non-empty with matching width");
    if (mode == ShapMode::exact) {
        if (d > 15)
            throw std::invalid_argument(
                "shap_values: exact mode supports at most 15 features, use sampled mode");
        return exact_shap(model, x, background, background_rows);
    }
    if (n_permutations < 2000)
        throw std::invalid_argument("shap_values: sampled mode needs >= 2000 permutations");
    return sampled_shap(model, x, background, background_rows, seed, n_permutations);
}

}  // namespace retentia::shap
