#pragma once

// Interventional Shapley attributions in probability space. Absent
// features are marginalized by substituting background rows. Exact mode
// enumerates all feature subsets (<= 15 features); sampled mode uses
// permutation sampling and is exactly efficient by construction.

#include <cstdint>
#include <span>
#include <vector>

#include "retentia/gbt.hpp"

namespace retentia::shap {

enum class ShapMode { exact, sampled };

struct ShapReport {
    std::vector<double> phi;     // per-feature attribution
    double baseline = 0.0;       // expected prediction over the background
    double explained = 0.0;      // prediction at the explained point
};

// background is row-major with the model's feature count per row.
ShapReport shap_values(const gbt::GbtEnsemble& model, std::span<const double> x,
                       std::span<const double> background, std::size_t background_rows,
                       ShapMode mode, std::uint64_t seed = 0,
                       int n_permutations = 2000);

}  // namespace retentia::shap
