#pragma once

// Internal helpers for the small dense Newton solves used by the logistic
// fitters. Not installed.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace retentia::detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Cholesky solve of A x = b for symmetric positive definite A.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (d <= 0.0) throw std::runtime_error("non-positive-definite system");
        const double l = std::sqrt(d);
        a[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
        b[ii] = s / a[ii * n + ii];
    }
    return b;
}

}  // namespace retentia::detail
