#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "retentia/gbt.hpp"
#include "retentia/rng.hpp"
#include "retentia/shap.hpp"

using namespace retentia;

namespace {

struct Fixture {
    gbt::GbtEnsemble model;
    std::vector<double> background;  // row-major
    std::size_t rows = 0;
    std::size_t p = 0;
};

Fixture trained_model(std::size_t p, std::size_t n, std::uint64_t seed,
                      int n_trees = 25) {
    Fixture f;
    f.p = p;
    auto s = rng::Stream::keyed(seed, 0, 0, 0);
    std::vector<double> x;
    std::vector<int> labels;
    std::vector<std::string> schema;
    for (std::size_t j = 0; j < p; ++j) schema.push_back("f" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double v = s.normal();
            x.push_back(v);
            // only the first two features carry signal
            if (j == 0) z += 1.5 * v;
            if (j == 1) z -= 1.0 * v;
        }
        labels.push_back(s.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0);
    }
    gbt::GbtParams params;
    params.n_trees = n_trees;
    params.max_depth = 3;
    f.model = gbt::train_gbt(x, n, schema, labels, params);
    f.rows = 40;
    f.background.assign(x.begin(), x.begin() + f.rows * p);
    return f;
}

// Brute-force Shapley values over all subsets, marginalizing absent
// features with the background.
std::vector<double> brute_force(const gbt::GbtEnsemble& model,
                                std::span<const double> x,
                                std::span<const double> background,
                                std::size_t rows) {
    const std::size_t p = x.size();
    auto value = [&](unsigned mask) {
        double total = 0.0;
        std::vector<double> row(p);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < p; ++j)
                row[j] = (mask >> j) & 1u ? x[j] : background[r * p + j];
            total += model.predict_proba(std::span<const double>(row));
        }
        return total / static_cast<double>(rows);
    };
    auto factorial = [](std::size_t k) {
        double f = 1.0;
        for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
        return f;
    };
    std::vector<double> phi(p, 0.0);
    const double pf = factorial(p);
    for (unsigned mask = 0; mask < (1u << p); ++mask) {
        const int sz = __builtin_popcount(mask);
        const double v = value(mask);
        for (std::size_t j = 0; j < p; ++j) {
            if ((mask >> j) & 1u) continue;
            const double w = factorial(sz) * factorial(p - sz - 1) / pf;
            phi[j] += w * (value(mask | (1u << j)) - v);
        }
    }
    return phi;
}

}  // namespace

TEST_CASE("exact attributions match a brute-force subset enumeration") {
    const Fixture f = trained_model(3, 800, 1);
    std::vector<double> x = {0.8, -1.2, 0.4};
    const auto report = shap::shap_values(f.model, x, f.background, f.rows,
                                          shap::ShapMode::exact);
    const auto oracle = brute_force(f.model, x, f.background, f.rows);
    REQUIRE(report.phi.size() == 3);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(report.phi[j] == doctest::Approx(oracle[j]).epsilon(1e-9));

    const Fixture g = trained_model(8, 1200, 2, 15);
    std::vector<double> x8 = {0.5, -0.3, 1.1, 0.0, -0.9, 0.2, 0.7, -1.5};
    const auto rep8 = shap::shap_values(g.model, x8, g.background, g.rows,
                                        shap::ShapMode::exact);
    const auto oracle8 = brute_force(g.model, x8, g.background, g.rows);
    for (std::size_t j = 0; j < 8; ++j)
        CHECK(rep8.phi[j] == doctest::Approx(oracle8[j]).epsilon(1e-9));
}

TEST_CASE("features the model never splits on get exactly zero attribution") {
    // train with a constant third column the tree builder cannot split on
    const std::size_t n = 1000;
    auto s = rng::Stream::keyed(3, 0, 0, 0);
    std::vector<double> x;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = s.normal();
        const double b = s.normal();
        x.insert(x.end(), {a, b, 1.0});
        labels.push_back(s.bernoulli(1.0 / (1.0 + std::exp(-(1.5 * a - b)))) ? 1 : 0);
    }
    gbt::GbtParams params;
    params.n_trees = 25;
    params.max_depth = 3;
    const auto model = gbt::train_gbt(x, n, {"f0", "f1", "constant"}, labels, params);
    REQUIRE_FALSE(model.uses_feature(2));

    std::vector<double> background(x.begin(), x.begin() + 40 * 3);
    const std::vector<double> point = {1.0, -0.5, 2.0};
    const auto report = shap::shap_values(model, point, background, 40,
                                          shap::ShapMode::exact);
    CHECK(report.phi[2] == 0.0);
}

TEST_CASE("symmetric features receive equal attribution") {
    // f(x) = sigma(base + t(x0) + t(x1)) with identical per-feature trees:
    // hand-built ensemble so the symmetry is structural.
    gbt::Tree t0;
    t0.nodes = {{0, 0.0, 1, 2, 0.0}, {-1, 0.0, -1, -1, -1.0}, {-1, 0.0, -1, -1, 1.0}};
    gbt::Tree t1;
    t1.nodes = {{1, 0.0, 1, 2, 0.0}, {-1, 0.0, -1, -1, -1.0}, {-1, 0.0, -1, -1, 1.0}};
    gbt::GbtParams params;
    params.n_trees = 2;
    params.learning_rate = 1.0;
    const gbt::GbtEnsemble model({t0, t1}, 0.0, params, {"a", "b"});

    // symmetric background and a symmetric point
    const std::vector<double> background = {1.0, 1.0, -1.0, -1.0};
    const std::vector<double> x = {1.0, 1.0};
    const auto report = shap::shap_values(model, x, background, 2,
                                          shap::ShapMode::exact);
    CHECK(report.phi[0] == doctest::Approx(report.phi[1]).epsilon(1e-12));
}

TEST_CASE("exact attributions satisfy the efficiency identity") {
    const Fixture f = trained_model(6, 1000, 4);
    std::vector<double> x = {0.1, 0.9, -0.4, 1.3, -1.1, 0.6};
    const auto report = shap::shap_values(f.model, x, f.background, f.rows,
                                          shap::ShapMode::exact);
    const double total = std::accumulate(report.phi.begin(), report.phi.end(), 0.0);
    CHECK(std::abs(report.explained - report.baseline - total) <= 1e-9);
    CHECK(report.explained ==
          doctest::Approx(f.model.predict_proba(std::span<const double>(x))));
}

TEST_CASE("sampled attributions are exactly efficient and near the exact values") {
    const Fixture f = trained_model(5, 1000, 5);
    std::vector<double> x = {0.7, -0.7, 0.2, -0.2, 1.0};
    const auto exact = shap::shap_values(f.model, x, f.background, f.rows,
                                         shap::ShapMode::exact);
    const auto sampled = shap::shap_values(f.model, x, f.background, f.rows,
                                           shap::ShapMode::sampled, 11, 4000);
    const double total = std::accumulate(sampled.phi.begin(), sampled.phi.end(), 0.0);
    CHECK(std::abs(sampled.explained - sampled.baseline - total) <= 1e-9);
    for (std::size_t j = 0; j < 5; ++j)
        CHECK(sampled.phi[j] == doctest::Approx(exact.phi[j]).epsilon(0.15).scale(0.02));

    // deterministic given the seed
    const auto again = shap::shap_values(f.model, x, f.background, f.rows,
                                         shap::ShapMode::sampled, 11, 4000);
    CHECK(again.phi == sampled.phi);
}

TEST_CASE("mode limits are enforced") {
    const Fixture f = trained_model(3, 400, 6);
    std::vector<double> x = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(shap::shap_values(f.model, x, f.background, f.rows,
                                      shap::ShapMode::sampled, 0, 100),
                    std::invalid_argument);

    // exact mode refuses more than 15 features
    const std::size_t p = 16;
    std::vector<std::string> schema;
    for (std::size_t j = 0; j < p; ++j) schema.push_back("f" + std::to_string(j));
    auto s = rng::Stream::keyed(7, 0, 0, 0);
    std::vector<double> big_x;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 200; ++i) {
        for (std::size_t j = 0; j < p; ++j) big_x.push_back(s.normal());
        labels.push_back(big_x[i * p] > 0.0 ? 1 : 0);
    }
    gbt::GbtParams params;
    params.n_trees = 3;
    const auto wide = gbt::train_gbt(big_x, 200, schema, labels, params);
    std::vector<double> point(p, 0.0);
    std::vector<double> background(big_x.begin(), big_x.begin() + 10 * p);
    CHECK_THROWS_AS(shap::shap_values(wide, point, background, 10,
                                      shap::ShapMode::exact),
                    std::invalid_argument);
    // sampled mode handles the same width
    CHECK_NOTHROW(shap::shap_values(wide, point, background, 10,
                                    shap::ShapMode::sampled, 1, 2000));
}
