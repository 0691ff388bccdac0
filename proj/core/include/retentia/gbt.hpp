#pragma once

// Gradient-boosted regression trees optimized for log-loss. Split finding
// is exact greedy over sorted feature values; leaf values are Newton steps
// sum(g) / (sum(h) + l2). Training is deterministic.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "retentia/types.hpp"

namespace retentia::gbt {

struct GbtParams {
    int n_trees = 200;          // 0 allowed as a base-score-only probe
    double learning_rate = 0.1;  // in (0, 1]
    int max_depth = 4;
    int min_samples_leaf = 20;
    double l2_leaf = 1.0;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> row) const {
        int idx = 0;
        while (!nodes[idx].is_leaf()) {
            idx = row[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left
                                                                  : nodes[idx].right;
        }
        return nodes[idx].leaf_value;
    }
};

// margin clamp before the sigmoid keeps predictions strictly inside (0,1)
inline constexpr double kLogOddsClamp = 15.0;

double sigmoid(double z);

// Analytic log-loss gradient/hessian in margin space: g = y - p, h = p(1-p).
double logloss_gradient(double label, double p);
double logloss_hessian(double p);

class GbtEnsemble {
public:
    GbtEnsemble() = default;
    GbtEnsemble(std::vector<Tree> trees, double base_score, GbtParams params,
                std::vector<std::string> feature_schema)
        : trees_(std::move(trees)),
          base_score_(base_score),
          params_(params),
          feature_schema_(std::move(feature_schema)) {}

    // sigma(clamp(base + lr * sum f_k(x)))
    double predict_proba(std::span<const double> row) const;
    // Validates names against the ensemble schema.
    double predict_proba(const FeatureVector& x) const;
    double predict_margin(std::span<const double> row) const;

    const std::vector<Tree>& trees() const { return trees_; }
    double base_score() const { return base_score_; }
    const GbtParams& params() const { return params_; }
    const std::vector<std::string>& feature_schema() const { return feature_schema_; }

    // Whether any tree splits on the given feature index.
    bool uses_feature(int feature) const;

    nlohmann::json to_payload() const;
    static GbtEnsemble from_payload(const nlohmann::json& payload,
                                    std::vector<std::string> feature_schema);

private:
    std::vector<Tree> trees_;
    double base_score_ = 0.0;
    GbtParams params_;
    std::vector<std::string> feature_schema_;
};

// Trains on a row-major matrix. Per-round training log-loss is asserted
// non-increasing. Throws on single-class labels.
GbtEnsemble train_gbt(std::span<const double> x, std::size_t n_rows,
                      const std::vector<std::string>& feature_schema,
                      std::span<const int> labels, const GbtParams& params);

GbtEnsemble train_gbt(const Dataset& ds, const GbtParams& params);

}  // namespace retentia::gbt
