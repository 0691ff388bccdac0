#include "retentia/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

using nlohmann::json;

namespace retentia::gbt {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logloss_gradient(double label, double p) { return label - p; }

double logloss_hessian(double p) { return std::max(p * (1.0 - p), 1e-12); }

double GbtEnsemble::predict_margin(std::span<const double> row) const {
    if (row.size() != feature_schema_.size())
        throw std::invalid_argument("predict: feature dimension mismatch (expected " +
                                    std::to_string(feature_schema_.size()) + ", got " +
                                    std::to_string(row.size()) + ")");
    double margin = base_score_;
    for (const Tree& t : trees_) margin += params_.learning_rate * t.predict(row);
    return std::clamp(margin, -kLogOddsClamp, kLogOddsClamp);
}

double GbtEnsemble::predict_proba(std::span<const double> row) const {
    return sigmoid(predict_margin(row));
}

double GbtEnsemble::predict_proba(const FeatureVector& x) const {
    if (x.names != feature_schema_)
        throw std::invalid_argument("predict: feature schema mismatch");
    return predict_proba(std::span<const double>(x.values));
}

bool GbtEnsemble::uses_feature(int feature) const {
    for (const Tree& t : trees_) {
        for (const TreeNode& nd : t.nodes) {
            if (!nd.is_leaf() && nd.feature == feature) return true;
        }
    }
    return false;
}

json GbtEnsemble::to_payload() const {
    json trees = json::array();
    for (const Tree& t : trees_) {
        json nodes = json::array();
        for (const TreeNode& nd : t.nodes) {
            if (nd.is_leaf()) {
                nodes.push_back({{"leaf_value", nd.leaf_value}});
            } else {
                nodes.push_back({{"feature", nd.feature},
                                 {"threshold", nd.threshold},
                                 {"left", nd.left},
                                 {"right", nd.right}});
            }
        }
        trees.push_back(std::move(nodes));
    }
    return json{{"base_score", base_score_},
                {"params",
                 {{"n_trees", params_.n_trees},
                  {"learning_rate", params_.learning_rate},
                  {"max_depth", params_.max_depth},
                  {"min_samples_leaf", params_.min_samples_leaf},
                  {"l2_leaf", params_.l2_leaf},
                  {"seed", params_.seed}}},
                {"trees", trees}};
}

GbtEnsemble GbtEnsemble::from_payload(const json& payload,
                                      std::vector<std::string> feature_schema) {
    GbtParams params;
    const json& p = payload.at("params");
    params.n_trees = p.at("n_trees").get<int>();
    params.learning_rate = p.at("learning_rate").get<double>();
    params.max_depth = p.at("max_depth").get<int>();
    params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    params.l2_leaf = p.at("l2_leaf").get<double>();
    params.seed = p.at("seed").get<std::uint64_t>();

    std::vector<Tree> trees;
    for (const json& tj : payload.at("trees")) {
        Tree t;
        for (const json& nj : tj) {
            TreeNode nd;
            if (nj.contains("leaf_value")) {
                nd.leaf_value = nj.at("leaf_value").get<double>();
            } else {
                nd.feature = nj.at("feature").get<int>();
                nd.threshold = nj.at("threshold").get<double>();
                nd.left = nj.at("left").get<int>();
                nd.right = nj.at("right").get<int>();
            }
            t.nodes.push_back(nd);
        }
        trees.push_back(std::move(t));
    }
    return GbtEnsemble(std::move(trees), payload.at("base_score").get<double>(), params,
                       std::move(feature_schema));
}

namespace {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct ScanState {
    double gl = 0.0, hl = 0.0;
    std::size_t cnt = 0;
    double last = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace

GbtEnsemble train_gbt(std::span<const double> x, std::size_t n_rows,
                      const std::vector<std::string>& feature_schema,
                      std::span<const int> labels, const GbtParams& params) {
    const std::size_t p = feature_schema.size();
    if (n_rows == 0 || p == 0) throw std::invalid_argument("train_gbt: empty data");
    if (x.size() != n_rows * p) throw std::invalid_argument("train_gbt: matrix size mismatch");
    if (labels.size() != n_rows) throw std::invalid_argument("train_gbt: label size mismatch");
    if (params.n_trees < 0 || params.max_depth < 1 || params.learning_rate <= 0.0 ||
        params.learning_rate > 1.0 || params.min_samples_leaf < 1 || params.l2_leaf < 0.0)
        throw std::invalid_argument("train_gbt: invalid params");

    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    if (n_pos == 0 || n_pos == n_rows)
        throw std::invalid_argument("train_gbt: both classes required");
    if (params.n_trees > 0 && n_rows < 2 * static_cast<std::size_t>(params.min_samples_leaf))
        throw std::invalid_argument("train_gbt: need rows >= 2 * min_samples_leaf");

    // column-major copy and one global argsort per feature
    std::vector<std::vector<double>> col(p, std::vector<double>(n_rows));
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t f = 0; f < p; ++f) col[f][i] = x[i * p + f];
    }
    std::vector<std::vector<std::uint32_t>> sorted_idx(p);
    for (std::size_t f = 0; f < p; ++f) {
        auto& idx = sorted_idx[f];
        idx.resize(n_rows);
        std::iota(idx.begin(), idx.end(), 0u);
        std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
            return col[f][a] < col[f][b];
        });
    }

    const double prevalence = static_cast<double>(n_pos) / static_cast<double>(n_rows);
    const double base_score =
        std::clamp(std::log(prevalence / (1.0 - prevalence)), -kLogOddsClamp, kLogOddsClamp);

    std::vector<double> margin(n_rows, base_score);
    std::vector<double> grad(n_rows), hess(n_rows), prob(n_rows);

    auto train_logloss = [&]() {
        double loss = 0.0;
        for (std::size_t i = 0; i < n_rows; ++i) {
            const double pp = std::clamp(prob[i], 1e-12, 1.0 - 1e-12);
            loss -= labels[i] == 1 ? std::log(pp) : std::log(1.0 - pp);
        }
        return loss / static_cast<double>(n_rows);
    };
    auto refresh = [&]() {
        for (std::size_t i = 0; i < n_rows; ++i) {
            prob[i] = sigmoid(std::clamp(margin[i], -kLogOddsClamp, kLogOddsClamp));
            grad[i] = logloss_gradient(static_cast<double>(labels[i]), prob[i]);
            hess[i] = logloss_hessian(prob[i]);
        }
    };

    refresh();
    double prev_loss = train_logloss();

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_trees));
    std::vector<std::int32_t> node_of_row(n_rows, 0);
    const double lambda = params.l2_leaf;
    const std::size_t min_leaf = static_cast<std::size_t>(params.min_samples_leaf);

    for (int round = 0; round < params.n_trees; ++round) {
        Tree tree;
        tree.nodes.emplace_back();
        std::fill(node_of_row.begin(), node_of_row.end(), 0);

        std::vector<double> node_g{0.0}, node_h{0.0};
        std::vector<std::size_t> node_cnt{n_rows};
        std::vector<bool> node_open{true};
        for (std::size_t i = 0; i < n_rows; ++i) {
            node_g[0] += grad[i];
            node_h[0] += hess[i];
        }

        std::vector<std::int32_t> frontier{0};
        for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
            const std::size_t n_nodes = tree.nodes.size();
            std::vector<SplitCandidate> best(n_nodes);
            std::vector<ScanState> st(n_nodes);
            std::vector<char> active(n_nodes, 0);
            for (std::int32_t nd : frontier) {
                if (node_cnt[nd] >= 2 * min_leaf) active[nd] = 1;
            }

            for (std::size_t f = 0; f < p; ++f) {
                for (std::int32_t nd : frontier) st[nd] = ScanState{};
                const auto& idx = sorted_idx[f];
                const auto& cf = col[f];
                for (std::size_t k = 0; k < n_rows; ++k) {
                    const std::uint32_t r = idx[k];
                    const std::int32_t nd = node_of_row[r];
                    if (!active[nd]) continue;
                    ScanState& s = st[nd];
                    const double v = cf[r];
                    if (s.cnt >= min_leaf && node_cnt[nd] - s.cnt >= min_leaf &&
                        !std::isnan(s.last) && v > s.last) {
                        const double gr = node_g[nd] - s.gl;
                        const double hr = node_h[nd] - s.hl;
                        const double gain = s.gl * s.gl / (s.hl + lambda) +
                                            gr * gr / (hr + lambda) -
                                            node_g[nd] * node_g[nd] / (node_h[nd] + lambda);
                        // strict improvement keeps the lowest feature index and
                        // lowest threshold on ties
                        if (gain > best[nd].gain + 1e-12 ||
                            (best[nd].feature < 0 && gain > 1e-12)) {
                            best[nd].gain = gain;
                            best[nd].feature = static_cast<int>(f);
                            best[nd].threshold = 0.5 * (s.last + v);
                        }
                    }
                    s.gl += grad[r];
                    s.hl += hess[r];
                    s.cnt += 1;
                    s.last = v;
                }
            }

            std::vector<std::int32_t> next_frontier;
            for (std::int32_t nd : frontier) {
                if (!active[nd] || best[nd].feature < 0) {
                    node_open[nd] = false;
                    tree.nodes[nd].feature = -1;
                    tree.nodes[nd].leaf_value = node_g[nd] / (node_h[nd] + lambda);
                    continue;
                }
                const std::int32_t left = static_cast<std::int32_t>(tree.nodes.size());
                tree.nodes.emplace_back();
                const std::int32_t right = static_cast<std::int32_t>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes[nd].feature = best[nd].feature;
                tree.nodes[nd].threshold = best[nd].threshold;
                tree.nodes[nd].left = left;
                tree.nodes[nd].right = right;
                node_g.resize(tree.nodes.size(), 0.0);
                node_h.resize(tree.nodes.size(), 0.0);
                node_cnt.resize(tree.nodes.size(), 0);
                node_open.resize(tree.nodes.size(), true);
                next_frontier.push_back(left);
                next_frontier.push_back(right);
            }
            // route rows of split nodes to their children
            for (std::size_t i = 0; i < n_rows; ++i) {
                const std::int32_t nd = node_of_row[i];
                const TreeNode& tn = tree.nodes[nd];
                if (tn.is_leaf() || tn.left < 0) continue;
                const std::int32_t child =
                    col[tn.feature][i] <= tn.threshold ? tn.left : tn.right;
                node_of_row[i] = child;
                node_g[child] += grad[i];
                node_h[child] += hess[i];
                node_cnt[child] += 1;
            }
            frontier = std::move(next_frontier);
        }
        // remaining open nodes at max depth become leaves
        for (std::int32_t nd : frontier) {
            tree.nodes[nd].feature = -1;
            tree.nodes[nd].leaf_value = node_g[nd] / (node_h[nd] + lambda);
        }

        for (std::size_t i = 0; i < n_rows; ++i) {
            margin[i] += params.learning_rate * tree.nodes[node_of_row[i]].leaf_value;
        }
        trees.push_back(std::move(tree));
        refresh();
        const double loss = train_logloss();
        if (loss > prev_loss + 1e-9)
            throw std::logic_error("train_gbt: training log-loss increased at round " +
                                   std::to_string(round) + " (" + std::to_string(prev_loss) +
                                   " -> " + std::to_string(loss) + ")");
        prev_loss = loss;
    }

    return GbtEnsemble(std::move(trees), base_score, params, feature_schema);
}

GbtEnsemble train_gbt(const Dataset& ds, const GbtParams& params) {
    return train_gbt(std::span<const double>(ds.x), ds.n(), ds.feature_names,
                     std::span<const int>(ds.labels), params);
}

}  // namespace retentia::gbt
