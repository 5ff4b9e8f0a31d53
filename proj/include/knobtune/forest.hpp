#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "knobtune/rng.hpp"

namespace knobtune {

/// Defaults are calibrated for the d >> n regime this pipeline runs in
/// (200 rows, 350 features): whole-sample trees decorrelated by feature
/// subsampling keep the importance mass on real effects, where bootstrap
/// resampling dilutes the few rows that identify each crash boundary.
struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    std::size_t min_leaf = 2;
    double feature_subsample = 0.8;
    bool bootstrap = false;
    std::uint64_t seed = 0;
};

/// CART regression forest over row-major samples. Splits maximize variance
/// reduction on a random feature subset per node; importances accumulate the
/// sample-weighted impurity decrease of every split.
class Forest {
public:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    struct Tree {
        std::vector<Node> nodes;
    };

    static Forest fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                      const ForestParams& params) {
        if (x.size() != y.size()) throw std::invalid_argument("forest: |X| != |y|");
        if (x.size() < 2) throw std::invalid_argument("forest: need at least 2 rows");
        Forest f;
        f.params_ = params;
        f.dims_ = x[0].size();
        f.impurity_decrease_.assign(f.dims_, 0.0);

        const std::size_t n = x.size();
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            Rng rng(mix_seed(params.seed, 0xF0E57, t));
            std::vector<std::size_t> rows(n);
            if (params.bootstrap) {
                for (auto& r : rows) r = rng.uniform_index(n);
            } else {
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            }
            Tree tree;
            f.grow(tree, x, y, std::move(rows), 0, rng);
            f.trees_.push_back(std::move(tree));
        }
        return f;
    }

    double predict(const std::vector<double>& row) const {
        double sum = 0.0;
        for (const auto& tree : trees_) {
            int idx = 0;
            while (tree.nodes[idx].feature >= 0) {
                const auto& node = tree.nodes[idx];
                idx = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                    : node.right;
            }
            sum += tree.nodes[idx].value;
        }
        return sum / static_cast<double>(trees_.size());
    }

    std::size_t n_trees() const { return trees_.size(); }
    std::size_t dims() const { return dims_; }
    const std::vector<Tree>& trees() const { return trees_; }
    const std::vector<double>& raw_impurity_decrease() const { return impurity_decrease_; }

private:
    struct Split {
        double gain = 0.0;
        std::size_t feature = 0;
        double threshold = 0.0;
    };

    int grow(Tree& tree, const std::vector<std::vector<double>>& x, const std::vector<double>& y,
             std::vector<std::size_t> rows, std::size_t depth, Rng& rng) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t r : rows) {
            sum += y[r];
            sum_sq += y[r] * y[r];
        }
        const double n = static_cast<double>(rows.size());
        const double node_sse = sum_sq - sum * sum / n;

        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(Node{});
        tree.nodes[node_idx].value = sum / n;

        if (depth >= params_.max_depth || rows.size() < 2 * params_.min_leaf || node_sse <= 0.0)
            return node_idx;

        const auto split = best_split(x, y, rows, node_sse, rng);
        if (!split || split->gain <= 0.0) return node_idx;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            if (x[r][split->feature] <= split->threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        impurity_decrease_[split->feature] += split->gain;
        tree.nodes[node_idx].feature = static_cast<int>(split->feature);
        tree.nodes[node_idx].threshold = split->threshold;
        const int left = grow(tree, x, y, std::move(left_rows), depth + 1, rng);
        tree.nodes[node_idx].left = left;
        const int right = grow(tree, x, y, std::move(right_rows), depth + 1, rng);
        tree.nodes[node_idx].right = right;
        return node_idx;
    }

    std::optional<Split> best_split(const std::vector<std::vector<double>>& x,
                                    const std::vector<double>& y,
                                    const std::vector<std::size_t>& rows, double node_sse,
                                    Rng& rng) const {
        std::vector<std::size_t> all_features(dims_);
        std::iota(all_features.begin(), all_features.end(), std::size_t{0});
        const std::size_t k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(params_.feature_subsample *
                                                    static_cast<double>(dims_))));
        std::vector<std::size_t> features = rng.subset(all_features, std::min(k, dims_));
        std::sort(features.begin(), features.end()); // deterministic tie-breaking by index

        std::optional<Split> best;
        std::vector<std::pair<double, double>> vals(rows.size()); // (x, y)
        for (std::size_t f : features) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                vals[i] = {x[rows[i]][f], y[rows[i]]};
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;

            double left_sum = 0.0, left_sq = 0.0;
            double total_sum = 0.0, total_sq = 0.0;
            for (const auto& [_, yy] : vals) {
                total_sum += yy;
                total_sq += yy * yy;
            }
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left_sum += vals[i].second;
                left_sq += vals[i].second * vals[i].second;
                if (vals[i].first == vals[i + 1].first) continue;
                const std::size_t nl = i + 1, nr = vals.size() - nl;
                if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
                const double right_sum = total_sum - left_sum;
                const double right_sq = total_sq - left_sq;
                const double sse_l = left_sq - left_sum * left_sum / static_cast<double>(nl);
                const double sse_r = right_sq - right_sum * right_sum / static_cast<double>(nr);
                const double gain = node_sse - sse_l - sse_r;
                if (!best || gain > best->gain) {
                    best = Split{gain, f, 0.5 * (vals[i].first + vals[i + 1].first)};
                }
            }
        }
        return best;
    }

    ForestParams params_;
    std::size_t dims_ = 0;
    std::vector<Tree> trees_;
    std::vector<double> impurity_decrease_;
};

/// Importances normalized to sum 1, plus the descending order. A forest with
/// no splits anywhere (constant targets) reports uniform importances.
struct ImportanceRanking {
    std::vector<double> importances;
    std::vector<std::size_t> order;
};

inline ImportanceRanking importance(const Forest& forest) {
    ImportanceRanking r;
    r.importances = forest.raw_impurity_decrease();
    double total = 0.0;
    for (double v : r.importances) total += v;
    if (total <= 0.0) {
        r.importances.assign(forest.dims(), 1.0 / static_cast<double>(forest.dims()));
    } else {
        for (double& v : r.importances) v /= total;
    }
    r.order.resize(forest.dims());
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
        if (r.importances[a] != r.importances[b]) return r.importances[a] > r.importances[b];
        return a < b; // ties break by parameter index
    });
    return r;
}

/// Shortest prefix of the ranking whose importance sum reaches `coverage`.
inline std::vector<std::size_t> select_by_coverage(const ImportanceRanking& ranking,
                                                   double coverage) {
    if (!(coverage > 0.0 && coverage <= 1.0))
        throw std::invalid_argument("select_by_coverage: coverage must be in (0, 1]");
    if (coverage == 1.0) return ranking.order; // full passthrough in importance order
    std::vector<std::size_t> selected;
    double cum = 0.0;
    for (std::size_t idx : ranking.order) {
        selected.push_back(idx);
        cum += ranking.importances[idx];
        if (cum >= coverage - 1e-12) break;
    }
    return selected;
}

} // namespace knobtune
