#include "gusl/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "gusl/errors.hpp"
#include "gusl/parallel.hpp"
#include "gusl/rng.hpp"

namespace gusl {

void validate_gbdt_config(const GbdtConfig& cfg) {
    if (cfg.rounds < 1) throw ValidationError("GbdtConfig: rounds must be >= 1");
    if (cfg.max_depth < 1) throw ValidationError("GbdtConfig: max_depth must be >= 1");
    if (!(cfg.learning_rate > 0.0) || cfg.learning_rate > 1.0)
        throw ValidationError("GbdtConfig: learning rate must be in (0, 1]");
    if (cfg.min_samples_leaf < 1)
        throw ValidationError("GbdtConfig: min_samples_leaf must be >= 1");
    if (cfg.bins < 2 || cfg.bins > 256)
        throw ValidationError("GbdtConfig: bins must be in [2, 256]");
    if (!(cfg.feature_subsample > 0.0) || cfg.feature_subsample > 1.0)
        throw ValidationError("GbdtConfig: feature subsample must be in (0, 1]");
}

std::vector<int> GbdtModel::tree_features(size_t t) const {
    std::vector<int> out;
    for (const auto& node : trees[t].nodes)
        if (node.feature >= 0) out.push_back(node.feature);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

size_t GbdtModel::node_count() const {
    size_t n = 0;
    for (const auto& t : trees) n += t.nodes.size();
    return n;
}

namespace {

constexpr size_t kExactGreedyLimit = 10000;
constexpr double kMinGain = 1e-12;

struct SplitResult {
    bool found = false;
    int feature = -1;
    float threshold = 0.0f;
    double gain = 0.0;
    int bin = -1;  // hist mode: first bin of the right side
};

struct NodeTask {
    int node = 0;
    size_t begin = 0, end = 0;  // range in the shared index buffer
    int depth = 0;
    double sum = 0.0;
};

// Bin edges: edge[k] = lo + k*(hi-lo)/bins for k = 1..bins-1, float32 so that
// training-time codes and prediction-time comparisons agree bit-exactly.
// code(x) = number of edges <= x; x < edge[k] iff code(x) < k.
std::vector<float> make_edges(float lo, float hi, int bins) {
    std::vector<float> edges(bins - 1);
    double w = (static_cast<double>(hi) - lo) / bins;
    for (int k = 1; k < bins; ++k)
        edges[k - 1] = static_cast<float>(lo + w * k);
    return edges;
}

uint8_t code_of(const std::vector<float>& edges, float x) {
    return static_cast<uint8_t>(
        std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

class HistBuilder {
public:
    HistBuilder(const float* X, size_t rows, int dims, const GbdtConfig& cfg)
        : rows_(rows), dims_(dims), bins_(cfg.bins) {
        edges_.resize(dims);
        codes_.resize(static_cast<size_t>(dims) * rows);
        for (int f = 0; f < dims; ++f) {
            float lo = X[f], hi = X[f];
            for (size_t r = 1; r < rows; ++r) {
                float v = X[r * dims + f];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            constant_.push_back(!(hi > lo));
            edges_[f] = make_edges(lo, hi, bins_);
            uint8_t* col = codes_.data() + static_cast<size_t>(f) * rows;
            for (size_t r = 0; r < rows; ++r) col[r] = code_of(edges_[f], X[r * dims + f]);
        }
    }

    SplitResult best_split(const std::vector<size_t>& idx, size_t begin, size_t end,
                           const std::vector<double>& resid,
                           const std::vector<int>& features, int min_leaf,
                           double node_sum, int jobs) const {
        size_t n = end - begin;
        std::vector<SplitResult> per_feature(features.size());
        parallel_for(features.size(), jobs, [&](size_t fi) {
            int f = features[fi];
            if (constant_[f]) return;
            const uint8_t* col = codes_.data() + static_cast<size_t>(f) * rows_;
            double sum[256] = {0};
            int cnt[256] = {0};
            for (size_t r = begin; r < end; ++r) {
                uint8_t c = col[idx[r]];
                sum[c] += resid[idx[r]];
                ++cnt[c];
            }
            // Split before bin k: left = codes < k.
            double left_sum = 0.0;
            long left_cnt = 0;
            SplitResult best;
            double parent_sq = node_sum * node_sum / static_cast<double>(n);
            for (int k = 1; k < bins_; ++k) {
                left_sum += sum[k - 1];
                left_cnt += cnt[k - 1];
                long right_cnt = static_cast<long>(n) - left_cnt;
                if (left_cnt < min_leaf || right_cnt < min_leaf) continue;
                double right_sum = node_sum - left_sum;
                double gain = left_sum * left_sum / left_cnt +
                              right_sum * right_sum / right_cnt - parent_sq;
                if (gain > best.gain + kMinGain || !best.found) {
                    if (gain <= kMinGain) continue;
                    best.found = true;
                    best.feature = f;
                    best.threshold = edges_[f][k - 1];
                    best.gain = gain;
                    best.bin = k;
                }
            }
            per_feature[fi] = best;
        });
        SplitResult best;
        for (const auto& s : per_feature) {
            if (!s.found) continue;
            if (!best.found || s.gain > best.gain + kMinGain) best = s;
        }
        return best;
    }

    bool goes_left(size_t row, const SplitResult& s) const {
        return codes_[static_cast<size_t>(s.feature) * rows_ + row] < s.bin;
    }

private:
    size_t rows_;
    int dims_;
    int bins_;
    std::vector<std::vector<float>> edges_;
    std::vector<uint8_t> codes_;
    std::vector<bool> constant_;
};

class ExactBuilder {
public:
    ExactBuilder(const float* X, size_t rows, int dims) : X_(X), rows_(rows), dims_(dims) {}

    SplitResult best_split(const std::vector<size_t>& idx, size_t begin, size_t end,
                           const std::vector<double>& resid,
                           const std::vector<int>& features, int min_leaf,
                           double node_sum, int jobs) const {
        size_t n = end - begin;
        std::vector<SplitResult> per_feature(features.size());
        std::vector<std::vector<std::pair<float, size_t>>> scratch(features.size());
        parallel_for(features.size(), jobs, [&](size_t fi) {
            int f = features[fi];
            auto& ord = scratch[fi];
            ord.resize(n);
            for (size_t r = 0; r < n; ++r) {
                size_t row = idx[begin + r];
                ord[r] = {X_[row * dims_ + f], row};
            }
            std::sort(ord.begin(), ord.end());
            double parent_sq = node_sum * node_sum / static_cast<double>(n);
            double left_sum = 0.0;
            SplitResult best;
            for (size_t r = 0; r + 1 < n; ++r) {
                left_sum += resid[ord[r].second];
                if (ord[r].first == ord[r + 1].first) continue;
                long left_cnt = static_cast<long>(r) + 1;
                long right_cnt = static_cast<long>(n) - left_cnt;
                if (left_cnt < min_leaf || right_cnt < min_leaf) continue;
                double right_sum = node_sum - left_sum;
                double gain = left_sum * left_sum / left_cnt +
                              right_sum * right_sum / right_cnt - parent_sq;
                if (gain > best.gain + kMinGain || !best.found) {
                    if (gain <= kMinGain) continue;
                    best.found = true;
                    best.feature = f;
                    // Midpoint between adjacent distinct values, float32.
                    best.threshold =
                        static_cast<float>(0.5 * (static_cast<double>(ord[r].first) +
                                                  static_cast<double>(ord[r + 1].first)));
                    best.gain = gain;
                }
            }
            per_feature[fi] = best;
        });
        SplitResult best;
        for (const auto& s : per_feature) {
            if (!s.found) continue;
            if (!best.found || s.gain > best.gain + kMinGain) best = s;
        }
        return best;
    }

    bool goes_left(size_t row, const SplitResult& s) const {
        return X_[row * dims_ + s.feature] < s.threshold;
    }

private:
    const float* X_;
    size_t rows_;
    int dims_;
};

template <typename Builder>
GbdtTree build_tree(const Builder& builder, size_t rows,
                    const std::vector<double>& resid, const std::vector<int>& features,
                    const GbdtConfig& cfg, std::vector<int>& leaf_of_sample) {
    GbdtTree tree;
    std::vector<size_t> idx(rows);
    std::iota(idx.begin(), idx.end(), size_t{0});

    double root_sum = 0.0;
    for (size_t r = 0; r < rows; ++r) root_sum += resid[r];

    tree.nodes.push_back(GbdtNode{});
    std::vector<NodeTask> frontier{{0, 0, rows, 0, root_sum}};
    std::vector<size_t> buffer(rows);

    while (!frontier.empty()) {
        std::vector<NodeTask> next;
        for (const NodeTask& task : frontier) {
            size_t n = task.end - task.begin;
            GbdtNode& node = tree.nodes[task.node];
            SplitResult split;
            if (task.depth < cfg.max_depth &&
                n >= 2 * static_cast<size_t>(cfg.min_samples_leaf)) {
                split = builder.best_split(idx, task.begin, task.end, resid, features,
                                           cfg.min_samples_leaf, task.sum, cfg.jobs);
            }
            if (!split.found) {
                node.feature = -1;
                node.value = static_cast<float>(task.sum / static_cast<double>(n));
                for (size_t r = task.begin; r < task.end; ++r)
                    leaf_of_sample[idx[r]] = task.node;
                continue;
            }
            // Stable two-way partition of the node's index range.
            size_t lo = task.begin, hi = 0;
            double left_sum = 0.0;
            for (size_t r = task.begin; r < task.end; ++r) {
                if (builder.goes_left(idx[r], split)) {
                    left_sum += resid[idx[r]];
                    idx[lo++] = idx[r];
                } else {
                    buffer[hi++] = idx[r];
                }
            }
            std::copy(buffer.begin(), buffer.begin() + hi, idx.begin() + lo);
            if (lo == task.begin || lo == task.end) {
                // Float midpoint collapsed onto a sample value; keep a leaf.
                node.feature = -1;
                node.value = static_cast<float>(task.sum / static_cast<double>(n));
                for (size_t r = task.begin; r < task.end; ++r)
                    leaf_of_sample[idx[r]] = task.node;
                continue;
            }

            int32_t left_id = static_cast<int32_t>(tree.nodes.size());
            tree.nodes.push_back(GbdtNode{});
            tree.nodes.push_back(GbdtNode{});
            GbdtNode& nd = tree.nodes[task.node];  // re-taken: push_back invalidates
            nd.feature = split.feature;
            nd.threshold = split.threshold;
            nd.left = left_id;
            nd.right = left_id + 1;
            next.push_back({left_id, task.begin, lo, task.depth + 1, left_sum});
            next.push_back({left_id + 1, lo, task.end, task.depth + 1, task.sum - left_sum});
        }
        frontier = std::move(next);
    }
    return tree;
}

}  // namespace

GbdtModel gbdt_fit(const float* X, size_t rows, int dims, const double* y,
                   const GbdtConfig& cfg) {
    validate_gbdt_config(cfg);
    if (rows == 0) throw ValidationError("gbdt_fit: empty training data");
    if (dims < 1) throw ValidationError("gbdt_fit: need at least one feature");

    GbdtModel model;
    model.n_features = dims;
    model.learning_rate = cfg.learning_rate;
    double mean = 0.0;
    for (size_t r = 0; r < rows; ++r) mean += y[r];
    mean /= static_cast<double>(rows);
    model.base_score = mean;

    bool exact = cfg.split == GbdtSplit::Exact ||
                 (cfg.split == GbdtSplit::Auto && rows < kExactGreedyLimit);

    std::optional<HistBuilder> hist;
    if (!exact) hist.emplace(X, rows, dims, cfg);
    ExactBuilder exact_builder(X, rows, dims);

    std::vector<double> resid(rows);
    std::vector<double> pred(rows, mean);
    for (size_t r = 0; r < rows; ++r) resid[r] = y[r] - mean;

    Rng rng(cfg.seed);
    int n_sub = std::max(1, static_cast<int>(std::ceil(cfg.feature_subsample * dims)));
    std::vector<int> leaf_of_sample(rows, 0);

    for (int round = 0; round < cfg.rounds; ++round) {
        std::vector<int> features;
        if (n_sub >= dims) {
            features.resize(dims);
            std::iota(features.begin(), features.end(), 0);
        } else {
            Rng r = rng.child(static_cast<uint64_t>(round));
            auto ids = sample_indices(static_cast<size_t>(dims), static_cast<size_t>(n_sub), r);
            features.assign(ids.begin(), ids.end());
        }

        GbdtTree tree =
            exact ? build_tree(exact_builder, rows, resid, features, cfg, leaf_of_sample)
                  : build_tree(*hist, rows, resid, features, cfg, leaf_of_sample);

        // A split-free root predicts the residual mean, which is 0 after the
        // base score; no further round can improve, so stop.
        if (tree.nodes.size() == 1 && std::abs(tree.nodes[0].value) < 1e-15) break;

        for (size_t r = 0; r < rows; ++r) {
            double delta = cfg.learning_rate *
                           static_cast<double>(tree.nodes[leaf_of_sample[r]].value);
            pred[r] += delta;
            resid[r] = y[r] - pred[r];
        }
        double mse = 0.0;
        for (size_t r = 0; r < rows; ++r) mse += resid[r] * resid[r];
        model.train_mse.push_back(mse / static_cast<double>(rows));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

GbdtModel gbdt_fit(const std::vector<float>& X, size_t rows, int dims,
                   const std::vector<double>& y, const GbdtConfig& cfg) {
    if (X.size() != rows * static_cast<size_t>(dims) || y.size() != rows)
        throw ValidationError("gbdt_fit: matrix dimensions do not match");
    return gbdt_fit(X.data(), rows, dims, y.data(), cfg);
}

void gbdt_predict(const GbdtModel& m, const float* X, size_t rows, int dims,
                  double* out) {
    if (dims != m.n_features)
        throw ValidationError("gbdt_predict: feature count mismatch (got " +
                              std::to_string(dims) + ", trained on " +
                              std::to_string(m.n_features) + ")");
    for (size_t r = 0; r < rows; ++r) {
        const float* x = X + r * dims;
        double acc = m.base_score;
        for (const auto& tree : m.trees) {
            int node = 0;
            while (tree.nodes[node].feature >= 0) {
                const GbdtNode& nd = tree.nodes[node];
                node = x[nd.feature] < nd.threshold ? nd.left : nd.right;
            }
            acc += m.learning_rate * static_cast<double>(tree.nodes[node].value);
        }
        out[r] = acc;
    }
}

std::vector<double> gbdt_predict(const GbdtModel& m, const std::vector<float>& X,
                                 size_t rows, int dims) {
    if (X.size() != rows * static_cast<size_t>(dims))
        throw ValidationError("gbdt_predict: matrix dimensions do not match");
    std::vector<double> out(rows);
    gbdt_predict(m, X.data(), rows, dims, out.data());
    return out;
}

}  // namespace gusl
