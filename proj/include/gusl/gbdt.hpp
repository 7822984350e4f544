#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gusl {

enum class GbdtSplit { Auto, Hist, Exact };

struct GbdtConfig {
    int rounds = 300;
    int max_depth = 6;
    double learning_rate = 0.1;
    int min_samples_leaf = 20;
    double feature_subsample = 0.8;
    int bins = 64;
    uint64_t seed = 0;
    GbdtSplit split = GbdtSplit::Auto;  // Auto: exact below 10k samples
    int jobs = 1;
};

void validate_gbdt_config(const GbdtConfig& cfg);

// feature < 0 marks a leaf; internal nodes route x[feature] < threshold left.
struct GbdtNode {
    int32_t feature = -1;
    float threshold = 0.0f;
    int32_t left = -1;
    int32_t right = -1;
    float value = 0.0f;
};

struct GbdtTree {
    std::vector<GbdtNode> nodes;  // node 0 is the root
};

struct GbdtModel {
    int n_features = 0;
    double base_score = 0.0;  // mean of training targets
    double learning_rate = 0.1;
    std::vector<GbdtTree> trees;
    std::vector<double> train_mse;  // training MSE after each round

    // Distinct features used by tree t's internal nodes, ascending.
    std::vector<int> tree_features(size_t t) const;
    size_t node_count() const;
};

// Greedy variance-reduction boosting with squared-error loss. Each round fits
// the current residuals; leaf values are raw residual means, scaled by the
// learning rate at prediction time. Deterministic given the seed.
GbdtModel gbdt_fit(const float* X, size_t rows, int dims, const double* y,
                   const GbdtConfig& cfg);
GbdtModel gbdt_fit(const std::vector<float>& X, size_t rows, int dims,
                   const std::vector<double>& y, const GbdtConfig& cfg);

void gbdt_predict(const GbdtModel& m, const float* X, size_t rows, int dims,
                  double* out);
std::vector<double> gbdt_predict(const GbdtModel& m, const std::vector<float>& X,
                                 size_t rows, int dims);

}  // namespace gusl
