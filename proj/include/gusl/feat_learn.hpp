#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gusl/gbdt.hpp"

namespace gusl {

// Relevant Feature Test: per-dimension best weighted-MSE binary split over
// bins-1 uniform candidate thresholds of [min, max]. Lower loss = more
// discriminant.
struct RftReport {
    std::vector<double> loss;  // per dimension
    std::vector<int> ranking;  // dimensions sorted ascending by loss (ties: index)
    int bins = 16;
};

// X is row-major (rows x dims). Loss of a constant dimension is Var(y).
// Samples with value < threshold form the left segment.
RftReport rft_rank(const float* X, size_t rows, int dims, const double* y,
                   int bins, int jobs = 1);

// The n_keep lowest-loss dimensions, ascending index order.
std::vector<int> rft_select(const RftReport& report, int n_keep);

// Elbow rule: keep up to the largest second difference of the sorted loss
// curve, capped at max_keep.
int rft_elbow_keep(const RftReport& report, int max_keep);

// Least-squares Normal Transform: K feature subsets (derived from the trees
// of a boosted ensemble fitted on (X, y)), each yielding one new feature via
// ordinary least squares of y on the subset.
struct LntModel {
    int input_dim = 0;
    std::vector<std::vector<int>> subsets;      // K non-empty index lists
    std::vector<std::vector<float>> weights;    // per subset: coefs + intercept

    int output_dim() const { return static_cast<int>(subsets.size()); }
};

// Subset derivation: tree t's used-feature set; trees with no splits fall back
// to a seeded balanced random partition of all dimensions. Degenerate targets
// produce zero-weight models with intercept mean(y).
LntModel lnt_fit(const float* X, size_t rows, int dims, const double* y, int k,
                 const GbdtConfig& booster_cfg);

// OLS fit on caller-supplied subsets (every subset must be non-empty).
LntModel lnt_fit_with_subsets(const float* X, size_t rows, int dims, const double* y,
                              const std::vector<std::vector<int>>& subsets);

// out is row-major (rows x K).
void lnt_apply(const LntModel& m, const float* X, size_t rows, int dims, float* out);

}  // namespace gusl
