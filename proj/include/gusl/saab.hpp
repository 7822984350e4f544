#pragma once

#include <cstddef>
#include <vector>

namespace gusl {

// One Saab transform: a fixed DC (mean) anchor plus PCA-derived AC anchors
// over the DC-removed inputs, with per-channel positivity biases. Anchors are
// stored float32, exactly as serialized, so fitted and reloaded models
// produce identical outputs.
struct SaabKernel {
    int n = 0;  // input dimension
    int m = 0;  // retained channels, DC first
    std::vector<float> anchors;  // m rows of n, row 0 = DC anchor
    std::vector<float> bias;     // m, b_k = max |a_k . x| over training data
    std::vector<double> energy;  // m, fraction of total variance per channel

    const float* anchor(int k) const { return anchors.data() + static_cast<size_t>(k) * n; }
};

// Fits on `count` windows of dimension n (row-major). Channels are retained in
// order (DC, then AC by descending energy) until the cumulative energy reaches
// `energy_threshold`; a threshold >= 1 retains the full basis. A zero-variance
// AC subspace yields a DC-only kernel. Throws ValidationError when count < n.
SaabKernel fit_saab(const float* windows, size_t count, int n, double energy_threshold);
SaabKernel fit_saab(const std::vector<float>& windows, int n, double energy_threshold);

// y_k = a_k . x + b_k, accumulated in double.
void apply_saab(const SaabKernel& k, const float* x, float* y);
std::vector<float> apply_saab(const SaabKernel& k, const std::vector<float>& x);

// Inverse of apply_saab for full-basis kernels: x = sum_k (y_k - b_k) a_k.
std::vector<float> reconstruct_saab(const SaabKernel& k, const float* y);

// Streaming fit support: accumulate moments over data passes, then finalize.
// Passes must feed identical windows in identical order.
class SaabAccumulator {
public:
    explicit SaabAccumulator(int n);

    void accumulate_mean(const float* windows, size_t count);
    void finish_mean();
    void accumulate_scatter(const float* windows, size_t count);
    // Builds anchors and energies; biases still require a projection pass.
    SaabKernel finish(double energy_threshold);
    // Updates per-channel max |a_k . x| for an already finished kernel.
    static void accumulate_bias(SaabKernel& k, const float* windows, size_t count);

    size_t count() const { return count_; }

private:
    int n_;
    size_t count_ = 0;
    std::vector<double> sum_;
    std::vector<double> mean_;
    std::vector<double> scatter_;  // n x n, row-major
    bool mean_done_ = false;
};

}  // namespace gusl
