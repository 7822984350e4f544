#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace gusl {

// Dense 3D scalar grid. Shape is (H, W, D) with D the through-plane axis;
// storage is h-fastest: index(h, w, d) = (d*W + w)*H + h. spacing[i] is the
// physical step in millimeters along shape axis i.
struct Volume3D {
    int h = 0, w = 0, d = 0;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::vector<double> data;

    Volume3D() = default;
    Volume3D(int h_, int w_, int d_, double fill = 0.0)
        : h(h_), w(w_), d(d_), data(static_cast<size_t>(h_) * w_ * d_, fill) {}

    size_t size() const { return data.size(); }
    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(k) * w + j) * h + i;
    }
    double& at(int i, int j, int k) { return data[index(i, j, k)]; }
    double at(int i, int j, int k) const { return data[index(i, j, k)]; }

    // Same shape, spacing and origin, data zeroed.
    Volume3D like(double fill = 0.0) const {
        Volume3D v(h, w, d, fill);
        v.spacing = spacing;
        v.origin = origin;
        return v;
    }
};

// Probability map: a Volume3D whose values live in [0, 1].
using ProbMap = Volume3D;
// Binary mask: values exactly 0 or 1.
using BinaryMask = Volume3D;

// Per-voxel feature grid at one encoder level. Feature vectors are contiguous:
// value(h, w, d, c) = data[voxel_index(h,w,d) * f + c].
struct FeatureTensor {
    int h = 0, w = 0, d = 0;
    int f = 0;
    int level = 0;
    std::vector<float> data;

    FeatureTensor() = default;
    FeatureTensor(int h_, int w_, int d_, int f_, int level_ = 0)
        : h(h_), w(w_), d(d_), f(f_), level(level_),
          data(static_cast<size_t>(h_) * w_ * d_ * f_, 0.0f) {}

    size_t voxels() const { return static_cast<size_t>(h) * w * d; }
    size_t voxel_index(int i, int j, int k) const {
        return (static_cast<size_t>(k) * w + j) * h + i;
    }
    float* at(int i, int j, int k) { return data.data() + voxel_index(i, j, k) * f; }
    const float* at(int i, int j, int k) const {
        return data.data() + voxel_index(i, j, k) * f;
    }
};

// Invariant checks; throw ValidationError on violation.
void validate_volume(const Volume3D& v);
void validate_prob_map(const ProbMap& p);
void validate_binary_mask(const BinaryMask& m);
bool same_grid(const Volume3D& a, const Volume3D& b);

// Replicate (edge) padding. Margins are (low, high) per axis.
Volume3D pad_replicate(const Volume3D& v, int mh0, int mh1, int mw0, int mw1,
                       int md0, int md1);
// Symmetric per-axis margins.
Volume3D pad_replicate(const Volume3D& v, int mh, int mw, int md);
FeatureTensor pad_replicate(const FeatureTensor& t, int mh, int mw, int md);

// (2,2,1) max pooling with stride (2,2,1), per channel. Odd in-plane dims are
// replicate-padded on the high side first.
FeatureTensor max_pool(const FeatureTensor& t);
Volume3D max_pool(const Volume3D& v);

// `levels` rounds of (2,2,1) average pooling; preserves [0,1] range and, on
// divisible shapes, the global mean.
ProbMap avg_pool_label(const ProbMap& g, int levels);

// Trilinear upsampling with half-voxel-aligned corners, clamped to [0,1].
ProbMap upsample_trilinear(const ProbMap& p, int th, int tw, int td);

// Strict comparison: mask = (p > t).
BinaryMask threshold(const ProbMap& p, double t = 0.5);

}  // namespace gusl
