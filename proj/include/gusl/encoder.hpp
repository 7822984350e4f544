#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gusl/saab.hpp"
#include "gusl/volume.hpp"

namespace gusl {

// Per-voxel 3x3x3 neighborhood gathering: output feature dimension is 27*F,
// ordered by (dd, dw, dh) offset (each -1,0,+1 lexicographic), spatial shape
// unchanged. Borders replicate.
FeatureTensor neighborhood_3d(const FeatureTensor& t);

// In-plane context merge: concatenation of the 9 (dw, dh) neighbors' feature
// vectors with the center voxel last; F -> 9F.
FeatureTensor expand_receptive_field(const FeatureTensor& t);

struct EncoderConfig {
    int levels = 4;
    double energy_threshold = 0.98;   // cumulative retention per kernel
    double discard_threshold = 1e-4;  // minimum global channel energy
    size_t cov_sample_cap = 2000000;  // windows per level for moment estimation
    uint64_t seed = 0;
    int jobs = 1;
};

// One channel-wise Saab level: an independent kernel per retained parent
// channel. Output channels are ordered parent-major, child order as fitted.
struct CwSaabLevel {
    std::vector<SaabKernel> kernels;                // one per parent channel
    std::vector<double> parent_energy;              // global energy per parent
    std::vector<std::vector<double>> child_energy;  // global energy per child
    int output_channels() const {
        int c = 0;
        for (const auto& k : kernels) c += k.m;
        return c;
    }
};

struct EncoderModel {
    EncoderConfig cfg;
    std::array<int, 3> input_shape{0, 0, 0};
    std::vector<CwSaabLevel> levels;
};

// Grid dims of level i (1-based) for a given input shape: in-plane dims halve
// between hops (replicate-padded up when odd), through-plane stays fixed.
std::array<int, 3> level_grid(const std::array<int, 3>& input, int level);

// Unsupervised fit of the four-level cascade on a set of same-shape volumes.
// Deterministic given volume order and config.
EncoderModel fit_encoder(const std::vector<Volume3D>& volumes, const EncoderConfig& cfg);

// Per-level feature tensors for one volume (must match the training shape).
std::vector<FeatureTensor> encode(const EncoderModel& model, const Volume3D& vol);

}  // namespace gusl
