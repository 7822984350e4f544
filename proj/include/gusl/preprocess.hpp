#pragma once

#include <array>

#include "gusl/volume.hpp"

namespace gusl {

enum class NormalizeMode { MinMax, ZScore };

struct PreprocessConfig {
    std::array<int, 3> target_size{64, 64, 32};
    int lanczos_radius = 3;
    double clahe_clip_limit = 2.0;
    int clahe_tiles_h = 8;
    int clahe_tiles_w = 8;
    bool clahe_enabled = true;
    NormalizeMode normalize = NormalizeMode::MinMax;
};

void validate_preprocess_config(const PreprocessConfig& cfg);

// Separable Lanczos-a resampling along each axis; spacing is rescaled so the
// physical extent is preserved, and output values are clamped to the input
// min/max to suppress ringing.
Volume3D resample_lanczos(const Volume3D& vol, int th, int tw, int td, int a = 3);

// Per axial slice (fixed D index): quantize to 256 levels over the slice
// range, clip-limited tile-histogram equalization with bilinear tile blending,
// output rescaled to [0,1]. Constant slices map to constant 0.5.
Volume3D clahe_slices(const Volume3D& vol, const PreprocessConfig& cfg);

// minmax -> [0,1]; zscore -> mean 0, variance 1. Degenerate inputs (zero
// range / zero variance) return all-zeros and emit a warning on stderr.
Volume3D normalize_intensity(const Volume3D& vol, NormalizeMode mode);

// Full chain: resample -> CLAHE -> normalize.
Volume3D preprocess_volume(const Volume3D& vol, const PreprocessConfig& cfg);

}  // namespace gusl
