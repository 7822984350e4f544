#pragma once

#include <array>
#include <cstdint>

#include "gusl/volume.hpp"

namespace gusl {

// Synthetic prostate-like test volume: a rotated outer ellipsoid (gland)
// containing an inner ellipsoid (TZ); PZ is the posterior gland remainder.
// Intensity is per-region mean, modulated by a smooth multiplicative bias
// field, plus additive Gaussian noise. Fully determined by (spec, seed).
struct PhantomSpec {
    int h = 64, w = 64, d = 32;
    std::array<double, 3> gland_axes{17.0, 14.0, 9.0};  // semi-axes in voxels
    std::array<double, 3> tz_axes{9.0, 7.5, 5.0};
    double bg_mean = 0.18;
    double gland_mean = 0.52;
    double tz_mean = 0.82;
    double pz_mean = 0.38;
    double noise_sigma = 0.03;
    double bias_amplitude = 0.08;
    uint64_t seed = 0;
};

struct PhantomCase {
    Volume3D image;
    BinaryMask gland;
    BinaryMask tz;
    BinaryMask pz;
};

// Throws ValidationError when the spec violates its invariants.
void validate_phantom_spec(const PhantomSpec& spec);

PhantomCase generate_phantom(const PhantomSpec& spec);

}  // namespace gusl
