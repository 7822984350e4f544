#include "gusl/phantom.hpp"

#include <cmath>

#include "gusl/errors.hpp"
#include "gusl/rng.hpp"

namespace gusl {

namespace {

// Per-case jitter bounds. Validation below uses the worst case of these, so
// every spec that validates generates geometrically consistent masks.
constexpr double kAxisJitter = 0.08;      // relative semi-axis perturbation
constexpr double kCenterJitter = 2.0;     // voxels
constexpr double kMaxRotation = 0.3;      // radians, about the D axis
constexpr double kTzShiftLo = 0.06;       // anterior TZ shift, fraction of axis
constexpr double kTzShiftHi = 0.18;
constexpr double kTzLateralShift = 0.06;

struct Ellipsoid {
    std::array<double, 3> center;
    std::array<double, 3> axes;
    double cos_t = 1.0, sin_t = 0.0;  // in-plane rotation

    bool contains(double i, double j, double k) const {
        double di = i - center[0], dj = j - center[1], dk = k - center[2];
        double ri = cos_t * di + sin_t * dj;
        double rj = -sin_t * di + cos_t * dj;
        double a = ri / axes[0], b = rj / axes[1], c = dk / axes[2];
        return a * a + b * b + c * c <= 1.0;
    }
};

}  // namespace

void validate_phantom_spec(const PhantomSpec& spec) {
    if (spec.h < 8 || spec.w < 8 || spec.d < 8)
        throw ValidationError("PhantomSpec: grid must be at least 8 voxels per axis");
    for (int a = 0; a < 3; ++a) {
        if (spec.gland_axes[a] < 2.0 || spec.tz_axes[a] < 2.0)
            throw ValidationError("PhantomSpec: semi-axes must be >= 2 voxels");
        // Strict containment must survive the worst-case jitter and TZ offset.
        if (spec.tz_axes[a] > 0.66 * spec.gland_axes[a])
            throw ValidationError(
                "PhantomSpec: TZ semi-axes must be <= 0.66 of gland semi-axes");
    }
    if (spec.noise_sigma < 0.0)
        throw ValidationError("PhantomSpec: noise sigma must be >= 0");
    if (spec.bias_amplitude < 0.0 || spec.bias_amplitude > 0.5)
        throw ValidationError("PhantomSpec: bias amplitude must be in [0, 0.5]");
    double in_plane = std::max(spec.gland_axes[0], spec.gland_axes[1]);
    if (in_plane * (1.0 + kAxisJitter) + kCenterJitter + 1.0 >
        0.5 * std::min(spec.h, spec.w))
        throw ValidationError("PhantomSpec: gland does not fit the in-plane grid");
    if (spec.gland_axes[2] * (1.0 + kAxisJitter) + kCenterJitter + 1.0 > 0.5 * spec.d)
        throw ValidationError("PhantomSpec: gland does not fit the through-plane grid");
}

PhantomCase generate_phantom(const PhantomSpec& spec) {
    validate_phantom_spec(spec);
    Rng rng(spec.seed);

    Ellipsoid gland;
    gland.center = {0.5 * (spec.h - 1) + rng.uniform(-kCenterJitter, kCenterJitter),
                    0.5 * (spec.w - 1) + rng.uniform(-kCenterJitter, kCenterJitter),
                    0.5 * (spec.d - 1) + rng.uniform(-kCenterJitter, kCenterJitter)};
    for (int a = 0; a < 3; ++a)
        gland.axes[a] = spec.gland_axes[a] * (1.0 + rng.uniform(-kAxisJitter, kAxisJitter));
    double theta = rng.uniform(-kMaxRotation, kMaxRotation);
    gland.cos_t = std::cos(theta);
    gland.sin_t = std::sin(theta);

    Ellipsoid tz = gland;
    for (int a = 0; a < 3; ++a)
        tz.axes[a] = spec.tz_axes[a] * (1.0 + rng.uniform(-kAxisJitter, kAxisJitter));
    // TZ sits slightly anterior (toward smaller h) in the rotated frame.
    double shift_h = -gland.axes[0] * rng.uniform(kTzShiftLo, kTzShiftHi);
    double shift_w = gland.axes[1] * rng.uniform(-kTzLateralShift, kTzLateralShift);
    double shift_d = gland.axes[2] * rng.uniform(-kTzLateralShift, kTzLateralShift);
    tz.center = {gland.center[0] + gland.cos_t * shift_h - gland.sin_t * shift_w,
                 gland.center[1] + gland.sin_t * shift_h + gland.cos_t * shift_w,
                 gland.center[2] + shift_d};

    double bias_freq[3] = {rng.uniform(0.5, 1.2), rng.uniform(0.5, 1.2),
                           rng.uniform(0.5, 1.2)};
    double bias_phase[3] = {rng.uniform(0.0, 6.283185307179586),
                            rng.uniform(0.0, 6.283185307179586),
                            rng.uniform(0.0, 6.283185307179586)};

    PhantomCase out;
    out.image = Volume3D(spec.h, spec.w, spec.d);
    out.gland = out.image.like();
    out.tz = out.image.like();
    out.pz = out.image.like();

    const double two_pi = 6.283185307179586;
    for (int k = 0; k < spec.d; ++k)
        for (int j = 0; j < spec.w; ++j)
            for (int i = 0; i < spec.h; ++i) {
                bool in_gland = gland.contains(i, j, k);
                bool in_tz = in_gland && tz.contains(i, j, k);
                bool posterior = i > gland.center[0];
                bool in_pz = in_gland && !in_tz && posterior;
                double mean = spec.bg_mean;
                if (in_tz) mean = spec.tz_mean;
                else if (in_pz) mean = spec.pz_mean;
                else if (in_gland) mean = spec.gland_mean;

                double s = std::sin(two_pi * bias_freq[0] * i / spec.h + bias_phase[0]) *
                           std::sin(two_pi * bias_freq[1] * j / spec.w + bias_phase[1]) *
                           std::sin(two_pi * bias_freq[2] * k / spec.d + bias_phase[2]);
                double v = mean * (1.0 + spec.bias_amplitude * s);
                if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();

                size_t idx = out.image.index(i, j, k);
                out.image.data[idx] = v;
                out.gland.data[idx] = in_gland ? 1.0 : 0.0;
                out.tz.data[idx] = in_tz ? 1.0 : 0.0;
                out.pz.data[idx] = in_pz ? 1.0 : 0.0;
            }
    return out;
}

}  // namespace gusl
