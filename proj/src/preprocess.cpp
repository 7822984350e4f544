#include "gusl/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <vector>

#include "gusl/errors.hpp"

namespace gusl {

void validate_preprocess_config(const PreprocessConfig& cfg) {
    for (int s : cfg.target_size)
        if (s < 1) throw ValidationError("PreprocessConfig: target size must be >= 1");
    if (cfg.lanczos_radius < 2)
        throw ValidationError("PreprocessConfig: lanczos radius must be >= 2");
    if (!(cfg.clahe_clip_limit > 0.0))
        throw ValidationError("PreprocessConfig: clahe clip limit must be > 0");
    if (cfg.clahe_tiles_h < 1 || cfg.clahe_tiles_w < 1)
        throw ValidationError("PreprocessConfig: clahe tile grid must be >= 1x1");
}

namespace {

double lanczos_weight(double t, int a) {
    double x = std::abs(t);
    if (x >= static_cast<double>(a)) return 0.0;
    if (x < 1e-12) return 1.0;
    double px = 3.14159265358979323846 * x;
    return a * std::sin(px) * std::sin(px / a) / (px * px);
}

// Resamples along one axis of a flat (outer, n) array where the resampled
// axis is fastest-varying within each outer row.
void resample_axis(const std::vector<double>& src, size_t outer, int n_in,
                   int n_out, int a, std::vector<double>& dst) {
    dst.assign(outer * static_cast<size_t>(n_out), 0.0);
    struct Tap {
        int lo;
        int count;
        size_t offset;
    };
    std::vector<Tap> taps(n_out);
    std::vector<double> weights;
    double scale = static_cast<double>(n_in) / n_out;
    for (int i = 0; i < n_out; ++i) {
        double pos = (i + 0.5) * scale - 0.5;
        int lo = static_cast<int>(std::ceil(pos - a));
        int hi = static_cast<int>(std::floor(pos + a));
        taps[i].lo = lo;
        taps[i].count = hi - lo + 1;
        taps[i].offset = weights.size();
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) {
            double w = lanczos_weight(pos - j, a);
            weights.push_back(w);
            sum += w;
        }
        for (int j = 0; j < taps[i].count; ++j) weights[taps[i].offset + j] /= sum;
    }
    for (size_t r = 0; r < outer; ++r) {
        const double* in = src.data() + r * static_cast<size_t>(n_in);
        double* out = dst.data() + r * static_cast<size_t>(n_out);
        for (int i = 0; i < n_out; ++i) {
            const Tap& t = taps[i];
            const double* w = weights.data() + t.offset;
            double acc = 0.0;
            for (int j = 0; j < t.count; ++j) {
                int s = std::clamp(t.lo + j, 0, n_in - 1);
                acc += w[j] * in[s];
            }
            out[i] = acc;
        }
    }
}

// Transpose a (outer, n) row-major array to (n, outer).
void transpose2d(const std::vector<double>& src, size_t outer, size_t n,
                 std::vector<double>& dst) {
    dst.resize(src.size());
    for (size_t r = 0; r < outer; ++r)
        for (size_t c = 0; c < n; ++c) dst[c * outer + r] = src[r * n + c];
}

}  // namespace

Volume3D resample_lanczos(const Volume3D& vol, int th, int tw, int td, int a) {
    if (th < 1 || tw < 1 || td < 1)
        throw ValidationError("resample_lanczos: target size must be >= 1 per axis");
    if (a < 2) throw ValidationError("resample_lanczos: radius must be >= 2");

    double lo = *std::min_element(vol.data.begin(), vol.data.end());
    double hi = *std::max_element(vol.data.begin(), vol.data.end());

    // Storage is h-fastest; resample h, then bring w and d into the fast
    // position in turn. Shapes are tracked explicitly through transposes.
    std::vector<double> cur = vol.data, tmp;
    size_t H = vol.h, W = vol.w, D = vol.d;

    resample_axis(cur, W * D, static_cast<int>(H), th, a, tmp);
    H = static_cast<size_t>(th);

    // (d*W + w)*H + h -> transpose rows of length H against outer W*D gives
    // h-major: (h*D + ... ) layout handled via generic 2D transpose below.
    transpose2d(tmp, W * D, H, cur);  // now (H, W*D) rows: index h*(W*D) + (d*W + w)
    // Within each h-row the fast axis is w (because outer index was d*W + w).
    resample_axis(cur, H * D, static_cast<int>(W), tw, a, tmp);
    // Careful: rows of length W require w-fastest; current layout inside an
    // h-row is (d*W + w), i.e. w-fastest per (h, d) pair once rows are viewed
    // as H*D rows of length W.
    W = static_cast<size_t>(tw);

    transpose2d(tmp, H * D, W, cur);  // (W, H*D): index w*(H*D) + (h*D + d)
    resample_axis(cur, W * H, static_cast<int>(D), td, a, tmp);
    D = static_cast<size_t>(td);

    // Current layout: (w*(H) + h)*D + d. Restore canonical (d*W + w)*H + h.
    Volume3D out(th, tw, td);
    out.spacing = {vol.spacing[0] * vol.h / th, vol.spacing[1] * vol.w / tw,
                   vol.spacing[2] * vol.d / td};
    out.origin = vol.origin;
    for (size_t w_ = 0; w_ < W; ++w_)
        for (size_t h_ = 0; h_ < H; ++h_)
            for (size_t d_ = 0; d_ < D; ++d_)
                out.data[(d_ * W + w_) * H + h_] = tmp[(w_ * H + h_) * D + d_];

    for (double& v : out.data) v = std::clamp(v, lo, hi);
    return out;
}

namespace {

struct TileGrid {
    int tiles;
    std::vector<int> start;   // tiles+1 boundaries
    std::vector<double> center;
};

TileGrid make_tiles(int extent, int tiles) {
    tiles = std::min(tiles, extent);
    TileGrid g;
    g.tiles = tiles;
    g.start.resize(tiles + 1);
    g.center.resize(tiles);
    for (int t = 0; t <= tiles; ++t)
        g.start[t] = static_cast<int>(static_cast<int64_t>(t) * extent / tiles);
    for (int t = 0; t < tiles; ++t)
        g.center[t] = 0.5 * (g.start[t] + g.start[t + 1] - 1);
    return g;
}

// Index of the lower blend tile and the blend fraction for coordinate x.
void blend_coords(const TileGrid& g, double x, int& t0, int& t1, double& f) {
    if (x <= g.center[0]) {
        t0 = t1 = 0;
        f = 0.0;
        return;
    }
    if (x >= g.center[g.tiles - 1]) {
        t0 = t1 = g.tiles - 1;
        f = 0.0;
        return;
    }
    int t = 0;
    while (t + 1 < g.tiles && g.center[t + 1] <= x) ++t;
    t0 = t;
    t1 = t + 1;
    f = (x - g.center[t0]) / (g.center[t1] - g.center[t0]);
}

}  // namespace

Volume3D clahe_slices(const Volume3D& vol, const PreprocessConfig& cfg) {
    validate_preprocess_config(cfg);
    constexpr int kBins = 256;
    Volume3D out = vol.like();

    TileGrid rows = make_tiles(vol.h, cfg.clahe_tiles_h);
    TileGrid cols = make_tiles(vol.w, cfg.clahe_tiles_w);

    std::vector<int> level(static_cast<size_t>(vol.h) * vol.w);
    std::vector<double> mapping(static_cast<size_t>(rows.tiles) * cols.tiles * kBins);

    for (int k = 0; k < vol.d; ++k) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < vol.w; ++j)
            for (int i = 0; i < vol.h; ++i) {
                double v = vol.at(i, j, k);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (!(hi - lo > 1e-12)) {
            for (int j = 0; j < vol.w; ++j)
                for (int i = 0; i < vol.h; ++i) out.at(i, j, k) = 0.5;
            continue;
        }

        double scale = (kBins - 1) / (hi - lo);
        for (int j = 0; j < vol.w; ++j)
            for (int i = 0; i < vol.h; ++i) {
                int l = static_cast<int>((vol.at(i, j, k) - lo) * scale + 0.5);
                level[static_cast<size_t>(j) * vol.h + i] = std::clamp(l, 0, kBins - 1);
            }

        for (int tr = 0; tr < rows.tiles; ++tr)
            for (int tc = 0; tc < cols.tiles; ++tc) {
                double hist[kBins] = {0};
                int n = 0;
                for (int j = cols.start[tc]; j < cols.start[tc + 1]; ++j)
                    for (int i = rows.start[tr]; i < rows.start[tr + 1]; ++i) {
                        ++hist[level[static_cast<size_t>(j) * vol.h + i]];
                        ++n;
                    }
                double clip = std::max(1.0, cfg.clahe_clip_limit * n / kBins);
                double excess = 0.0;
                for (double& h : hist)
                    if (h > clip) {
                        excess += h - clip;
                        h = clip;
                    }
                double add = excess / kBins;
                double cdf = 0.0;
                double* m = mapping.data() +
                            (static_cast<size_t>(tr) * cols.tiles + tc) * kBins;
                for (int l = 0; l < kBins; ++l) {
                    cdf += hist[l] + add;
                    m[l] = cdf / n;
                }
            }

        for (int j = 0; j < vol.w; ++j) {
            int c0, c1;
            double fc;
            blend_coords(cols, j, c0, c1, fc);
            for (int i = 0; i < vol.h; ++i) {
                int r0, r1;
                double fr;
                blend_coords(rows, i, r0, r1, fr);
                int l = level[static_cast<size_t>(j) * vol.h + i];
                auto map_at = [&](int tr, int tc) {
                    return mapping[(static_cast<size_t>(tr) * cols.tiles + tc) * kBins + l];
                };
                double v0 = map_at(r0, c0) * (1 - fr) + map_at(r1, c0) * fr;
                double v1 = map_at(r0, c1) * (1 - fr) + map_at(r1, c1) * fr;
                out.at(i, j, k) = v0 * (1 - fc) + v1 * fc;
            }
        }
    }
    return out;
}

Volume3D normalize_intensity(const Volume3D& vol, NormalizeMode mode) {
    Volume3D out = vol.like();
    if (mode == NormalizeMode::MinMax) {
        double lo = *std::min_element(vol.data.begin(), vol.data.end());
        double hi = *std::max_element(vol.data.begin(), vol.data.end());
        if (!(hi - lo > 0.0)) {
            std::cerr << "normalize_intensity: degenerate range, returning zeros\n";
            return out;
        }
        double inv = 1.0 / (hi - lo);
        for (size_t i = 0; i < vol.data.size(); ++i) out.data[i] = (vol.data[i] - lo) * inv;
        return out;
    }
    double mean = 0.0;
    for (double v : vol.data) mean += v;
    mean /= static_cast<double>(vol.data.size());
    double var = 0.0;
    for (double v : vol.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vol.data.size());
    if (!(var > 0.0)) {
        std::cerr << "normalize_intensity: zero variance, returning zeros\n";
        return out;
    }
    double inv = 1.0 / std::sqrt(var);
    for (size_t i = 0; i < vol.data.size(); ++i) out.data[i] = (vol.data[i] - mean) * inv;
    return out;
}

Volume3D preprocess_volume(const Volume3D& vol, const PreprocessConfig& cfg) {
    validate_preprocess_config(cfg);
    Volume3D v = resample_lanczos(vol, cfg.target_size[0], cfg.target_size[1],
                                  cfg.target_size[2], cfg.lanczos_radius);
    if (cfg.clahe_enabled) v = clahe_slices(v, cfg);
    return normalize_intensity(v, cfg.normalize);
}

}  // namespace gusl
