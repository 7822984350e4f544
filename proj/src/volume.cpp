#include "gusl/volume.hpp"

#include <algorithm>
#include <cmath>

#include "gusl/errors.hpp"

namespace gusl {

void validate_volume(const Volume3D& v) {
    if (v.h < 1 || v.w < 1 || v.d < 1)
        throw ValidationError("Volume3D: all dimensions must be >= 1");
    if (v.data.size() != static_cast<size_t>(v.h) * v.w * v.d)
        throw ValidationError("Volume3D: data size does not match shape");
    for (double s : v.spacing)
        if (!(s > 0.0)) throw ValidationError("Volume3D: spacing must be positive");
    for (double x : v.data)
        if (!std::isfinite(x)) throw ValidationError("Volume3D: non-finite value");
}

void validate_prob_map(const ProbMap& p) {
    validate_volume(p);
    for (double x : p.data)
        if (x < 0.0 || x > 1.0)
            throw ValidationError("ProbMap: value outside [0, 1]");
}

void validate_binary_mask(const BinaryMask& m) {
    validate_volume(m);
    for (double x : m.data)
        if (x != 0.0 && x != 1.0)
            throw ValidationError("BinaryMask: value not in {0, 1}");
}

bool same_grid(const Volume3D& a, const Volume3D& b) {
    return a.h == b.h && a.w == b.w && a.d == b.d;
}

namespace {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace

Volume3D pad_replicate(const Volume3D& v, int mh0, int mh1, int mw0, int mw1,
                       int md0, int md1) {
    if (mh0 < 0 || mh1 < 0 || mw0 < 0 || mw1 < 0 || md0 < 0 || md1 < 0)
        throw ValidationError("pad_replicate: margins must be non-negative");
    Volume3D out(v.h + mh0 + mh1, v.w + mw0 + mw1, v.d + md0 + md1);
    out.spacing = v.spacing;
    out.origin = v.origin;
    for (int k = 0; k < out.d; ++k) {
        int sk = clamp_index(k - md0, v.d);
        for (int j = 0; j < out.w; ++j) {
            int sj = clamp_index(j - mw0, v.w);
            for (int i = 0; i < out.h; ++i) {
                out.at(i, j, k) = v.at(clamp_index(i - mh0, v.h), sj, sk);
            }
        }
    }
    return out;
}

Volume3D pad_replicate(const Volume3D& v, int mh, int mw, int md) {
    return pad_replicate(v, mh, mh, mw, mw, md, md);
}

FeatureTensor pad_replicate(const FeatureTensor& t, int mh, int mw, int md) {
    if (mh < 0 || mw < 0 || md < 0)
        throw ValidationError("pad_replicate: margins must be non-negative");
    FeatureTensor out(t.h + 2 * mh, t.w + 2 * mw, t.d + 2 * md, t.f, t.level);
    for (int k = 0; k < out.d; ++k) {
        int sk = clamp_index(k - md, t.d);
        for (int j = 0; j < out.w; ++j) {
            int sj = clamp_index(j - mw, t.w);
            for (int i = 0; i < out.h; ++i) {
                const float* src = t.at(clamp_index(i - mh, t.h), sj, sk);
                std::copy(src, src + t.f, out.at(i, j, k));
            }
        }
    }
    return out;
}

FeatureTensor max_pool(const FeatureTensor& t) {
    const FeatureTensor* src = &t;
    FeatureTensor padded;
    if (t.h % 2 != 0 || t.w % 2 != 0) {
        // Replicate-pad the high side to even in-plane dims.
        padded = FeatureTensor(t.h + t.h % 2, t.w + t.w % 2, t.d, t.f, t.level);
        for (int k = 0; k < padded.d; ++k)
            for (int j = 0; j < padded.w; ++j)
                for (int i = 0; i < padded.h; ++i) {
                    const float* s = t.at(clamp_index(i, t.h), clamp_index(j, t.w), k);
                    std::copy(s, s + t.f, padded.at(i, j, k));
                }
        src = &padded;
    }
    FeatureTensor out(src->h / 2, src->w / 2, src->d, src->f, src->level);
    const int f = src->f;
    for (int k = 0; k < out.d; ++k)
        for (int j = 0; j < out.w; ++j)
            for (int i = 0; i < out.h; ++i) {
                float* dst = out.at(i, j, k);
                const float* a = src->at(2 * i, 2 * j, k);
                const float* b = src->at(2 * i + 1, 2 * j, k);
                const float* c = src->at(2 * i, 2 * j + 1, k);
                const float* e = src->at(2 * i + 1, 2 * j + 1, k);
                for (int q = 0; q < f; ++q)
                    dst[q] = std::max(std::max(a[q], b[q]), std::max(c[q], e[q]));
            }
    return out;
}

Volume3D max_pool(const Volume3D& v) {
    FeatureTensor t(v.h, v.w, v.d, 1);
    for (size_t i = 0; i < v.data.size(); ++i) t.data[i] = static_cast<float>(v.data[i]);
    FeatureTensor p = max_pool(t);
    Volume3D out(p.h, p.w, p.d);
    out.spacing = {v.spacing[0] * 2.0, v.spacing[1] * 2.0, v.spacing[2]};
    out.origin = v.origin;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = p.data[i];
    return out;
}

ProbMap avg_pool_label(const ProbMap& g, int levels) {
    if (levels < 0) throw ValidationError("avg_pool_label: levels must be >= 0");
    ProbMap cur = g;
    for (int l = 0; l < levels; ++l) {
        ProbMap src = (cur.h % 2 != 0 || cur.w % 2 != 0)
                          ? pad_replicate(cur, 0, cur.h % 2, 0, cur.w % 2, 0, 0)
                          : std::move(cur);
        ProbMap out(src.h / 2, src.w / 2, src.d);
        out.spacing = {src.spacing[0] * 2.0, src.spacing[1] * 2.0, src.spacing[2]};
        out.origin = src.origin;
        for (int k = 0; k < out.d; ++k)
            for (int j = 0; j < out.w; ++j)
                for (int i = 0; i < out.h; ++i) {
                    double s = src.at(2 * i, 2 * j, k) + src.at(2 * i + 1, 2 * j, k) +
                               src.at(2 * i, 2 * j + 1, k) + src.at(2 * i + 1, 2 * j + 1, k);
                    out.at(i, j, k) = s / 4.0;
                }
        cur = std::move(out);
    }
    return cur;
}

ProbMap upsample_trilinear(const ProbMap& p, int th, int tw, int td) {
    if (th < p.h || tw < p.w || td < p.d)
        throw ValidationError("upsample_trilinear: target must be >= source per axis");
    ProbMap out(th, tw, td);
    out.spacing = {p.spacing[0] * p.h / th, p.spacing[1] * p.w / tw,
                   p.spacing[2] * p.d / td};
    out.origin = p.origin;

    auto src_coord = [](int i, int n_out, int n_in) {
        // Half-voxel-aligned: centers of output voxels mapped into input space.
        return (i + 0.5) * (static_cast<double>(n_in) / n_out) - 0.5;
    };

    std::vector<int> i0(th), i1(th);
    std::vector<double> fi(th);
    for (int i = 0; i < th; ++i) {
        double x = src_coord(i, th, p.h);
        double fl = std::floor(x);
        i0[i] = clamp_index(static_cast<int>(fl), p.h);
        i1[i] = clamp_index(static_cast<int>(fl) + 1, p.h);
        fi[i] = std::clamp(x - fl, 0.0, 1.0);
    }
    std::vector<int> j0(tw), j1(tw);
    std::vector<double> fj(tw);
    for (int j = 0; j < tw; ++j) {
        double x = src_coord(j, tw, p.w);
        double fl = std::floor(x);
        j0[j] = clamp_index(static_cast<int>(fl), p.w);
        j1[j] = clamp_index(static_cast<int>(fl) + 1, p.w);
        fj[j] = std::clamp(x - fl, 0.0, 1.0);
    }
    std::vector<int> k0(td), k1(td);
    std::vector<double> fk(td);
    for (int k = 0; k < td; ++k) {
        double x = src_coord(k, td, p.d);
        double fl = std::floor(x);
        k0[k] = clamp_index(static_cast<int>(fl), p.d);
        k1[k] = clamp_index(static_cast<int>(fl) + 1, p.d);
        fk[k] = std::clamp(x - fl, 0.0, 1.0);
    }

    for (int k = 0; k < td; ++k)
        for (int j = 0; j < tw; ++j)
            for (int i = 0; i < th; ++i) {
                double c00 = p.at(i0[i], j0[j], k0[k]) * (1 - fi[i]) + p.at(i1[i], j0[j], k0[k]) * fi[i];
                double c10 = p.at(i0[i], j1[j], k0[k]) * (1 - fi[i]) + p.at(i1[i], j1[j], k0[k]) * fi[i];
                double c01 = p.at(i0[i], j0[j], k1[k]) * (1 - fi[i]) + p.at(i1[i], j0[j], k1[k]) * fi[i];
                double c11 = p.at(i0[i], j1[j], k1[k]) * (1 - fi[i]) + p.at(i1[i], j1[j], k1[k]) * fi[i];
                double c0 = c00 * (1 - fj[j]) + c10 * fj[j];
                double c1 = c01 * (1 - fj[j]) + c11 * fj[j];
                out.at(i, j, k) = std::clamp(c0 * (1 - fk[k]) + c1 * fk[k], 0.0, 1.0);
            }
    return out;
}

BinaryMask threshold(const ProbMap& p, double t) {
    BinaryMask out = p.like();
    for (size_t i = 0; i < p.data.size(); ++i) out.data[i] = p.data[i] > t ? 1.0 : 0.0;
    return out;
}

}  // namespace gusl
