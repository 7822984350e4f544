#include "gusl/encoder.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>

#include "gusl/errors.hpp"
#include "gusl/rng.hpp"

namespace gusl {

namespace {

inline int clampi(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

// 27 scalars of one channel around (i, j, k), offsets (dd, dw, dh) lex order.
inline void gather_window(const FeatureTensor& t, int i, int j, int k, int channel,
                          float* out) {
    int q = 0;
    for (int dd = -1; dd <= 1; ++dd) {
        int kk = clampi(k + dd, t.d);
        for (int dw = -1; dw <= 1; ++dw) {
            int jj = clampi(j + dw, t.w);
            for (int dh = -1; dh <= 1; ++dh) {
                out[q++] = t.at(clampi(i + dh, t.h), jj, kk)[channel];
            }
        }
    }
}

struct VoxelCoord {
    int i, j, k;
};

VoxelCoord coord_of(const FeatureTensor& t, size_t voxel) {
    int h = t.h, w = t.w;
    int i = static_cast<int>(voxel % h);
    size_t rest = voxel / h;
    int j = static_cast<int>(rest % w);
    int k = static_cast<int>(rest / w);
    return {i, j, k};
}

// Applies one fitted level to a tensor: per parent channel, windows are
// gathered and projected; outputs are packed parent-major.
FeatureTensor apply_level(const CwSaabLevel& level, const FeatureTensor& in) {
    if (static_cast<int>(level.kernels.size()) != in.f)
        throw ValidationError("encoder: tensor channels do not match level kernels");
    FeatureTensor out(in.h, in.w, in.d, level.output_channels(), in.level + 1);
    const size_t n_vox = in.voxels();
    constexpr size_t kChunk = 16384;

    int offset = 0;
    for (size_t p = 0; p < level.kernels.size(); ++p) {
        const SaabKernel& k = level.kernels[p];
        if (k.m == 0) continue;
        Eigen::MatrixXd anchors(27, k.m);
        for (int c = 0; c < k.m; ++c)
            for (int i = 0; i < 27; ++i) anchors(i, c) = k.anchor(c)[i];
        Eigen::VectorXd bias(k.m);
        for (int c = 0; c < k.m; ++c) bias(c) = k.bias[c];

        Eigen::MatrixXd win(kChunk, 27);
        std::vector<float> row(27);
        for (size_t v0 = 0; v0 < n_vox; v0 += kChunk) {
            size_t rows = std::min(kChunk, n_vox - v0);
            for (size_t r = 0; r < rows; ++r) {
                VoxelCoord c = coord_of(in, v0 + r);
                gather_window(in, c.i, c.j, c.k, static_cast<int>(p), row.data());
                for (int q = 0; q < 27; ++q) win(static_cast<Eigen::Index>(r), q) = row[q];
            }
            Eigen::MatrixXd proj = win.topRows(rows) * anchors;
            proj.rowwise() += bias.transpose();
            for (size_t r = 0; r < rows; ++r) {
                float* dst = out.data.data() + (v0 + r) * out.f + offset;
                for (int c = 0; c < k.m; ++c)
                    dst[c] = static_cast<float>(proj(static_cast<Eigen::Index>(r), c));
            }
        }
        offset += k.m;
    }
    return out;
}

}  // namespace

FeatureTensor neighborhood_3d(const FeatureTensor& t) {
    FeatureTensor out(t.h, t.w, t.d, 27 * t.f, t.level);
    for (int k = 0; k < t.d; ++k)
        for (int j = 0; j < t.w; ++j)
            for (int i = 0; i < t.h; ++i) {
                float* dst = out.at(i, j, k);
                for (int dd = -1; dd <= 1; ++dd) {
                    int kk = clampi(k + dd, t.d);
                    for (int dw = -1; dw <= 1; ++dw) {
                        int jj = clampi(j + dw, t.w);
                        for (int dh = -1; dh <= 1; ++dh) {
                            const float* src = t.at(clampi(i + dh, t.h), jj, kk);
                            std::copy(src, src + t.f, dst);
                            dst += t.f;
                        }
                    }
                }
            }
    return out;
}

FeatureTensor expand_receptive_field(const FeatureTensor& t) {
    FeatureTensor out(t.h, t.w, t.d, 9 * t.f, t.level);
    for (int k = 0; k < t.d; ++k)
        for (int j = 0; j < t.w; ++j)
            for (int i = 0; i < t.h; ++i) {
                float* dst = out.at(i, j, k);
                for (int dw = -1; dw <= 1; ++dw) {
                    int jj = clampi(j + dw, t.w);
                    for (int dh = -1; dh <= 1; ++dh) {
                        if (dw == 0 && dh == 0) continue;
                        const float* src = t.at(clampi(i + dh, t.h), jj, k);
                        std::copy(src, src + t.f, dst);
                        dst += t.f;
                    }
                }
                const float* center = t.at(i, j, k);
                std::copy(center, center + t.f, dst);
            }
    return out;
}

std::array<int, 3> level_grid(const std::array<int, 3>& input, int level) {
    std::array<int, 3> g = input;
    for (int l = 1; l < level; ++l) {
        g[0] = (g[0] + 1) / 2;
        g[1] = (g[1] + 1) / 2;
    }
    return g;
}

EncoderModel fit_encoder(const std::vector<Volume3D>& volumes, const EncoderConfig& cfg) {
    if (volumes.empty()) throw ValidationError("fit_encoder: no training volumes");
    if (cfg.levels < 1) throw ValidationError("fit_encoder: levels must be >= 1");
    const Volume3D& first = volumes.front();
    for (const auto& v : volumes)
        if (!same_grid(v, first))
            throw ValidationError("fit_encoder: training volumes must share one shape");

    EncoderModel model;
    model.cfg = cfg;
    model.input_shape = {first.h, first.w, first.d};

    // Working tensors, one per volume, updated level by level.
    std::vector<FeatureTensor> tensors(volumes.size());
    for (size_t v = 0; v < volumes.size(); ++v) {
        tensors[v] = FeatureTensor(first.h, first.w, first.d, 1, 1);
        for (size_t i = 0; i < volumes[v].data.size(); ++i)
            tensors[v].data[i] = static_cast<float>(volumes[v].data[i]);
    }

    Rng rng(cfg.seed);
    std::vector<double> parent_energy{1.0};

    for (int level = 0; level < cfg.levels; ++level) {
        if (level > 0)
            for (auto& t : tensors) t = max_pool(t);

        const int parents = tensors.front().f;
        const size_t vox_per_vol = tensors.front().voxels();
        size_t per_vol =
            std::max<size_t>(1, cfg.cov_sample_cap / std::max<size_t>(1, volumes.size()));
        per_vol = std::min(per_vol, vox_per_vol);

        // One shared voxel subsample per (level, volume), reused by every
        // parent so moment estimation cost stays bounded.
        std::vector<std::vector<size_t>> positions(volumes.size());
        size_t total = 0;
        for (size_t v = 0; v < volumes.size(); ++v) {
            Rng r = rng.child(static_cast<uint64_t>(level) * 7919 + v);
            positions[v] = sample_indices(vox_per_vol, per_vol, r);
            total += positions[v].size();
        }

        CwSaabLevel lv;
        lv.kernels.resize(parents);
        lv.parent_energy = parent_energy;
        lv.child_energy.resize(parents);

        // Strongest pre-prune child across the level, kept as a fallback so a
        // level never emits zero channels.
        int best_p = -1;
        SaabKernel best_child;
        double best_e = -1.0;

        std::vector<float> windows(total * 27);
        for (int p = 0; p < parents; ++p) {
            size_t row = 0;
            for (size_t v = 0; v < volumes.size(); ++v)
                for (size_t pos : positions[v]) {
                    VoxelCoord c = coord_of(tensors[v], pos);
                    gather_window(tensors[v], c.i, c.j, c.k, p, windows.data() + 27 * row);
                    ++row;
                }

            if (total < 27) {
                std::cerr << "fit_encoder: level " << (level + 1) << " channel " << p
                          << " dropped (insufficient data)\n";
                lv.kernels[p] = SaabKernel{};
                lv.kernels[p].n = 27;
                continue;
            }
            SaabKernel kern = fit_saab(windows.data(), total, 27, cfg.energy_threshold);

            for (int c = 0; c < kern.m; ++c) {
                double e = parent_energy[p] * kern.energy[c];
                if (e > best_e) {
                    best_e = e;
                    best_p = p;
                    best_child.n = kern.n;
                    best_child.m = 1;
                    best_child.anchors.assign(kern.anchor(c), kern.anchor(c) + kern.n);
                    best_child.bias = {kern.bias[c]};
                    best_child.energy = {kern.energy[c]};
                }
            }

            // Discard children whose global energy falls below the floor.
            SaabKernel pruned;
            pruned.n = kern.n;
            for (int c = 0; c < kern.m; ++c) {
                if (parent_energy[p] * kern.energy[c] < cfg.discard_threshold) continue;
                pruned.anchors.insert(pruned.anchors.end(), kern.anchor(c),
                                      kern.anchor(c) + kern.n);
                pruned.bias.push_back(kern.bias[c]);
                pruned.energy.push_back(kern.energy[c]);
                lv.child_energy[p].push_back(parent_energy[p] * kern.energy[c]);
            }
            pruned.m = static_cast<int>(pruned.bias.size());
            lv.kernels[p] = std::move(pruned);
        }

        if (lv.output_channels() == 0 && best_p >= 0) {
            lv.child_energy[best_p] = {best_e};
            lv.kernels[best_p] = std::move(best_child);
        }

        // Next-level parent energies follow the packed output channel order.
        parent_energy.clear();
        for (int p = 0; p < parents; ++p)
            for (double e : lv.child_energy[p]) parent_energy.push_back(e);

        model.levels.push_back(std::move(lv));
        for (auto& t : tensors) t = apply_level(model.levels.back(), t);
    }
    return model;
}

std::vector<FeatureTensor> encode(const EncoderModel& model, const Volume3D& vol) {
    if (vol.h != model.input_shape[0] || vol.w != model.input_shape[1] ||
        vol.d != model.input_shape[2])
        throw ValidationError("encode: volume shape does not match training shape");

    std::vector<FeatureTensor> out;
    FeatureTensor t(vol.h, vol.w, vol.d, 1, 1);
    for (size_t i = 0; i < vol.data.size(); ++i)
        t.data[i] = static_cast<float>(vol.data[i]);

    for (size_t level = 0; level < model.levels.size(); ++level) {
        if (level > 0) t = max_pool(t);
        t = apply_level(model.levels[level], t);
        t.level = static_cast<int>(level) + 1;
        out.push_back(t);
    }
    return out;
}

}  // namespace gusl
