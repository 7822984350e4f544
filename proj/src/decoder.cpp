#include "gusl/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gusl/errors.hpp"
#include "gusl/parallel.hpp"
#include "gusl/rng.hpp"

namespace gusl {

void validate_roi_config(const RoiConfig& cfg) {
    if (!(cfg.t_lo >= 0.0 && cfg.t_lo < cfg.t_hi && cfg.t_hi <= 1.0))
        throw ValidationError("RoiConfig: need 0 <= t_lo < t_hi <= 1");
    if (cfg.dilation_radius < 0)
        throw ValidationError("RoiConfig: dilation radius must be >= 0");
    if (!(cfg.max_fraction > 0.0 && cfg.max_fraction <= 1.0))
        throw ValidationError("RoiConfig: max fraction must be in (0, 1]");
    if (cfg.residual_floor < 0.0)
        throw ValidationError("RoiConfig: residual floor must be >= 0");
}

namespace {

struct GridIdx {
    int h, w, d;
    size_t size() const { return static_cast<size_t>(h) * w * d; }
    void coords(size_t idx, int& i, int& j, int& k) const {
        i = static_cast<int>(idx % h);
        size_t rest = idx / h;
        j = static_cast<int>(rest % w);
        k = static_cast<int>(rest / w);
    }
    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(k) * w + j) * h + i;
    }
};

template <typename Fn>
void for_each_neighbor6(const GridIdx& g, int i, int j, int k, Fn&& fn) {
    if (i > 0) fn(g.index(i - 1, j, k));
    if (i + 1 < g.h) fn(g.index(i + 1, j, k));
    if (j > 0) fn(g.index(i, j - 1, k));
    if (j + 1 < g.w) fn(g.index(i, j + 1, k));
    if (k > 0) fn(g.index(i, j, k - 1));
    if (k + 1 < g.d) fn(g.index(i, j, k + 1));
}

}  // namespace

std::vector<size_t> roi_select(const ProbMap& p_m, const ProbMap* residual,
                               const RoiConfig& cfg) {
    validate_roi_config(cfg);
    GridIdx g{p_m.h, p_m.w, p_m.d};
    const size_t n = g.size();
    std::vector<uint8_t> in_set(n, 0);

    for (size_t idx = 0; idx < n; ++idx) {
        double p = p_m.data[idx];
        if (p > cfg.t_lo && p < cfg.t_hi) in_set[idx] = 1;
    }

    // Voxels adjacent to a 0.5 crossing mark both sides of the transition, so
    // hard 0/1 interfaces still produce a seed band.
    for (int k = 0; k < g.d; ++k)
        for (int j = 0; j < g.w; ++j)
            for (int i = 0; i < g.h; ++i) {
                size_t idx = g.index(i, j, k);
                double a = p_m.data[idx] - 0.5;
                if (a == 0.0) continue;
                auto check = [&](size_t nb) {
                    double b = p_m.data[nb] - 0.5;
                    if (a * b < 0.0) {
                        in_set[idx] = 1;
                        in_set[nb] = 1;
                    }
                };
                if (i + 1 < g.h) check(g.index(i + 1, j, k));
                if (j + 1 < g.w) check(g.index(i, j + 1, k));
                if (k + 1 < g.d) check(g.index(i, j, k + 1));
            }

    // The radius counts layers including the seed layer itself.
    int grow = std::max(0, cfg.dilation_radius - 1);
    std::vector<size_t> frontier;
    for (size_t idx = 0; idx < n; ++idx)
        if (in_set[idx]) frontier.push_back(idx);
    for (int it = 0; it < grow; ++it) {
        std::vector<size_t> next;
        for (size_t idx : frontier) {
            int i, j, k;
            g.coords(idx, i, j, k);
            for_each_neighbor6(g, i, j, k, [&](size_t nb) {
                if (!in_set[nb]) {
                    in_set[nb] = 1;
                    next.push_back(nb);
                }
            });
        }
        frontier = std::move(next);
    }

    if (residual) {
        if (!same_grid(p_m, *residual))
            throw ValidationError("roi_select: residual grid mismatch");
        for (size_t idx = 0; idx < n; ++idx)
            if (std::abs(residual->data[idx]) > cfg.residual_floor) in_set[idx] = 1;
    }

    std::vector<size_t> out;
    for (size_t idx = 0; idx < n; ++idx)
        if (in_set[idx]) out.push_back(idx);

    size_t cap = static_cast<size_t>(cfg.max_fraction * static_cast<double>(n));
    if (out.size() > cap) {
        std::vector<double> key(out.size());
        for (size_t r = 0; r < out.size(); ++r) {
            size_t idx = out[r];
            if (residual) {
                key[r] = -std::abs(residual->data[idx]);  // keep highest |R|
            } else {
                double p = p_m.data[idx];  // keep closest to the band
                key[r] = std::max(0.0, std::max(cfg.t_lo - p, p - cfg.t_hi));
            }
        }
        std::vector<size_t> order(out.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (key[a] != key[b]) return key[a] < key[b];
            return out[a] < out[b];
        });
        std::vector<size_t> kept(cap);
        for (size_t r = 0; r < cap; ++r) kept[r] = out[order[r]];
        std::sort(kept.begin(), kept.end());
        out = std::move(kept);
    }
    return out;
}

ProbMap residual_target(const ProbMap& g, const ProbMap& p_m) {
    if (!same_grid(g, p_m)) throw ValidationError("residual_target: grid mismatch");
    ProbMap r = g.like();
    for (size_t i = 0; i < g.data.size(); ++i) r.data[i] = g.data[i] - p_m.data[i];
    return r;
}

ProbMap compensate(const ProbMap& p_m, const std::vector<double>& r_hat,
                   const std::vector<size_t>& roi) {
    if (r_hat.size() != roi.size())
        throw ValidationError("compensate: prediction/ROI size mismatch");
    ProbMap out = p_m;
    for (size_t r = 0; r < roi.size(); ++r)
        out.data[roi[r]] = std::clamp(p_m.data[roi[r]] + r_hat[r], 0.0, 1.0);
    return out;
}

namespace {

// Expanded (9F) feature rows for a voxel list, center voxel's features last.
void build_expanded_rows(const FeatureTensor& t, const size_t* voxels, size_t count,
                         float* out) {
    GridIdx g{t.h, t.w, t.d};
    const int f = t.f;
    for (size_t r = 0; r < count; ++r) {
        int i, j, k;
        g.coords(voxels[r], i, j, k);
        float* dst = out + r * static_cast<size_t>(9) * f;
        for (int dw = -1; dw <= 1; ++dw) {
            int jj = std::clamp(j + dw, 0, t.w - 1);
            for (int dh = -1; dh <= 1; ++dh) {
                if (dw == 0 && dh == 0) continue;
                const float* src = t.at(std::clamp(i + dh, 0, t.h - 1), jj, k);
                std::copy(src, src + f, dst);
                dst += f;
            }
        }
        const float* center = t.at(i, j, k);
        std::copy(center, center + f, dst);
    }
}

// Rows over [expanded | LNT] restricted to selected columns.
std::vector<float> build_selected_rows(const FeatureTensor& t, const LevelModel& lm,
                                       const size_t* voxels, size_t count) {
    const int ef = 9 * t.f;
    const int lk = lm.lnt.output_dim();
    const int out_dim = static_cast<int>(lm.selected.size());
    std::vector<float> out(count * static_cast<size_t>(out_dim));

    constexpr size_t kChunk = 8192;
    std::vector<float> expanded(kChunk * static_cast<size_t>(ef));
    std::vector<float> lnt(kChunk * static_cast<size_t>(lk));
    for (size_t c0 = 0; c0 < count; c0 += kChunk) {
        size_t rows = std::min(kChunk, count - c0);
        build_expanded_rows(t, voxels + c0, rows, expanded.data());
        lnt_apply(lm.lnt, expanded.data(), rows, ef, lnt.data());
        for (size_t r = 0; r < rows; ++r) {
            const float* e = expanded.data() + r * ef;
            const float* l = lnt.data() + r * lk;
            float* dst = out.data() + (c0 + r) * out_dim;
            for (int s = 0; s < out_dim; ++s) {
                int idx = lm.selected[s];
                dst[s] = idx < ef ? e[idx] : l[idx - ef];
            }
        }
    }
    return out;
}

// Full [expanded | LNT] rows used during fitting.
std::vector<float> build_full_rows(const FeatureTensor& t, const LntModel& lnt,
                                   const size_t* voxels, size_t count) {
    const int ef = 9 * t.f;
    const int lk = lnt.output_dim();
    std::vector<float> out(count * static_cast<size_t>(ef + lk));
    constexpr size_t kChunk = 8192;
    std::vector<float> expanded(kChunk * static_cast<size_t>(ef));
    std::vector<float> lfeat(kChunk * static_cast<size_t>(lk));
    for (size_t c0 = 0; c0 < count; c0 += kChunk) {
        size_t rows = std::min(kChunk, count - c0);
        build_expanded_rows(t, voxels + c0, rows, expanded.data());
        lnt_apply(lnt, expanded.data(), rows, ef, lfeat.data());
        for (size_t r = 0; r < rows; ++r) {
            float* dst = out.data() + (c0 + r) * static_cast<size_t>(ef + lk);
            std::copy(expanded.data() + r * ef, expanded.data() + (r + 1) * ef, dst);
            std::copy(lfeat.data() + r * lk, lfeat.data() + (r + 1) * lk, dst + ef);
        }
    }
    return out;
}

std::vector<size_t> all_voxels(const FeatureTensor& t) {
    std::vector<size_t> v(t.voxels());
    std::iota(v.begin(), v.end(), size_t{0});
    return v;
}

ProbMap clamp01(const ProbMap& p) {
    ProbMap out = p;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace

GuslTrainResult train_gusl(const std::vector<Volume3D>& volumes,
                           const std::vector<ProbMap>& targets,
                           const GuslTrainConfig& cfg) {
    if (volumes.empty()) throw ValidationError("train_gusl: no training volumes");
    if (volumes.size() != targets.size())
        throw ValidationError("train_gusl: volume/target count mismatch");
    for (size_t v = 0; v < volumes.size(); ++v)
        if (!same_grid(volumes[v], targets[v]))
            throw ValidationError("train_gusl: target grid mismatch");
    validate_roi_config(cfg.roi);

    const size_t n_vols = volumes.size();
    const int n_levels = cfg.encoder.levels;
    Rng rng(cfg.seed);

    GuslTrainResult result;
    EncoderConfig enc_cfg = cfg.encoder;
    enc_cfg.seed = rng.child(1).next();
    result.model.encoder = fit_encoder(volumes, enc_cfg);
    result.model.roi = cfg.roi;
    result.model.levels.resize(n_levels);

    // Per-volume encoder features and per-level pooled targets.
    std::vector<std::vector<FeatureTensor>> feats(n_vols);
    parallel_for(n_vols, cfg.jobs, [&](size_t v) {
        feats[v] = encode(result.model.encoder, volumes[v]);
    });
    std::vector<std::vector<ProbMap>> g(n_vols);
    for (size_t v = 0; v < n_vols; ++v) {
        g[v].push_back(targets[v]);
        for (int l = 1; l < n_levels; ++l)
            g[v].push_back(avg_pool_label(g[v].back(), 1));
    }

    std::vector<ProbMap> p_r(n_vols);  // corrected map at the current level

    for (int li = n_levels - 1; li >= 0; --li) {
        const bool is_bottom = li == n_levels - 1;
        LevelModel& lm = result.model.levels[li];
        LevelTrainLog log;
        log.level = li + 1;

        // Current-level P_m: level-4 comes from the initial regressor below;
        // upper levels interpolate the corrected previous-level map.
        std::vector<ProbMap> p_m(n_vols);
        if (!is_bottom) {
            parallel_for(n_vols, cfg.jobs, [&](size_t v) {
                const FeatureTensor& t = feats[v][li];
                p_m[v] = upsample_trilinear(p_r[v], t.h, t.w, t.d);
                p_m[v].spacing = g[v][li].spacing;
            });
        }

        // Rows used to fit LNT and RFT: the level's own regression samples.
        // Level 4 fits on the whole grid against G; upper levels fit on the
        // ROI against the residual.
        std::vector<std::vector<size_t>> fit_voxels(n_vols);
        std::vector<std::vector<size_t>> roi(n_vols);
        std::vector<ProbMap> resid(n_vols);

        if (is_bottom) {
            size_t quota = std::max<size_t>(1, cfg.fit_row_cap / n_vols);
            for (size_t v = 0; v < n_vols; ++v) {
                Rng r = rng.child(100 + static_cast<uint64_t>(li) * 31 + v);
                fit_voxels[v] = sample_indices(feats[v][li].voxels(), quota, r);
            }
        } else {
            for (size_t v = 0; v < n_vols; ++v) {
                resid[v] = residual_target(g[v][li], p_m[v]);
                roi[v] = roi_select(p_m[v], &resid[v], cfg.roi);
            }
            size_t quota = std::max<size_t>(1, cfg.fit_row_cap / n_vols);
            for (size_t v = 0; v < n_vols; ++v) {
                Rng r = rng.child(100 + static_cast<uint64_t>(li) * 31 + v);
                auto pick = sample_indices(roi[v].size(), quota, r);
                fit_voxels[v].reserve(pick.size());
                for (size_t s : pick) fit_voxels[v].push_back(roi[v][s]);
            }
        }

        size_t fit_rows = 0;
        for (const auto& fv : fit_voxels) fit_rows += fv.size();

        const int ef = 9 * feats[0][li].f;
        bool trainable = fit_rows >= 2;

        if (trainable) {
            // Gather fit rows (expanded features) and targets.
            std::vector<float> x_fit(fit_rows * static_cast<size_t>(ef));
            std::vector<double> y_fit(fit_rows);
            size_t row = 0;
            for (size_t v = 0; v < n_vols; ++v) {
                build_expanded_rows(feats[v][li], fit_voxels[v].data(),
                                    fit_voxels[v].size(), x_fit.data() + row * ef);
                const ProbMap& tgt = is_bottom ? g[v][li] : resid[v];
                for (size_t s = 0; s < fit_voxels[v].size(); ++s)
                    y_fit[row + s] = tgt.data[fit_voxels[v][s]];
                row += fit_voxels[v].size();
            }

            GbdtConfig lnt_cfg = cfg.gbdt_lnt;
            lnt_cfg.seed = rng.child(200 + li).next();
            lnt_cfg.jobs = cfg.jobs;
            lm.lnt = lnt_fit(x_fit.data(), fit_rows, ef, y_fit.data(), cfg.lnt_k, lnt_cfg);

            // Concatenate LNT features, then rank everything with RFT.
            const int lk = lm.lnt.output_dim();
            std::vector<float> x_full(fit_rows * static_cast<size_t>(ef + lk));
            {
                std::vector<float> lfeat(fit_rows * static_cast<size_t>(lk));
                lnt_apply(lm.lnt, x_fit.data(), fit_rows, ef, lfeat.data());
                for (size_t r = 0; r < fit_rows; ++r) {
                    float* dst = x_full.data() + r * static_cast<size_t>(ef + lk);
                    std::copy(x_fit.data() + r * ef, x_fit.data() + (r + 1) * ef, dst);
                    std::copy(lfeat.data() + r * lk, lfeat.data() + (r + 1) * lk, dst + ef);
                }
            }
            RftReport report =
                rft_rank(x_full.data(), fit_rows, ef + lk, y_fit.data(), cfg.rft_bins, cfg.jobs);
            int n_keep = cfg.rft_n_keep > 0
                             ? std::min(cfg.rft_n_keep, ef + lk)
                             : std::min(1000, std::max(8, rft_elbow_keep(report, 1000)));
            lm.selected = rft_select(report, n_keep);
        }

        if (is_bottom) {
            // Initial regressor on the full coarse grid.
            std::vector<size_t> rows_per_vol(n_vols);
            size_t total = 0;
            for (size_t v = 0; v < n_vols; ++v) {
                rows_per_vol[v] = feats[v][li].voxels();
                total += rows_per_vol[v];
            }
            std::vector<float> x_all(total * lm.selected.size());
            std::vector<double> y_all(total);
            size_t row = 0;
            for (size_t v = 0; v < n_vols; ++v) {
                auto voxels = all_voxels(feats[v][li]);
                auto rows = build_selected_rows(feats[v][li], lm, voxels.data(), voxels.size());
                std::copy(rows.begin(), rows.end(), x_all.begin() + row * lm.selected.size());
                for (size_t s = 0; s < voxels.size(); ++s)
                    y_all[row + s] = g[v][li].data[s];
                row += voxels.size();
            }
            GbdtConfig init_cfg = cfg.gbdt_initial;
            init_cfg.seed = rng.child(300 + li).next();
            init_cfg.jobs = cfg.jobs;
            result.model.initial = gbdt_fit(x_all.data(), total,
                                            static_cast<int>(lm.selected.size()),
                                            y_all.data(), init_cfg);

            parallel_for(n_vols, cfg.jobs, [&](size_t v) {
                auto voxels = all_voxels(feats[v][li]);
                auto rows = build_selected_rows(feats[v][li], lm, voxels.data(), voxels.size());
                std::vector<double> pred(voxels.size());
                gbdt_predict(result.model.initial, rows.data(), voxels.size(),
                             static_cast<int>(lm.selected.size()), pred.data());
                const FeatureTensor& t = feats[v][li];
                ProbMap m(t.h, t.w, t.d);
                m.spacing = g[v][li].spacing;
                for (size_t s = 0; s < pred.size(); ++s) m.data[s] = pred[s];
                p_m[v] = clamp01(m);
            });
            for (size_t v = 0; v < n_vols; ++v) {
                resid[v] = residual_target(g[v][li], p_m[v]);
                roi[v] = roi_select(p_m[v], &resid[v], cfg.roi);
            }
        }

        // Residual corrector on the ROI.
        size_t roi_total = 0;
        for (const auto& b : roi) roi_total += b.size();
        log.roi_size = roi_total;

        double sum_r2 = 0.0, sum_abs_roi = 0.0, sum_abs_grid = 0.0;
        size_t grid_total = 0;
        for (size_t v = 0; v < n_vols; ++v) {
            for (size_t idx : roi[v]) {
                double r = resid[v].data[idx];
                sum_r2 += r * r;
                sum_abs_roi += std::abs(r);
            }
            for (double r : resid[v].data) sum_abs_grid += std::abs(r);
            grid_total += resid[v].data.size();
        }
        log.mse_before = roi_total > 0 ? sum_r2 / static_cast<double>(roi_total) : 0.0;
        log.mean_abs_residual_roi =
            roi_total > 0 ? sum_abs_roi / static_cast<double>(roi_total) : 0.0;
        log.mean_abs_residual_grid =
            grid_total > 0 ? sum_abs_grid / static_cast<double>(grid_total) : 0.0;

        lm.has_corrector =
            trainable &&
            roi_total >= std::max<size_t>(2, static_cast<size_t>(cfg.gbdt_corrector.min_samples_leaf));
        if (lm.has_corrector) {
            // Row cap distributed per volume, highest-|R| rows kept via the
            // roi_select cap ordering already applied.
            std::vector<float> x_roi(roi_total * lm.selected.size());
            std::vector<double> y_roi(roi_total);
            size_t row = 0;
            for (size_t v = 0; v < n_vols; ++v) {
                auto rows = build_selected_rows(feats[v][li], lm, roi[v].data(), roi[v].size());
                std::copy(rows.begin(), rows.end(), x_roi.begin() + row * lm.selected.size());
                for (size_t s = 0; s < roi[v].size(); ++s)
                    y_roi[row + s] = resid[v].data[roi[v][s]];
                row += roi[v].size();
            }
            GbdtConfig corr_cfg = cfg.gbdt_corrector;
            corr_cfg.seed = rng.child(400 + li).next();
            corr_cfg.jobs = cfg.jobs;
            lm.corrector = gbdt_fit(x_roi.data(), roi_total,
                                    static_cast<int>(lm.selected.size()), y_roi.data(),
                                    corr_cfg);
        }

        // Apply the correction and log the post-correction ROI error.
        double sum_after = 0.0;
        for (size_t v = 0; v < n_vols; ++v) {
            if (lm.has_corrector && !roi[v].empty()) {
                auto rows = build_selected_rows(feats[v][li], lm, roi[v].data(), roi[v].size());
                std::vector<double> pred(roi[v].size());
                gbdt_predict(lm.corrector, rows.data(), roi[v].size(),
                             static_cast<int>(lm.selected.size()), pred.data());
                p_r[v] = compensate(p_m[v], pred, roi[v]);
            } else {
                p_r[v] = p_m[v];
            }
            for (size_t idx : roi[v]) {
                double e = g[v][li].data[idx] - p_r[v].data[idx];
                sum_after += e * e;
            }
        }
        log.mse_after = roi_total > 0 ? sum_after / static_cast<double>(roi_total) : 0.0;
        result.log.push_back(log);

        if (is_bottom) {
            result.train_initial_up.resize(n_vols);
            for (size_t v = 0; v < n_vols; ++v) {
                const FeatureTensor& t1 = feats[v][0];
                result.train_initial_up[v] = upsample_trilinear(p_m[v], t1.h, t1.w, t1.d);
            }
        }
    }

    result.train_pred = p_r;
    return result;
}

ProbMap infer_gusl(const GuslModel& model, const Volume3D& vol) {
    std::vector<FeatureTensor> feats = encode(model.encoder, vol);
    const int n_levels = static_cast<int>(feats.size());

    ProbMap p_r;
    for (int li = n_levels - 1; li >= 0; --li) {
        const LevelModel& lm = model.levels[li];
        const FeatureTensor& t = feats[li];
        ProbMap p_m;
        if (li == n_levels - 1) {
            auto voxels = all_voxels(t);
            auto rows = build_selected_rows(t, lm, voxels.data(), voxels.size());
            std::vector<double> pred(voxels.size());
            gbdt_predict(model.initial, rows.data(), voxels.size(),
                         static_cast<int>(lm.selected.size()), pred.data());
            ProbMap m(t.h, t.w, t.d);
            m.spacing = vol.spacing;
            for (size_t s = 0; s < pred.size(); ++s) m.data[s] = pred[s];
            p_m = clamp01(m);
        } else {
            p_m = upsample_trilinear(p_r, t.h, t.w, t.d);
        }

        if (lm.has_corrector) {
            std::vector<size_t> roi = roi_select(p_m, nullptr, model.roi);
            if (!roi.empty()) {
                auto rows = build_selected_rows(t, lm, roi.data(), roi.size());
                std::vector<double> pred(roi.size());
                gbdt_predict(lm.corrector, rows.data(), roi.size(),
                             static_cast<int>(lm.selected.size()), pred.data());
                p_r = compensate(p_m, pred, roi);
            } else {
                p_r = p_m;
            }
        } else {
            p_r = p_m;
        }
    }
    return p_r;
}

}  // namespace gusl
