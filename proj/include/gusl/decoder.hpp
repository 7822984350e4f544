#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gusl/encoder.hpp"
#include "gusl/feat_learn.hpp"
#include "gusl/gbdt.hpp"
#include "gusl/volume.hpp"

namespace gusl {

struct RoiConfig {
    double t_lo = 0.02;
    double t_hi = 0.98;
    int dilation_radius = 2;     // layers counted from the band/transition set
    double residual_floor = 0.05;  // training-only |R| inclusion threshold
    double max_fraction = 0.35;  // ROI cap as a fraction of the grid
};

void validate_roi_config(const RoiConfig& cfg);

// Boundary-band voxel selection. The base set contains voxels with
// t_lo < P < t_hi plus voxels 6-adjacent to a 0.5-crossing, grown by
// (dilation_radius - 1) 6-neighborhood layers. When a residual map is given
// (training), voxels with |R| > residual_floor join the set and the cap keeps
// the highest-|R| voxels; at inference the cap keeps voxels whose probability
// is closest to the band. Returned indices are ascending.
std::vector<size_t> roi_select(const ProbMap& p_m, const ProbMap* residual,
                               const RoiConfig& cfg);

// R = G - P_m, elementwise; both inputs in [0,1], so R is in [-1,1].
ProbMap residual_target(const ProbMap& g, const ProbMap& p_m);

// P_r = clamp(P_m + R_hat, 0, 1) on the ROI; P_m elsewhere.
ProbMap compensate(const ProbMap& p_m, const std::vector<double>& r_hat,
                   const std::vector<size_t>& roi);

// Per-level supervised stage: receptive-field expansion, LNT, RFT selection,
// and the residual corrector (level 4 also carries the initial regressor).
struct LevelModel {
    LntModel lnt;
    std::vector<int> selected;  // indices into [expanded | LNT] feature space
    GbdtModel corrector;
    bool has_corrector = false;
};

struct GuslModel {
    EncoderModel encoder;
    GbdtModel initial;          // level-4 full-grid regressor
    std::vector<LevelModel> levels;  // [0] = level 1 ... [3] = level 4
    RoiConfig roi;
};

struct GuslTrainConfig {
    EncoderConfig encoder;
    GbdtConfig gbdt_initial;
    GbdtConfig gbdt_corrector;
    GbdtConfig gbdt_lnt;     // booster used only to derive LNT subsets
    int lnt_k = 400;
    int rft_bins = 16;
    int rft_n_keep = 0;      // 0: min(1000, elbow of the loss curve)
    size_t fit_row_cap = 2000000;  // rows used for LNT/RFT fitting
    RoiConfig roi;
    uint64_t seed = 0;
    int jobs = 1;
};

struct LevelTrainLog {
    int level = 0;
    size_t roi_size = 0;
    double mse_before = 0.0;  // mean R^2 over the ROI
    double mse_after = 0.0;   // mean (R - R_hat)^2 over the ROI
    double mean_abs_residual_roi = 0.0;
    double mean_abs_residual_grid = 0.0;
};

struct GuslTrainResult {
    GuslModel model;
    std::vector<LevelTrainLog> log;           // levels 4..1 in training order
    std::vector<ProbMap> train_pred;          // P^1_r per training volume
    std::vector<ProbMap> train_initial_up;    // level-4 P_m upsampled to level 1
};

// Trains encoder, per-level feature learning and regressors on volumes with
// per-volume level-1 targets (continuous [0,1] maps on the same grid).
GuslTrainResult train_gusl(const std::vector<Volume3D>& volumes,
                           const std::vector<ProbMap>& targets,
                           const GuslTrainConfig& cfg);

// Full decode of one volume: level-4 initial prediction, then bottom-up
// residual correction to the level-1 probability map.
ProbMap infer_gusl(const GuslModel& model, const Volume3D& vol);

}  // namespace gusl
