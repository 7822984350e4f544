#include "gusl/feat_learn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "gusl/errors.hpp"
#include "gusl/parallel.hpp"
#include "gusl/rng.hpp"

namespace gusl {

RftReport rft_rank(const float* X, size_t rows, int dims, const double* y,
                   int bins, int jobs) {
    if (rows < 2) throw ValidationError("rft_rank: need at least 2 samples");
    if (bins < 2) throw ValidationError("rft_rank: bins must be >= 2");

    double y_sum = 0.0, y_sq = 0.0;
    for (size_t r = 0; r < rows; ++r) {
        y_sum += y[r];
        y_sq += y[r] * y[r];
    }
    const double n = static_cast<double>(rows);
    const double var_y = std::max(0.0, (y_sq - y_sum * y_sum / n) / n);

    RftReport report;
    report.bins = bins;
    report.loss.assign(dims, var_y);

    parallel_for(static_cast<size_t>(dims), jobs, [&](size_t f) {
        float lo = X[f], hi = X[f];
        for (size_t r = 1; r < rows; ++r) {
            float v = X[r * dims + f];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) return;  // constant dimension: loss stays Var(y)

        // Candidate thresholds are the bins-1 uniform partition points.
        std::vector<double> thresholds(bins - 1);
        double width = (static_cast<double>(hi) - lo) / bins;
        for (int k = 1; k < bins; ++k) thresholds[k - 1] = static_cast<double>(lo) + width * k;

        // Cell c holds samples with exactly c thresholds <= value, so the
        // left segment of threshold k is the union of cells 0..k-1. This is
        // bit-consistent with a direct (value < threshold) scan.
        std::vector<double> cell_sum(bins, 0.0), cell_sq(bins, 0.0);
        std::vector<long> cell_n(bins, 0);
        for (size_t r = 0; r < rows; ++r) {
            double v = static_cast<double>(X[r * dims + f]);
            int c = static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), v) -
                                     thresholds.begin());
            cell_sum[c] += y[r];
            cell_sq[c] += y[r] * y[r];
            ++cell_n[c];
        }

        double best = var_y;
        double lsum = 0.0, lsq = 0.0;
        long ln = 0;
        for (int k = 1; k < bins; ++k) {
            lsum += cell_sum[k - 1];
            lsq += cell_sq[k - 1];
            ln += cell_n[k - 1];
            long rn = static_cast<long>(rows) - ln;
            double sse_l = ln > 0 ? lsq - lsum * lsum / ln : 0.0;
            double rsum = y_sum - lsum;
            double rsq = y_sq - lsq;
            double sse_r = rn > 0 ? rsq - rsum * rsum / rn : 0.0;
            double loss = (std::max(0.0, sse_l) + std::max(0.0, sse_r)) / n;
            best = std::min(best, loss);
        }
        report.loss[f] = best;
    });

    report.ranking.resize(dims);
    std::iota(report.ranking.begin(), report.ranking.end(), 0);
    std::stable_sort(report.ranking.begin(), report.ranking.end(),
                     [&](int a, int b) { return report.loss[a] < report.loss[b]; });
    return report;
}

std::vector<int> rft_select(const RftReport& report, int n_keep) {
    int dims = static_cast<int>(report.loss.size());
    if (n_keep < 1 || n_keep > dims)
        throw ValidationError("rft_select: n_keep must be in [1, dims]");
    std::vector<int> out(report.ranking.begin(), report.ranking.begin() + n_keep);
    std::sort(out.begin(), out.end());
    return out;
}

int rft_elbow_keep(const RftReport& report, int max_keep) {
    int dims = static_cast<int>(report.loss.size());
    max_keep = std::min(max_keep, dims);
    if (dims < 3) return max_keep;
    std::vector<double> sorted(dims);
    for (int i = 0; i < dims; ++i) sorted[i] = report.loss[report.ranking[i]];
    int elbow = 1;
    double best = -1.0;
    for (int r = 1; r + 1 < dims; ++r) {
        double d2 = sorted[r + 1] - 2.0 * sorted[r] + sorted[r - 1];
        if (d2 > best) {
            best = d2;
            elbow = r;
        }
    }
    return std::min(max_keep, std::max(1, elbow));
}

namespace {

std::vector<float> solve_subset(const float* X, size_t rows, int dims,
                                const double* y, const std::vector<int>& subset) {
    const int p = static_cast<int>(subset.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p + 1, p + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd row(p + 1);
    for (size_t r = 0; r < rows; ++r) {
        const float* x = X + r * dims;
        for (int i = 0; i < p; ++i) row(i) = static_cast<double>(x[subset[i]]);
        row(p) = 1.0;
        a.selfadjointView<Eigen::Lower>().rankUpdate(row);
        b += y[r] * row;
    }
    a = a.selfadjointView<Eigen::Lower>();

    Eigen::VectorXd w = a.ldlt().solve(b);
    double resid = (a * w - b).norm();
    if (!w.allFinite() || resid > 1e-8 * (b.norm() + 1.0)) {
        // Singular system: ridge fallback.
        double eps = 1e-6 * a.trace() / (p + 1);
        if (!(eps > 0.0)) eps = 1e-12;
        Eigen::MatrixXd reg = a + eps * Eigen::MatrixXd::Identity(p + 1, p + 1);
        w = reg.ldlt().solve(b);
    }
    std::vector<float> out(p + 1);
    for (int i = 0; i <= p; ++i)
        out[i] = std::isfinite(w(i)) ? static_cast<float>(w(i)) : 0.0f;
    return out;
}

}  // namespace

LntModel lnt_fit_with_subsets(const float* X, size_t rows, int dims, const double* y,
                              const std::vector<std::vector<int>>& subsets) {
    LntModel m;
    m.input_dim = dims;
    m.subsets = subsets;
    for (const auto& s : subsets) {
        if (s.empty()) throw ValidationError("lnt_fit: empty feature subset");
        for (int f : s)
            if (f < 0 || f >= dims) throw ValidationError("lnt_fit: subset index out of range");
        m.weights.push_back(solve_subset(X, rows, dims, y, s));
    }
    return m;
}

LntModel lnt_fit(const float* X, size_t rows, int dims, const double* y, int k,
                 const GbdtConfig& booster_cfg) {
    if (k < 1) throw ValidationError("lnt_fit: K must be >= 1");
    if (rows < 2) throw ValidationError("lnt_fit: need at least 2 samples");

    double mean = 0.0;
    for (size_t r = 0; r < rows; ++r) mean += y[r];
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (size_t r = 0; r < rows; ++r) var += (y[r] - mean) * (y[r] - mean);

    LntModel m;
    m.input_dim = dims;
    if (!(var > 0.0)) {
        // Degenerate target: K constant features equal to mean(y).
        for (int t = 0; t < k; ++t) {
            m.subsets.push_back({0});
            std::vector<float> w(2, 0.0f);
            w[1] = static_cast<float>(mean);
            m.weights.push_back(w);
        }
        return m;
    }

    GbdtConfig cfg = booster_cfg;
    cfg.rounds = k;
    GbdtModel booster = gbdt_fit(X, rows, dims, y, cfg);

    std::vector<std::vector<int>> subsets;
    int fallback_needed = 0;
    for (int t = 0; t < k; ++t) {
        std::vector<int> used;
        if (static_cast<size_t>(t) < booster.trees.size())
            used = booster.tree_features(static_cast<size_t>(t));
        if (used.empty()) {
            subsets.emplace_back();  // filled by the fallback partition below
            ++fallback_needed;
        } else {
            subsets.push_back(std::move(used));
        }
    }

    if (fallback_needed > 0) {
        // Balanced random partition of all dimensions across the empty slots.
        Rng rng(cfg.seed ^ 0x6C8E944D1F3A5B7EULL);
        std::vector<int> order(dims);
        std::iota(order.begin(), order.end(), 0);
        shuffle(order, rng);
        int slot = 0;
        std::vector<std::vector<int>*> empty_slots;
        for (auto& s : subsets)
            if (s.empty()) empty_slots.push_back(&s);
        for (int i = 0; i < dims; ++i) {
            empty_slots[slot]->push_back(order[i]);
            slot = (slot + 1) % static_cast<int>(empty_slots.size());
        }
        for (auto* s : empty_slots) {
            if (s->empty()) s->push_back(0);  // more slots than dims
            std::sort(s->begin(), s->end());
        }
    }

    return lnt_fit_with_subsets(X, rows, dims, y, subsets);
}

void lnt_apply(const LntModel& m, const float* X, size_t rows, int dims, float* out) {
    if (dims != m.input_dim)
        throw ValidationError("lnt_apply: feature count mismatch (got " +
                              std::to_string(dims) + ", fitted on " +
                              std::to_string(m.input_dim) + ")");
    const int k = m.output_dim();
    for (size_t r = 0; r < rows; ++r) {
        const float* x = X + r * dims;
        float* o = out + r * k;
        for (int t = 0; t < k; ++t) {
            const auto& subset = m.subsets[t];
            const auto& w = m.weights[t];
            double acc = static_cast<double>(w.back());
            for (size_t i = 0; i < subset.size(); ++i)
                acc += static_cast<double>(w[i]) * x[subset[i]];
            o[t] = static_cast<float>(acc);
        }
    }
}

}  // namespace gusl
