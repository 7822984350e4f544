#include "gusl/saab.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "gusl/errors.hpp"

namespace gusl {

namespace {

// Orthonormal basis of the complement of the DC direction: columns 1..n-1 of
// the Householder reflection sending e0 to the DC anchor. Every AC anchor is
// a combination of these columns, hence exactly orthogonal to DC.
Eigen::MatrixXd dc_complement_basis(int n) {
    Eigen::VectorXd dc = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    Eigen::VectorXd u = dc;
    u(0) -= 1.0;
    u.normalize();
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) - 2.0 * u * u.transpose();
    return h.rightCols(n - 1);
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    for (int i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-10) {
            if (v(i) < 0.0) v = -v;
            return;
        }
    }
}

}  // namespace

SaabAccumulator::SaabAccumulator(int n)
    : n_(n), sum_(n, 0.0), mean_(n, 0.0), scatter_(static_cast<size_t>(n) * n, 0.0) {}

void SaabAccumulator::accumulate_mean(const float* windows, size_t count) {
    for (size_t r = 0; r < count; ++r) {
        const float* x = windows + r * n_;
        for (int i = 0; i < n_; ++i) sum_[i] += x[i];
    }
    count_ += count;
}

void SaabAccumulator::finish_mean() {
    if (count_ > 0)
        for (int i = 0; i < n_; ++i) mean_[i] = sum_[i] / static_cast<double>(count_);
    mean_done_ = true;
}

void SaabAccumulator::accumulate_scatter(const float* windows, size_t count) {
    if (!mean_done_) throw ValidationError("SaabAccumulator: finish_mean first");
    Eigen::Map<Eigen::MatrixXd> scatter(scatter_.data(), n_, n_);
    Eigen::Map<const Eigen::VectorXd> mean(mean_.data(), n_);
    constexpr size_t kBlock = 4096;
    Eigen::MatrixXd block(n_, kBlock);
    for (size_t r0 = 0; r0 < count; r0 += kBlock) {
        size_t rows = std::min(kBlock, count - r0);
        for (size_t r = 0; r < rows; ++r) {
            const float* x = windows + (r0 + r) * n_;
            for (int i = 0; i < n_; ++i) block(i, r) = static_cast<double>(x[i]) - mean(i);
        }
        scatter.noalias() += block.leftCols(rows) * block.leftCols(rows).transpose();
    }
}

SaabKernel SaabAccumulator::finish(double energy_threshold) {
    if (count_ < static_cast<size_t>(n_))
        throw ValidationError("fit_saab: insufficient data (need at least " +
                              std::to_string(n_) + " samples, got " +
                              std::to_string(count_) + ")");
    const int n = n_;
    Eigen::Map<const Eigen::MatrixXd> scatter(scatter_.data(), n, n);
    Eigen::MatrixXd cov = scatter / static_cast<double>(count_);

    Eigen::VectorXd dc = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double dc_energy = dc.dot(cov * dc);

    Eigen::MatrixXd q = dc_complement_basis(n);
    Eigen::MatrixXd reduced = q.transpose() * cov * q;
    // Symmetrize against accumulation round-off.
    reduced = 0.5 * (reduced + reduced.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);

    // Eigen returns ascending order; we want descending.
    Eigen::VectorXd ac_vals = eig.eigenvalues().reverse();
    Eigen::MatrixXd ac_vecs(n, n - 1);
    for (int i = 0; i < n - 1; ++i) {
        ac_vecs.col(i) = q * eig.eigenvectors().col(n - 2 - i);
        fix_sign(ac_vecs.col(i));
    }

    double ac_total = 0.0;
    for (int i = 0; i < n - 1; ++i) ac_total += std::max(0.0, ac_vals(i));
    double total = dc_energy + ac_total;

    int m;
    if (total <= 0.0 || ac_total <= 1e-12 * total) {
        m = 1;  // zero-variance AC subspace: DC-only kernel
    } else if (energy_threshold >= 1.0) {
        m = n;
    } else {
        double cum = dc_energy / total;
        m = 1;
        while (m < n && cum < energy_threshold - 1e-12) {
            cum += std::max(0.0, ac_vals(m - 1)) / total;
            ++m;
        }
    }

    SaabKernel k;
    k.n = n;
    k.m = m;
    k.anchors.resize(static_cast<size_t>(m) * n);
    k.bias.assign(m, 0.0f);
    k.energy.resize(m);
    for (int i = 0; i < n; ++i) k.anchors[i] = static_cast<float>(dc(i));
    k.energy[0] = total > 0.0 ? dc_energy / total : 1.0;
    for (int c = 1; c < m; ++c) {
        for (int i = 0; i < n; ++i)
            k.anchors[static_cast<size_t>(c) * n + i] = static_cast<float>(ac_vecs(i, c - 1));
        k.energy[c] = std::max(0.0, ac_vals(c - 1)) / total;
    }
    return k;
}

void SaabAccumulator::accumulate_bias(SaabKernel& k, const float* windows, size_t count) {
    for (size_t r = 0; r < count; ++r) {
        const float* x = windows + r * k.n;
        for (int c = 0; c < k.m; ++c) {
            const float* a = k.anchor(c);
            double dot = 0.0;
            for (int i = 0; i < k.n; ++i) dot += static_cast<double>(a[i]) * x[i];
            float mag = static_cast<float>(std::abs(dot));
            if (mag > k.bias[c]) k.bias[c] = mag;
        }
    }
}

SaabKernel fit_saab(const float* windows, size_t count, int n, double energy_threshold) {
    SaabAccumulator acc(n);
    acc.accumulate_mean(windows, count);
    acc.finish_mean();
    acc.accumulate_scatter(windows, count);
    SaabKernel k = acc.finish(energy_threshold);
    SaabAccumulator::accumulate_bias(k, windows, count);
    return k;
}

SaabKernel fit_saab(const std::vector<float>& windows, int n, double energy_threshold) {
    if (n <= 0 || windows.size() % static_cast<size_t>(n) != 0)
        throw ValidationError("fit_saab: window buffer size not a multiple of n");
    return fit_saab(windows.data(), windows.size() / n, n, energy_threshold);
}

void apply_saab(const SaabKernel& k, const float* x, float* y) {
    for (int c = 0; c < k.m; ++c) {
        const float* a = k.anchor(c);
        double dot = 0.0;
        for (int i = 0; i < k.n; ++i) dot += static_cast<double>(a[i]) * x[i];
        y[c] = static_cast<float>(dot + k.bias[c]);
    }
}

std::vector<float> apply_saab(const SaabKernel& k, const std::vector<float>& x) {
    if (x.size() != static_cast<size_t>(k.n))
        throw ValidationError("apply_saab: dimension mismatch");
    std::vector<float> y(k.m);
    apply_saab(k, x.data(), y.data());
    return y;
}

std::vector<float> reconstruct_saab(const SaabKernel& k, const float* y) {
    std::vector<double> acc(k.n, 0.0);
    for (int c = 0; c < k.m; ++c) {
        const float* a = k.anchor(c);
        double coef = static_cast<double>(y[c]) - k.bias[c];
        for (int i = 0; i < k.n; ++i) acc[i] += coef * a[i];
    }
    std::vector<float> x(k.n);
    for (int i = 0; i < k.n; ++i) x[i] = static_cast<float>(acc[i]);
    return x;
}

}  // namespace gusl
