#include "hrmt/moments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace hrmt {

OracleMomentProvider::OracleMomentProvider(std::vector<Decomposition> decomps,
                                           DensitySpec density, MtrSpec mtr)
    : decomps_(std::move(decomps)), density_(std::move(density)), mtr_(std::move(mtr)) {
    if (static_cast<int>(decomps_.size()) != mtr_.T())
        throw Error("OracleMomentProvider: decomposition/mtr treatment counts differ");
}

double OracleMomentProvider::cond_prob(int k, std::span<const double> q) const {
    const Decomposition& d = decomps_[k - 1];
    double p = d.constant;
    for (const auto& [mask, c] : d.terms) p += c * density_.box_prob(q, mask);
    return p;
}

double OracleMomentProvider::cond_outcome_moment(int k, std::span<const double> q) const {
    const Decomposition& d = decomps_[k - 1];
    const AffineFn& m = mtr_.fns[k - 1];
    double g = d.constant != 0 ? d.constant * density_.box_mean(m, q, 0u) : 0.0;
    for (const auto& [mask, c] : d.terms) g += c * density_.box_mean(m, q, mask);
    return g;
}

namespace {
inline double epanechnikov(double u) {
    const double a = std::fabs(u);
    return a >= 1.0 ? 0.0 : 0.75 * (1.0 - a * a);
}
}  // namespace

KernelMomentProvider::KernelMomentProvider(std::vector<double> q_points, std::vector<int> d,
                                           std::vector<double> y, int J, int T, double ybar,
                                           KernelConfig cfg)
    : J_(J), T_(T), ybar_(ybar), n_min_(cfg.n_min), q_(std::move(q_points)),
      d_(std::move(d)), y_(std::move(y)) {
    const size_t nobs = d_.size();
    if (q_.size() != nobs * static_cast<size_t>(J_) || y_.size() != nobs)
        throw Error("KernelMomentProvider: input sizes disagree");
    if (nobs < 2) throw InsufficientData("KernelMomentProvider: need at least 2 observations");

    h_ = cfg.bandwidth;
    if (h_.empty()) {
        // Rule of thumb at the n^(-1/(J+4)) rate, scaled by the sample std and
        // the canonical constant for the product Epanechnikov kernel.
        h_.resize(J_);
        const double expo = -1.0 / (J_ + 4.0);
        for (int j = 0; j < J_; ++j) {
            double m = 0, s2 = 0;
            for (size_t i = 0; i < nobs; ++i) m += q_[i * J_ + j];
            m /= nobs;
            for (size_t i = 0; i < nobs; ++i) {
                const double dx = q_[i * J_ + j] - m;
                s2 += dx * dx;
            }
            s2 /= (nobs - 1);
            h_[j] = cfg.rot_constant * std::sqrt(s2) * std::pow(static_cast<double>(nobs), expo);
            if (h_[j] <= 0.0) h_[j] = 0.1;
        }
    }
    if (static_cast<int>(h_.size()) != J_) throw Error("KernelMomentProvider: bandwidth size");
    for (double h : h_)
        if (h <= 0.0) throw Error("KernelMomentProvider: bandwidth must be positive");

    // Uniform bins sized to the largest bandwidth so a query touches at most
    // 3 bins per dimension.
    double hmax = *std::max_element(h_.begin(), h_.end());
    nbins_ = std::clamp(static_cast<int>(1.0 / hmax), 1, 64);
    size_t total = 1;
    for (int j = 0; j < J_; ++j) total *= static_cast<size_t>(nbins_);
    bins_.assign(total, {});
    std::vector<int> mi(J_);
    for (size_t i = 0; i < nobs; ++i) {
        for (int j = 0; j < J_; ++j) mi[j] = bin_of(j, q_[i * J_ + j]);
        bins_[bin_index(mi)].push_back(static_cast<uint32_t>(i));
    }
}

KernelMomentProvider KernelMomentProvider::from_dataset(const Dataset& ds,
                                                        const ThresholdSpec& threshold,
                                                        double ybar, KernelConfig cfg) {
    const int J = threshold.J;
    std::vector<double> qp(ds.n() * static_cast<size_t>(J));
    for (size_t i = 0; i < ds.n(); ++i) {
        const std::vector<double> q = threshold.eval(ds.z_row(i));
        for (int j = 0; j < J; ++j) qp[i * J + j] = q[j];
    }
    int T = ds.T;
    return KernelMomentProvider(std::move(qp), ds.d, ds.y, J, T, ybar, std::move(cfg));
}

int KernelMomentProvider::bin_of(int dim, double x) const {
    (void)dim;
    int b = static_cast<int>(x * nbins_);
    return std::clamp(b, 0, nbins_ - 1);
}

size_t KernelMomentProvider::bin_index(std::span<const int> mi) const {
    size_t idx = 0;
    for (int j = 0; j < J_; ++j) idx = idx * nbins_ + static_cast<size_t>(mi[j]);
    return idx;
}

KernelMomentProvider::Acc KernelMomentProvider::accumulate(int k, std::span<const double> q,
                                                           bool outcome) const {
    Acc acc;
    // ranges of bins touched by the kernel support
    std::vector<int> lo(J_), hi(J_), mi(J_);
    for (int j = 0; j < J_; ++j) {
        lo[j] = bin_of(j, q[j] - h_[j]);
        hi[j] = bin_of(j, q[j] + h_[j]);
        mi[j] = lo[j];
    }
    while (true) {
        for (uint32_t i : bins_[bin_index(mi)]) {
            double w = 1.0;
            for (int j = 0; j < J_ && w > 0.0; ++j)
                w *= epanechnikov((q[j] - q_[i * J_ + j]) / h_[j]);
            if (w <= 0.0) continue;
            const double target =
                (d_[i] == k ? 1.0 : 0.0) * (outcome ? y_[i] : 1.0);
            acc.wsum += w;
            acc.w2 += w * w;
            acc.wy += w * target;
        }
        int j = J_ - 1;
        while (j >= 0 && ++mi[j] > hi[j]) mi[j--] = lo[j];
        if (j < 0) break;
    }
    return acc;
}

double KernelMomentProvider::cond_prob(int k, std::span<const double> q) const {
    const Acc a = accumulate(k, q, false);
    const double neff = a.w2 > 0.0 ? a.wsum * a.wsum / a.w2 : 0.0;
    if (neff < n_min_)
        throw InsufficientData("cond_prob: effective sample " + std::to_string(neff) +
                               " below n_min");
    return a.wy / a.wsum;
}

double KernelMomentProvider::cond_outcome_moment(int k, std::span<const double> q) const {
    const Acc a = accumulate(k, q, true);
    const double neff = a.w2 > 0.0 ? a.wsum * a.wsum / a.w2 : 0.0;
    if (neff < n_min_)
        throw InsufficientData("cond_outcome_moment: effective sample below n_min");
    return a.wy / a.wsum;
}

double mixed_partial(const std::function<double(std::span<const double>)>& moment,
                     std::span<const double> q, uint32_t dims_mask, const FdConfig& fd) {
    const std::vector<int> dims = mask_to_dims(dims_mask);
    const int m = static_cast<int>(dims.size());
    for (int j : dims)
        if (q[j] - fd.h <= 0.0 || q[j] + fd.h >= 1.0)
            throw BoundaryViolation("mixed_partial: stencil leaves (0,1) at dim " +
                                    std::to_string(j + 1));
    std::vector<double> point(q.begin(), q.end());
    const uint32_t ncorner = 1u << m;
    double sum = 0.0;
    for (uint32_t c = 0; c < ncorner; ++c) {
        for (int i = 0; i < m; ++i)
            point[dims[i]] = q[dims[i]] + (((c >> i) & 1u) ? fd.h : -fd.h);
        const int sign = (std::popcount(c) % 2 == m % 2) ? 1 : -1;
        sum += sign * moment(point);
    }
    return sum / std::pow(2.0 * fd.h, m);
}

}  // namespace hrmt
