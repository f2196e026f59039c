#include "hrmt/gprte.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "hrmt/stats.hpp"

namespace hrmt {

void PolicyPair::validate() const {
    if (static_cast<int>(base.size()) != T || static_cast<int>(cf.size()) != T)
        throw InvalidModel("policy pair: treatment counts disagree");
    auto check_complete = [&](const std::vector<Decomposition>& ds, const char* which) {
        int constant = 0;
        std::map<uint32_t, int> sum;
        for (const auto& d : ds) {
            constant += d.constant;
            for (const auto& [m, c] : d.terms) sum[m] += c;
        }
        std::erase_if(sum, [](const auto& kv) { return kv.second == 0; });
        if (constant != 1 || !sum.empty())
            throw InvalidModel(std::string("policy pair: ") + which +
                               " mechanism fails completeness");
    };
    check_complete(base, "baseline");
    check_complete(cf, "counterfactual");
}

void Weights::validate() const {
    double s = 0.0;
    for (double x : w) {
        if (x < 0.0) throw Error("weights must be nonnegative");
        s += x;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw Error("weights must sum to one");
}

namespace {

uint64_t z_content_seed(uint64_t master, std::span<const double> z) {
    const uint64_t h = fnv1a(z.data(), z.size() * sizeof(double));
    return derive_seed(master, h);
}

// Deterministic, permutation-stable reduction order.
std::vector<size_t> sorted_order(std::span<const uint64_t> keys, std::span<const double> w,
                                 std::span<const double> primary) {
    std::vector<size_t> idx(keys.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (keys[a] != keys[b]) return keys[a] < keys[b];
        if (w[a] != w[b]) return w[a] < w[b];
        return primary[a] < primary[b];
    });
    return idx;
}

}  // namespace

GprtePointResult gprte_point(std::span<const double> zs, int zdim, const Weights& weights,
                             const PolicyPair& policy, const DensitySpec& density,
                             const MtrEval& mtr, int M, uint64_t seed) {
    policy.validate();
    weights.validate();
    const size_t n = weights.w.size();
    if (zs.size() != n * static_cast<size_t>(zdim))
        throw Error("gprte_point: z block size mismatch");
    if (M < 2) throw Error("gprte_point: M must be at least 2");

    const AssignmentTable base_table(policy.base);
    const AssignmentTable cf_table(policy.cf);

    GprtePointResult res;
    res.M = M;
    res.seed = seed;
    res.dmu.resize(n);
    res.sigma2.resize(n);
    std::vector<uint64_t> keys(n);

    bool any_nonzero = false;
    for (size_t o = 0; o < n; ++o) {
        const std::span<const double> z = zs.subspan(o * zdim, zdim);
        keys[o] = fnv1a(z.data(), z.size() * sizeof(double));
        Rng rng(z_content_seed(seed, z));
        const std::vector<double> qa = policy.Q.eval(z);
        const std::vector<double> qb = policy.Qcf.eval(z);

        double mean = 0.0, m2 = 0.0;
        for (int m = 0; m < M; ++m) {
            const std::vector<double> v = density.sample(rng);
            const int da = base_table.assign(v, qa);
            const int db = cf_table.assign(v, qb);
            double dy = 0.0;
            if (da != db) {
                dy = mtr(db, v) - mtr(da, v);
                any_nonzero = any_nonzero || dy != 0.0;
            }
            // Welford accumulation
            const double delta = dy - mean;
            mean += delta / (m + 1);
            m2 += delta * (dy - mean);
        }
        res.dmu[o] = mean;
        res.sigma2[o] = m2 / (M - 1);
    }

    const auto order = sorted_order(keys, weights.w, res.dmu);
    double dw = 0.0, var = 0.0;
    for (size_t i : order) {
        dw += weights.w[i] * res.dmu[i];
        var += weights.w[i] * weights.w[i] * res.sigma2[i];
    }
    res.dW = dw;
    res.var_hat = var / M;
    res.degenerate = !any_nonzero || res.var_hat <= 0.0;
    if (!res.degenerate) {
        const double z = res.dW / std::sqrt(res.var_hat);
        res.z_stat = z;
        res.p_value = 2.0 * normal_cdf(-std::fabs(z));
    }
    return res;
}

PointwiseBoundsCache::PointwiseBoundsCache(const ConstraintSystem& sys, int memo_res)
    : sys_(sys), lp_(expand_lp(sys)), memo_res_(memo_res) {}

std::pair<double, double> PointwiseBoundsCache::bounds(int k_base, int k_cf,
                                                       std::span<const double> v) {
    const int J = sys_.basis.J;
    const int Tk = sys_.basis.size();
    uint64_t key = static_cast<uint64_t>(k_base) * 64 + k_cf;
    std::vector<double> center(J);
    for (int d = 0; d < J; ++d) {
        const int cell = std::clamp(static_cast<int>(v[d] * memo_res_), 0, memo_res_ - 1);
        key = key * memo_res_ + static_cast<uint64_t>(cell);
        center[d] = (cell + 0.5) / memo_res_;
    }
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    const int bb = sys_.block_of(k_cf), ba = sys_.block_of(k_base);
    if (bb < 0 || ba < 0)
        throw Error("gprte_set: reached treatment without a coefficient block");
    std::vector<double> w(sys_.nvars(), 0.0);
    for (int t = 0; t < Tk; ++t) {
        const double bt = sys_.basis.eval(t, center);
        w[bb * Tk + t] += bt;
        w[ba * Tk + t] -= bt;
    }
    const LpResult lo = lp_.minimize(w);
    if (lo.status == LpStatus::Infeasible)
        throw LpInfeasible("gprte_set: constraint system infeasible");
    if (lo.status == LpStatus::Unbounded)
        throw LpUnbounded("gprte_set: pointwise functional unbounded");
    const LpResult hi = lp_.maximize(w);
    if (hi.status != LpStatus::Optimal)
        throw LpUnbounded("gprte_set: pointwise functional unbounded");
    const std::pair<double, double> out{lo.objective, hi.objective};
    memo_.emplace(key, out);
    return out;
}

GprteSetResult gprte_set(std::span<const double> zs, int zdim, const Weights& weights,
                         const PolicyPair& policy, const DensitySpec& density,
                         const ConstraintSystem& sys, const SetGprteConfig& cfg,
                         PointwiseBoundsCache* cache) {
    policy.validate();
    weights.validate();
    const size_t n = weights.w.size();
    if (zs.size() != n * static_cast<size_t>(zdim))
        throw Error("gprte_set: z block size mismatch");
    if (cfg.M < 2) throw Error("gprte_set: M must be at least 2");

    const AssignmentTable base_table(policy.base);
    const AssignmentTable cf_table(policy.cf);

    std::optional<PointwiseBoundsCache> local;
    if (!cache) {
        local.emplace(sys, cfg.memo_res);
        cache = &*local;
    }
    auto pointwise_bounds = [&](int da, int db, std::span<const double> v) {
        return cache->bounds(da, db, v);
    };

    GprteSetResult res;
    res.M = cfg.M;
    res.seed = cfg.seed;
    res.dmu_lo.resize(n);
    res.dmu_hi.resize(n);
    std::vector<double> var_lo(n), var_hi(n), cov(n);
    std::vector<uint64_t> keys(n);

    for (size_t o = 0; o < n; ++o) {
        const std::span<const double> z = zs.subspan(o * zdim, zdim);
        keys[o] = fnv1a(z.data(), z.size() * sizeof(double));
        Rng rng(z_content_seed(cfg.seed, z));
        const std::vector<double> qa = policy.Q.eval(z);
        const std::vector<double> qb = policy.Qcf.eval(z);

        double mlo = 0, m2lo = 0, mhi = 0, m2hi = 0, c12 = 0;
        for (int m = 0; m < cfg.M; ++m) {
            const std::vector<double> v = density.sample(rng);
            const int da = base_table.assign(v, qa);
            const int db = cf_table.assign(v, qb);
            double dlo = 0.0, dhi = 0.0;
            if (da != db) {
                const auto [l, h] = pointwise_bounds(da, db, v);
                dlo = l;
                dhi = h;
            }
            const double dl = dlo - mlo, dh = dhi - mhi;
            mlo += dl / (m + 1);
            mhi += dh / (m + 1);
            m2lo += dl * (dlo - mlo);
            m2hi += dh * (dhi - mhi);
            c12 += dl * (dhi - mhi);  // pairwise covariance accumulator
        }
        res.dmu_lo[o] = mlo;
        res.dmu_hi[o] = mhi;
        var_lo[o] = m2lo / (cfg.M - 1);
        var_hi[o] = m2hi / (cfg.M - 1);
        cov[o] = c12 / (cfg.M - 1);
    }

    const auto order = sorted_order(keys, weights.w, res.dmu_lo);
    double dwlo = 0, dwhi = 0, s2lo = 0, s2hi = 0, scov = 0;
    for (size_t i : order) {
        const double wi = weights.w[i];
        dwlo += wi * res.dmu_lo[i];
        dwhi += wi * res.dmu_hi[i];
        s2lo += wi * wi * var_lo[i];
        s2hi += wi * wi * var_hi[i];
        scov += wi * wi * cov[i];
    }
    res.dW_lo = dwlo;
    res.dW_hi = dwhi;
    res.R = dwhi - dwlo;
    res.sigma_lo = std::sqrt(std::max(s2lo, 0.0));
    res.sigma_hi = std::sqrt(std::max(s2hi, 0.0));
    res.cov = scov;
    const double denom = res.sigma_lo * res.sigma_hi;
    res.rho = denom > 0.0 ? std::clamp(scov / denom, -1.0, 1.0) : 0.0;
    return res;
}

double im_critical_value(double R, double sigma_lo, double sigma_hi, int M, double alpha,
                         ImConvention convention) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("im_critical_value: alpha outside (0,1)");
    const double maxsig = std::max(sigma_lo, sigma_hi);
    double delta;
    if (maxsig <= 0.0) delta = R > 1e-300 ? std::numeric_limits<double>::infinity() : 0.0;
    else delta = std::sqrt(static_cast<double>(M)) * std::max(R, 0.0) / maxsig;

    auto phi_shift = [&](double c) {
        return std::isinf(delta) ? 1.0 : normal_cdf(c + delta);
    };

    if (convention == ImConvention::StandardIm) {
        // Phi(C + delta) - Phi(-C) = 1 - alpha, increasing in C
        double lo = -1.0, hi = 1.0;
        auto g = [&](double c) { return phi_shift(c) - normal_cdf(-c) - (1.0 - alpha); };
        while (g(lo) > 0.0) lo -= 5.0;
        while (g(hi) < 0.0) hi += 5.0;
        for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) < 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    // Paper-literal: Phi(C + delta) - Phi(C) = 1 - alpha; the left side peaks
    // at C = -delta/2 and decreases beyond, so a root may not exist.
    auto g = [&](double c) { return phi_shift(c) - normal_cdf(c) - (1.0 - alpha); };
    if (std::isinf(delta)) {
        // 1 - Phi(C) = 1 - alpha
        return normal_quantile(alpha);
    }
    const double peak = -delta / 2.0;
    if (g(peak) < 0.0)
        throw NoRoot("im_critical_value: paper-literal equation has no solution");
    double lo = peak, hi = peak + 1.0;
    while (g(hi) > 0.0) hi += 5.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ImInterval im_interval(const GprteSetResult& res, double alpha, ImConvention convention) {
    ImInterval out;
    out.alpha = alpha;
    out.convention = convention;
    out.cbar = im_critical_value(res.R, res.sigma_lo, res.sigma_hi, res.M, alpha, convention);
    const double rootM = std::sqrt(static_cast<double>(res.M));
    out.lower = res.dW_lo - out.cbar * res.sigma_lo / rootM;
    out.upper = res.dW_hi + out.cbar * res.sigma_hi / rootM;
    return out;
}

bool im_reject(const ImInterval& interval) {
    return 0.0 < interval.lower || 0.0 > interval.upper;
}

}  // namespace hrmt
