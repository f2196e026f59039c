#include "hrmt/density.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace hrmt {

namespace {

// Lower Cholesky factor of a symmetric matrix given row-major; throws on
// non-positive-definite input.
std::vector<double> cholesky(const std::vector<double>& a, int n) {
    std::vector<double> L(n * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
            if (i == j) {
                if (s <= 0.0) throw Error("correlation matrix is not positive definite");
                L[i * n + i] = std::sqrt(s);
            } else {
                L[i * n + j] = s / L[j * n + j];
            }
        }
    }
    return L;
}

std::vector<double> chol_inverse(const std::vector<double>& L, int n) {
    // Solve L L^T X = I column by column.
    std::vector<double> inv(n * n, 0.0);
    std::vector<double> y(n);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) s -= L[i * n + k] * y[k];
            y[i] = s / L[i * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= L[k * n + i] * inv[k * n + c];
            inv[i * n + c] = s / L[i * n + i];
        }
    }
    return inv;
}

constexpr int kGlPoints = 64;
constexpr double kTRange = 8.0;

}  // namespace

DensitySpec::DensitySpec(int J, IndependentUniformSpec s) : J_(J), spec_(s) {}

DensitySpec::DensitySpec(int J, CellGridSpec s) : J_(J), spec_(std::move(s)) {
    const auto& g = std::get<CellGridSpec>(spec_);
    size_t want = 1;
    for (int d = 0; d < J_; ++d) want *= static_cast<size_t>(g.res);
    if (g.res < 1 || g.values.size() != want)
        throw Error("CellGridSpec: values size does not match res^J");
    double mass = 0.0;
    for (double v : g.values) {
        if (v <= 0.0) throw Error("CellGridSpec: density values must be positive");
        mass += v;
    }
    mass /= static_cast<double>(want);
    if (std::fabs(mass - 1.0) > 1e-6)
        throw Error("CellGridSpec: density must integrate to 1, got " + std::to_string(mass));
}

DensitySpec::DensitySpec(int J, GaussianCopulaSpec s) : J_(J), spec_(std::move(s)) {
    init_gaussian();
}

void DensitySpec::init_gaussian() {
    const auto& g = std::get<GaussianCopulaSpec>(spec_);
    if (static_cast<int>(g.corr.size()) != J_) throw Error("GaussianCopulaSpec: corr size != J");
    std::vector<double> a(J_ * J_);
    for (int i = 0; i < J_; ++i) {
        if (static_cast<int>(g.corr[i].size()) != J_)
            throw Error("GaussianCopulaSpec: corr row size != J");
        for (int j = 0; j < J_; ++j) {
            a[i * J_ + j] = g.corr[i][j];
            if (std::fabs(g.corr[i][j] - g.corr[j][i]) > 1e-12)
                throw Error("GaussianCopulaSpec: corr not symmetric");
        }
        if (std::fabs(g.corr[i][i] - 1.0) > 1e-12)
            throw Error("GaussianCopulaSpec: corr diagonal != 1");
    }
    chol_ = cholesky(a, J_);
    corr_inv_ = chol_inverse(chol_, J_);
    corr_logdet_ = 0.0;
    for (int i = 0; i < J_; ++i) corr_logdet_ += 2.0 * std::log(chol_[i * J_ + i]);

    exchangeable_ = true;
    rho_ = (J_ >= 2) ? a[1] : 0.0;
    for (int i = 0; i < J_ && exchangeable_; ++i)
        for (int j = 0; j < J_; ++j)
            if (i != j && std::fabs(a[i * J_ + j] - rho_) > 1e-12) {
                exchangeable_ = false;
                break;
            }
}

double DensitySpec::grid_clip_lo(int cell) const {
    const auto& g = std::get<CellGridSpec>(spec_);
    return static_cast<double>(cell) / g.res;
}

double DensitySpec::grid_clip_hi(int cell) const {
    const auto& g = std::get<CellGridSpec>(spec_);
    return static_cast<double>(cell + 1) / g.res;
}

std::vector<double> DensitySpec::sample(Rng& rng) const {
    std::vector<double> v(J_);
    if (is_uniform()) {
        for (int j = 0; j < J_; ++j) v[j] = rng.uniform01();
        return v;
    }
    if (is_grid()) {
        const auto& g = std::get<CellGridSpec>(spec_);
        // categorical over cells by mass, then uniform within the cell
        double total = 0.0;
        for (double x : g.values) total += x;
        double u = rng.uniform01() * total;
        size_t cell = 0;
        for (; cell + 1 < g.values.size(); ++cell) {
            if (u < g.values[cell]) break;
            u -= g.values[cell];
        }
        std::vector<int> mi(J_);
        size_t rem = cell;
        for (int d = J_ - 1; d >= 0; --d) {
            mi[d] = static_cast<int>(rem % g.res);
            rem /= g.res;
        }
        for (int d = 0; d < J_; ++d)
            v[d] = (mi[d] + rng.uniform01()) / g.res;
        return v;
    }
    // Gaussian copula
    std::vector<double> z(J_);
    for (int j = 0; j < J_; ++j) z[j] = rng.normal();
    for (int i = 0; i < J_; ++i) {
        double s = 0.0;
        for (int k = 0; k <= i; ++k) s += chol_[i * J_ + k] * z[k];
        v[i] = normal_cdf(s);
    }
    return v;
}

double DensitySpec::pdf(std::span<const double> v) const {
    if (is_uniform()) return 1.0;
    if (is_grid()) {
        const auto& g = std::get<CellGridSpec>(spec_);
        size_t idx = 0;
        for (int d = 0; d < J_; ++d) {
            int cell = static_cast<int>(v[d] * g.res);
            cell = std::clamp(cell, 0, g.res - 1);
            idx = idx * g.res + static_cast<size_t>(cell);
        }
        return g.values[idx];
    }
    double quad = 0.0;
    std::vector<double> x(J_);
    for (int j = 0; j < J_; ++j) x[j] = normal_quantile(std::clamp(v[j], 1e-300, 1.0 - 1e-16));
    for (int i = 0; i < J_; ++i)
        for (int j = 0; j < J_; ++j) {
            const double m = corr_inv_[i * J_ + j] - (i == j ? 1.0 : 0.0);
            quad += x[i] * m * x[j];
        }
    return std::exp(-0.5 * (corr_logdet_ + quad));
}

double DensitySpec::cdf(std::span<const double> v) const {
    const uint32_t full = (1u << J_) - 1u;
    return box_prob(v, full);
}

double DensitySpec::box_prob(std::span<const double> q, uint32_t mask) const {
    // Normalize the mask: coordinates at or above 1 are unconstrained, any
    // coordinate at or below 0 empties the box.
    uint32_t m = 0;
    for (int j = 0; j < J_; ++j) {
        if (!((mask >> j) & 1u)) continue;
        if (q[j] <= 0.0) return 0.0;
        if (q[j] < 1.0) m |= 1u << j;
    }
    if (m == 0) return 1.0;

    if (is_uniform()) {
        double p = 1.0;
        for (int j = 0; j < J_; ++j)
            if ((m >> j) & 1u) p *= q[j];
        return p;
    }
    if (is_grid()) {
        const auto& g = std::get<CellGridSpec>(spec_);
        const double w = 1.0 / g.res;
        double total = 0.0;
        std::vector<int> mi(J_);
        size_t ncell = g.values.size();
        for (size_t c = 0; c < ncell; ++c) {
            size_t rem = c;
            for (int d = J_ - 1; d >= 0; --d) {
                mi[d] = static_cast<int>(rem % g.res);
                rem /= g.res;
            }
            double vol = 1.0;
            for (int d = 0; d < J_ && vol > 0.0; ++d) {
                if ((m >> d) & 1u) {
                    const double hi = std::min(q[d], grid_clip_hi(mi[d]));
                    vol *= std::max(0.0, hi - grid_clip_lo(mi[d]));
                } else {
                    vol *= w;
                }
            }
            total += g.values[c] * vol;
        }
        return total;
    }
    return gauss_box_prob(q, m);
}

// Connected components of `dims` under the nonzero-correlation graph.
std::vector<std::vector<int>> DensitySpec::corr_components(const std::vector<int>& dims) const {
    const auto& g = std::get<GaussianCopulaSpec>(spec_);
    std::vector<std::vector<int>> comps;
    std::vector<bool> seen(dims.size(), false);
    for (size_t s = 0; s < dims.size(); ++s) {
        if (seen[s]) continue;
        std::vector<int> comp{dims[s]};
        seen[s] = true;
        for (size_t grow = 0; grow < comp.size(); ++grow) {
            for (size_t t = 0; t < dims.size(); ++t) {
                if (seen[t]) continue;
                if (std::fabs(g.corr[comp[grow]][dims[t]]) > 1e-12) {
                    comp.push_back(dims[t]);
                    seen[t] = true;
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

// P(V_d < q_d for d in comp) where comp is one correlation component.
double DensitySpec::gauss_component_prob(std::span<const double> q,
                                         const std::vector<int>& comp) const {
    const auto& g = std::get<GaussianCopulaSpec>(spec_);
    const int m = static_cast<int>(comp.size());
    if (m == 1) return q[comp[0]];
    std::vector<double> x(m);
    for (int i = 0; i < m; ++i) x[i] = normal_quantile(q[comp[i]]);
    if (m == 2) return bvn_cdf(x[0], x[1], g.corr[comp[0]][comp[1]]);

    // within-component exchangeability with a nonnegative common rho
    const double rho = g.corr[comp[0]][comp[1]];
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (std::fabs(g.corr[comp[i]][comp[j]] - rho) > 1e-12)
                throw UnsupportedDensity(
                    "gaussian box_prob: >2 jointly correlated dims must be exchangeable");
    if (rho < 0.0)
        throw UnsupportedDensity("gaussian box_prob: common rho must be nonnegative");
    const double sr = std::sqrt(rho), s1 = std::sqrt(1.0 - rho);
    return integrate_gl(
        [&](double t) {
            double prod = normal_pdf(t);
            for (int i = 0; i < m; ++i) prod *= normal_cdf((x[i] - sr * t) / s1);
            return prod;
        },
        -kTRange, kTRange, kGlPoints);
}

double DensitySpec::gauss_box_prob(std::span<const double> q, uint32_t mask) const {
    double p = 1.0;
    for (const auto& comp : corr_components(mask_to_dims(mask)))
        p *= gauss_component_prob(q, comp);
    return p;
}

double DensitySpec::box_prob_partial(std::span<const double> q, uint32_t mask, int j) const {
    if (!((mask >> j) & 1u)) return 0.0;
    if (q[j] <= 0.0 || q[j] >= 1.0) return 0.0;

    if (is_uniform()) {
        double p = 1.0;
        for (int d = 0; d < J_; ++d)
            if (d != j && ((mask >> d) & 1u)) p *= std::clamp(q[d], 0.0, 1.0);
        return p;
    }
    if (is_grid()) {
        const auto& g = std::get<CellGridSpec>(spec_);
        const double w = 1.0 / g.res;
        double total = 0.0;
        std::vector<int> mi(J_);
        for (size_t c = 0; c < g.values.size(); ++c) {
            size_t rem = c;
            for (int d = J_ - 1; d >= 0; --d) {
                mi[d] = static_cast<int>(rem % g.res);
                rem /= g.res;
            }
            if (q[j] < grid_clip_lo(mi[j]) || q[j] >= grid_clip_hi(mi[j])) continue;
            double vol = 1.0;
            for (int d = 0; d < J_ && vol > 0.0; ++d) {
                if (d == j) continue;
                if ((mask >> d) & 1u) {
                    const double hi = std::min(std::clamp(q[d], 0.0, 1.0), grid_clip_hi(mi[d]));
                    vol *= std::max(0.0, hi - grid_clip_lo(mi[d]));
                } else {
                    vol *= w;
                }
            }
            total += g.values[c] * vol;
        }
        return total;
    }
    // Gaussian copula: analytic for two constrained dims, central difference
    // otherwise (the CDF is smooth).
    const int nm = std::popcount(mask);
    if (nm == 1) return 1.0;
    if (nm == 2) {
        const auto& g = std::get<GaussianCopulaSpec>(spec_);
        int other = -1;
        for (int d = 0; d < J_; ++d)
            if (d != j && ((mask >> d) & 1u)) other = d;
        const double rho = g.corr[j][other];
        const double xj = normal_quantile(q[j]);
        const double xo = normal_quantile(std::clamp(q[other], 1e-15, 1.0 - 1e-15));
        if (q[other] >= 1.0) return 1.0;
        return normal_cdf((xo - rho * xj) / std::sqrt(1.0 - rho * rho));
    }
    const double h = 1e-5;
    std::vector<double> qp(q.begin(), q.end()), qm(q.begin(), q.end());
    qp[j] = std::min(q[j] + h, 1.0 - 1e-12);
    qm[j] = std::max(q[j] - h, 1e-12);
    return (box_prob(qp, mask) - box_prob(qm, mask)) / (qp[j] - qm[j]);
}

double DensitySpec::box_mean(const AffineFn& m, std::span<const double> q, uint32_t mask) const {
    uint32_t mm = 0;
    for (int j = 0; j < J_; ++j) {
        if (!((mask >> j) & 1u)) continue;
        if (q[j] <= 0.0) return 0.0;
        if (q[j] < 1.0) mm |= 1u << j;
    }

    if (is_uniform()) {
        double pbox = 1.0;
        for (int j = 0; j < J_; ++j)
            if ((mm >> j) & 1u) pbox *= q[j];
        double s = m.c0;
        for (int j = 0; j < J_; ++j)
            s += m.lin[j] * (((mm >> j) & 1u) ? q[j] / 2.0 : 0.5);
        return pbox * s;
    }
    if (is_grid()) {
        const auto& g = std::get<CellGridSpec>(spec_);
        double total = 0.0;
        std::vector<int> mi(J_);
        for (size_t c = 0; c < g.values.size(); ++c) {
            size_t rem = c;
            for (int d = J_ - 1; d >= 0; --d) {
                mi[d] = static_cast<int>(rem % g.res);
                rem /= g.res;
            }
            double vol = 1.0, lin = m.c0;
            for (int d = 0; d < J_ && vol > 0.0; ++d) {
                double lo = grid_clip_lo(mi[d]);
                double hi = grid_clip_hi(mi[d]);
                if ((mm >> d) & 1u) hi = std::min(hi, q[d]);
                if (hi <= lo) { vol = 0.0; break; }
                vol *= hi - lo;
                lin += m.lin[d] * 0.5 * (lo + hi);
            }
            total += g.values[c] * vol * lin;
        }
        return total;
    }
    double out = m.c0 * box_prob(q, mm);
    for (int j = 0; j < J_; ++j)
        if (m.lin[j] != 0.0) out += m.lin[j] * gauss_box_mean_vj(q, mm, j);
    return out;
}

double DensitySpec::gauss_box_mean_vj(std::span<const double> q, uint32_t mask, int j) const {
    const auto& g = std::get<GaussianCopulaSpec>(spec_);
    // Split mask + j into correlation components; only j's own component needs
    // the joint integral, the rest contribute plain box probabilities.
    std::vector<int> bdims = mask_to_dims(mask | (1u << j));
    double outer = 1.0;
    std::vector<int> jcomp;
    for (const auto& comp : corr_components(bdims)) {
        if (std::find(comp.begin(), comp.end(), j) != comp.end()) jcomp = comp;
        else outer *= gauss_component_prob(q, comp);
    }

    const int m = static_cast<int>(jcomp.size());
    const bool j_con = (mask >> j) & 1u;

    if (m == 1) return outer * (j_con ? q[j] * q[j] / 2.0 : 0.5);
    if (m == 2) {
        const int other = jcomp[0] == j ? jcomp[1] : jcomp[0];
        const double rho = g.corr[j][other];
        const double s1 = std::sqrt(1.0 - rho * rho);
        double inner;
        if (j_con) {
            const bool other_con = (mask >> other) & 1u;
            const double xo = other_con ? normal_quantile(q[other]) : 0.0;
            inner = integrate_gl(
                [&](double v) {
                    if (!other_con) return v;
                    const double xv = normal_quantile(v);
                    return v * normal_cdf((xo - rho * xv) / s1);
                },
                0.0, q[j], kGlPoints);
        } else {
            // j unconstrained, other constrained: E[V_j 1{V_other < q_other}]
            const double denom = std::sqrt(2.0 - rho * rho);
            inner = integrate_gl(
                [&](double v) {
                    const double xv = normal_quantile(v);
                    return normal_cdf(rho * xv / denom);
                },
                0.0, q[other], kGlPoints);
        }
        return outer * inner;
    }

    // m >= 3: exchangeable nonnegative rho within the component
    const double rho = g.corr[jcomp[0]][jcomp[1]];
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b)
            if (std::fabs(g.corr[jcomp[a]][jcomp[b]] - rho) > 1e-12)
                throw UnsupportedDensity(
                    "gaussian box_mean: >2 jointly correlated dims must be exchangeable");
    if (rho < 0.0)
        throw UnsupportedDensity("gaussian box_mean: common rho must be nonnegative");

    const double sr = std::sqrt(rho), sg = std::sqrt(1.0 - rho);
    const double si = sg / std::sqrt(1.0 + sg * sg);
    const double xj = j_con ? normal_quantile(q[j]) : 0.0;
    std::vector<double> xo;
    for (int d : jcomp)
        if (d != j) xo.push_back(normal_quantile(q[d]));

    const double inner = integrate_gl(
        [&](double t) {
            const double mu = sr * t;
            double prod = normal_pdf(t);
            for (double x : xo) prod *= normal_cdf((x - mu) / sg);
            const double a = mu / std::sqrt(1.0 + sg * sg);
            double hj;
            if (j_con) {
                const double smax = (xj - mu) / sg;
                hj = bvn_cdf(a, smax, -si);
            } else {
                hj = normal_cdf(a);
            }
            return prod * hj;
        },
        -kTRange, kTRange, kGlPoints);
    return outer * inner;
}

void validate_density(const DensitySpec& d) {
    if (d.is_grid()) {
        const uint32_t full = (1u << d.J()) - 1u;
        std::vector<double> top(d.J(), 1.0 - 1e-12);
        const double total = d.box_prob(top, full);
        if (std::fabs(total - 1.0) > 1e-5)
            throw Error("grid density does not integrate to 1 (got " + std::to_string(total) +
                        ")");
    }
    // Gaussian PD-ness and grid positivity are enforced at construction.
}

}  // namespace hrmt
