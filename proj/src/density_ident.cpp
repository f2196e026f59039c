#include "hrmt/density_ident.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "hrmt/stats.hpp"

namespace hrmt {

GridDensity identify_density_fullrank(const MomentProvider& mp, int k, const Term& term,
                                      int res, const FdConfig& fd) {
    const int J = mp.dim();
    if (term_rank(term) != J)
        throw NotFullRank("identify_density_fullrank: term rank " +
                          std::to_string(term_rank(term)) + " < J = " + std::to_string(J));
    if (term.coeff == 0) throw Error("identify_density_fullrank: zero coefficient");

    const uint32_t full = (1u << J) - 1u;
    auto prob = [&](std::span<const double> q) { return mp.cond_prob(k, q); };

    GridDensity gd;
    gd.lat = LatticeNd::zeros(J, res);
    std::vector<double> v(J);
    for_each_node(J, res, [&](std::span<const int> mi, size_t flat) {
        for (int d = 0; d < J; ++d) v[d] = gd.lat.node(mi[d]);
        gd.lat.values[flat] = mixed_partial(prob, v, full, fd) / term.coeff;
    });
    gd.clip_negative();
    gd.normalize();
    return gd;
}

MarginalDensity marginal_identification(const MomentProvider& mp, const Decomposition& dk,
                                        int k, const Term& term, int res, const FdConfig& fd,
                                        double invariance_tol) {
    const int J = mp.dim();
    const auto leads = leading_terms(dk);
    const bool is_leading = std::any_of(leads.begin(), leads.end(), [&](const Term& t) {
        return t.dims == term.dims && t.coeff == term.coeff;
    });
    if (!is_leading)
        throw NotLeadingTerm("marginal_identification: term is not a leading term of k=" +
                             std::to_string(k));

    const std::vector<int> dims = mask_to_dims(term.dims);
    const int m = static_cast<int>(dims.size());
    auto prob = [&](std::span<const double> q) { return mp.cond_prob(k, q); };

    MarginalDensity md;
    md.dims = term.dims;
    md.g.lat = LatticeNd::zeros(m, res);

    auto value_at = [&](std::span<const int> mi, double off_value) {
        std::vector<double> q(J, off_value);
        for (int i = 0; i < m; ++i) q[dims[i]] = md.g.lat.node(mi[i]);
        return mixed_partial(prob, q, term.dims, fd) / term.coeff;
    };

    for_each_node(m, res, [&](std::span<const int> mi, size_t flat) {
        md.g.lat.values[flat] = value_at(mi, 0.35);
    });

    // Leading terms make the derivative invariant to the pinned coordinates;
    // probe a second pin on a few nodes as a consistency assertion.
    if (m < J) {
        const int probes = static_cast<int>(std::min<size_t>(3, md.g.lat.size()));
        std::vector<int> mi(m);
        for (int p = 0; p < probes; ++p) {
            const size_t flat = (md.g.lat.size() * (2 * p + 1)) / (2 * probes);
            md.g.lat.multi_index(flat, mi);
            const double alt = value_at(mi, 0.65);
            if (std::fabs(alt - md.g.lat.values[flat]) > invariance_tol)
                throw NotLeadingTerm(
                    "marginal_identification: derivative varies with pinned coordinates "
                    "(term is not leading, or moments are inconsistent)");
        }
    }

    md.g.clip_negative();
    md.g.normalize();
    return md;
}

std::vector<std::pair<int, Term>> prune_implied_marginals(
    std::vector<std::pair<int, Term>> items) {
    std::vector<std::pair<int, Term>> out;
    for (size_t i = 0; i < items.size(); ++i) {
        const uint32_t di = items[i].second.dims;
        bool drop = false;
        for (size_t j = 0; j < items.size() && !drop; ++j) {
            if (i == j) continue;
            const uint32_t dj = items[j].second.dims;
            if (di != dj && (di & dj) == di) drop = true;  // strict subset
            if (di == dj && j < i) drop = true;            // duplicate dims
        }
        if (!drop) out.push_back(items[i]);
    }
    return out;
}

const char* to_string(CopulaFamily f) {
    switch (f) {
        case CopulaFamily::Gaussian: return "gaussian";
        case CopulaFamily::Frank: return "frank";
        case CopulaFamily::Gumbel: return "gumbel";
    }
    return "?";
}

std::pair<double, double> copula_param_range(CopulaFamily family, int arity) {
    switch (family) {
        case CopulaFamily::Gaussian:
            return {-1.0 / (arity - 1) + 1e-6, 1.0 - 1e-6};
        case CopulaFamily::Frank:
            if (arity != 2) throw Error("frank copula implemented for arity 2");
            return {-35.0, 35.0};
        case CopulaFamily::Gumbel:
            if (arity != 2) throw Error("gumbel copula implemented for arity 2");
            return {1.0, 20.0};
    }
    throw Error("unknown copula family");
}

double copula_log_density(CopulaFamily family, double param, std::span<const double> u) {
    const int P = static_cast<int>(u.size());
    switch (family) {
        case CopulaFamily::Gaussian: {
            const double rho = param;
            if (P < 2) return 0.0;
            double sx = 0.0, sx2 = 0.0;
            const double logdet =
                (P - 1) * std::log1p(-rho) + std::log1p((P - 1) * rho);
            std::vector<double> x(P);
            for (int p = 0; p < P; ++p) {
                x[p] = normal_quantile(std::clamp(u[p], 1e-15, 1.0 - 1e-15));
                sx += x[p];
                sx2 += x[p] * x[p];
            }
            const double quad =
                (sx2 - rho / (1.0 + (P - 1) * rho) * sx * sx) / (1.0 - rho);
            return -0.5 * (logdet + quad - sx2);
        }
        case CopulaFamily::Frank: {
            const double t = param;
            if (std::fabs(t) < 1e-8) return 0.0;  // independence limit
            const double eu = std::exp(-t * u[0]), ev = std::exp(-t * u[1]);
            const double e1 = -std::expm1(-t);  // 1 - e^{-t}
            const double denom = e1 - (1.0 - eu) * (1.0 - ev);
            return std::log(std::fabs(t)) + std::log(std::fabs(e1)) - t * (u[0] + u[1]) -
                   2.0 * std::log(std::fabs(denom));
        }
        case CopulaFamily::Gumbel: {
            const double th = param;
            const double x = -std::log(std::clamp(u[0], 1e-300, 1.0 - 1e-16));
            const double y = -std::log(std::clamp(u[1], 1e-300, 1.0 - 1e-16));
            const double S = std::pow(x, th) + std::pow(y, th);
            const double A = std::pow(S, 1.0 / th);
            // c = exp(-A) (xy)^{th-1} / (uv) * A^{2-2th} * (1 + (th-1)/A)
            return -A + (th - 1.0) * (std::log(x) + std::log(y)) - std::log(u[0]) -
                   std::log(u[1]) + (2.0 - 2.0 * th) * std::log(A) +
                   std::log1p((th - 1.0) / A);
        }
    }
    throw Error("unknown copula family");
}

namespace {

// Per-marginal evaluation machinery: exact piecewise-constant CDF plus the
// conditional samplers used by the sequential scheme.
struct MarginalCtx {
    const MarginalDensity* md;
    std::vector<int> dims;  // ascending 0-based parent dims
    CumulativeLattice cdf;

    explicit MarginalCtx(const MarginalDensity& m)
        : md(&m), dims(mask_to_dims(m.dims)), cdf(m.g.lat) {}

    double cdf_at(std::span<const double> v_parent) const {
        std::vector<double> x(dims.size());
        for (size_t i = 0; i < dims.size(); ++i) x[i] = v_parent[dims[i]];
        return cdf.cdf(x) / cdf.total();
    }

    double pdf_at(std::span<const double> v_parent) const {
        std::vector<double> x(dims.size());
        for (size_t i = 0; i < dims.size(); ++i) x[i] = v_parent[dims[i]];
        return md->g.lat.interp(x);
    }
};

// Node weights of `axis` after pinning `fixed` axes (interpolated) and
// marginalizing the remaining free axes of the lattice.
std::vector<double> conditional_node_weights(const LatticeNd& lat,
                                             const std::map<int, double>& fixed, int axis) {
    const int nd = lat.ndims;
    std::vector<int> free_axes;
    for (int a = 0; a < nd; ++a)
        if (a != axis && !fixed.count(a)) free_axes.push_back(a);

    std::vector<double> w(lat.res, 0.0);
    std::vector<double> x(nd);
    for (const auto& [a, val] : fixed) x[a] = val;

    const int nfree = static_cast<int>(free_axes.size());
    std::vector<int> mi(nfree, 0);
    for (int t = 0; t < lat.res; ++t) {
        x[axis] = lat.node(t);
        double acc = 0.0;
        std::fill(mi.begin(), mi.end(), 0);
        while (true) {
            double cellw = 1.0;
            for (int f = 0; f < nfree; ++f) {
                x[free_axes[f]] = lat.node(mi[f]);
                cellw *= lat.node_weight(mi[f]);
            }
            acc += cellw * lat.interp(x);
            int f = nfree - 1;
            while (f >= 0 && ++mi[f] == lat.res) mi[f--] = 0;
            if (f < 0) break;
        }
        w[t] = std::max(acc, 0.0);
    }
    return w;
}

// Draw one coordinate from piecewise-constant node weights.
double sample_from_weights(const LatticeNd& lat, const std::vector<double>& w, Rng& rng) {
    double total = 0.0;
    for (int i = 0; i < lat.res; ++i) total += w[i] * lat.node_weight(i);
    if (total <= 0.0) return rng.uniform01();  // degenerate slice
    double u = rng.uniform01() * total;
    for (int i = 0; i < lat.res; ++i) {
        const double mass = w[i] * lat.node_weight(i);
        if (u < mass || i == lat.res - 1)
            return lat.cell_left(i) +
                   (lat.cell_right(i) - lat.cell_left(i)) *
                       std::clamp(u / std::max(mass, 1e-300), 0.0, 1.0);
        u -= mass;
    }
    return 0.5;
}

// The Step-4 scheme: seed at the widest marginal, then repeatedly draw the
// remaining coordinates of marginals, conditioning on shared dimensions.
std::vector<double> sequential_sample(int J, const std::vector<MarginalCtx>& ctxs, Rng& rng) {
    std::vector<double> v(J, -1.0);
    uint32_t assigned = 0;
    const uint32_t all = (1u << J) - 1u;

    size_t seed_idx = 0;
    for (size_t i = 1; i < ctxs.size(); ++i) {
        const auto rank = [&](size_t t) {
            return std::make_pair(-static_cast<int>(ctxs[t].dims.size()), ctxs[t].md->dims);
        };
        if (rank(i) < rank(seed_idx)) seed_idx = i;
    }

    auto draw_from = [&](const MarginalCtx& c) {
        std::map<int, double> fixed;  // lattice axis -> value
        for (size_t i = 0; i < c.dims.size(); ++i)
            if ((assigned >> c.dims[i]) & 1u) fixed[static_cast<int>(i)] = v[c.dims[i]];
        for (size_t i = 0; i < c.dims.size(); ++i) {
            const int pd = c.dims[i];
            if ((assigned >> pd) & 1u) continue;
            const auto w = conditional_node_weights(c.md->g.lat, fixed, static_cast<int>(i));
            v[pd] = sample_from_weights(c.md->g.lat, w, rng);
            fixed[static_cast<int>(i)] = v[pd];
            assigned |= 1u << pd;
        }
    };

    draw_from(ctxs[seed_idx]);
    while (assigned != all) {
        int pick = -1;
        bool pick_overlaps = false;
        for (size_t i = 0; i < ctxs.size(); ++i) {
            if ((ctxs[i].md->dims & ~assigned) == 0) continue;  // fully sampled
            const bool overlaps = (ctxs[i].md->dims & assigned) != 0;
            if (pick < 0 || (overlaps && !pick_overlaps)) {
                pick = static_cast<int>(i);
                pick_overlaps = overlaps;
            }
        }
        if (pick < 0)
            throw NonOverlappingMarginals("sequential sampler cannot reach all dimensions");
        draw_from(ctxs[pick]);
    }
    return v;
}

// Max L1 distance between 1-D marginals implied by different inputs on a
// shared dimension.
double compute_overlap_discrepancy(const std::vector<MarginalCtx>& ctxs) {
    double worst = 0.0;
    for (size_t a = 0; a < ctxs.size(); ++a) {
        for (size_t b = a + 1; b < ctxs.size(); ++b) {
            const uint32_t shared = ctxs[a].md->dims & ctxs[b].md->dims;
            if (!shared) continue;
            for (int pd : mask_to_dims(shared)) {
                auto marg1d = [&](const MarginalCtx& c) {
                    int axis = 0;
                    for (size_t i = 0; i < c.dims.size(); ++i)
                        if (c.dims[i] == pd) axis = static_cast<int>(i);
                    return conditional_node_weights(c.md->g.lat, {}, axis);
                };
                const auto wa = marg1d(ctxs[a]);
                const auto wb = marg1d(ctxs[b]);
                double l1 = 0.0;
                const int res = std::min(ctxs[a].md->g.lat.res, ctxs[b].md->g.lat.res);
                for (int i = 0; i < res; ++i)
                    l1 += std::fabs(wa[i] - wb[i]) * ctxs[a].md->g.lat.node_weight(i);
                worst = std::max(worst, l1);
            }
        }
    }
    return worst;
}

}  // namespace

double copula_joint_density(const CopulaModel& model,
                            const std::vector<MarginalDensity>& marginals,
                            const std::vector<CumulativeLattice>& cdfs,
                            std::span<const double> v) {
    std::vector<double> u(marginals.size());
    double prod = 1.0;
    for (size_t p = 0; p < marginals.size(); ++p) {
        const auto dims = mask_to_dims(marginals[p].dims);
        std::vector<double> x(dims.size());
        for (size_t i = 0; i < dims.size(); ++i) x[i] = v[dims[i]];
        u[p] = std::clamp(cdfs[p].cdf(x) / cdfs[p].total(), 1e-12, 1.0 - 1e-12);
        prod *= std::max(marginals[p].g.lat.interp(x), 0.0);
    }
    return std::exp(model.log_density(u)) * prod;
}

CopulaFitResult fit_copula(int J, const std::vector<MarginalDensity>& marginals,
                           CopulaFamily family, const CopulaFitOptions& opts) {
    if (marginals.empty()) throw Error("fit_copula: no marginals");
    uint32_t unions = 0;
    for (const auto& m : marginals) unions |= m.dims;
    if (unions != (1u << J) - 1u)
        throw NonOverlappingMarginals("fit_copula: marginals do not cover all dimensions");

    std::vector<MarginalCtx> ctxs;
    ctxs.reserve(marginals.size());
    for (const auto& m : marginals) ctxs.emplace_back(m);

    // Step 4: the sample of V.
    std::vector<std::vector<double>> sample;
    if (!opts.provided_sample.empty()) {
        sample = opts.provided_sample;
        if (static_cast<int>(sample.size()) > opts.G)
            sample.resize(static_cast<size_t>(opts.G));
    } else {
        Rng rng(derive_seed(opts.seed, "copula-step4"));
        sample.reserve(opts.G);
        for (int g = 0; g < opts.G; ++g) sample.push_back(sequential_sample(J, ctxs, rng));
    }

    // Pseudo-observations u_g, fixed across the parameter search.
    const size_t G = sample.size();
    const int P = static_cast<int>(marginals.size());
    std::vector<double> us(G * static_cast<size_t>(P));
    double log_marg = 0.0;
    for (size_t g = 0; g < G; ++g) {
        for (int p = 0; p < P; ++p) {
            us[g * P + p] = std::clamp(ctxs[p].cdf_at(sample[g]), 1e-12, 1.0 - 1e-12);
            log_marg += std::log(std::max(ctxs[p].pdf_at(sample[g]), 1e-300));
        }
    }

    auto loglik = [&](double beta) {
        double s = 0.0;
        for (size_t g = 0; g < G; ++g)
            s += copula_log_density(family, beta,
                                    std::span<const double>(us.data() + g * P, P));
        return s;
    };

    // Step 5: bounded scalar maximization with randomized restarts.
    const auto [lo, hi] = copula_param_range(family, P);
    Rng rrng(derive_seed(opts.seed, "copula-mle"));
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double best_beta = lo, best_val = -1e300;
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        double a = lo, b = hi;
        if (r > 0) {
            const double m1 = rrng.uniform(lo, hi), m2 = rrng.uniform(lo, hi);
            a = std::min(m1, m2);
            b = std::max(m1, m2);
            if (b - a < 1e-3 * (hi - lo)) { a = lo; b = hi; }
        }
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = loglik(c), fd = loglik(d);
        for (int it = 0; it < 200 && (b - a) > 1e-10 * (hi - lo); ++it) {
            if (fc > fd) {
                b = d; d = c; fd = fc;
                c = b - gr * (b - a);
                fc = loglik(c);
            } else {
                a = c; c = d; fc = fd;
                d = a + gr * (b - a);
                fd = loglik(d);
            }
        }
        const double beta = 0.5 * (a + b), val = loglik(beta);
        if (val > best_val) { best_val = val; best_beta = beta; }
    }
    if (!std::isfinite(best_val))
        throw MleDiverged("fit_copula: likelihood not finite over the parameter range");
    if (family == CopulaFamily::Gaussian && best_beta > 1.0 - 1e-4)
        throw MleDiverged("fit_copula: correlation pinned at the degenerate boundary");

    CopulaFitResult res;
    res.model = CopulaModel{family, best_beta, P};
    res.loglik = best_val + log_marg;
    res.G = static_cast<int>(G);
    res.overlap_discrepancy = compute_overlap_discrepancy(ctxs);

    std::vector<CumulativeLattice> cdfs;
    cdfs.reserve(P);
    for (const auto& m : marginals) cdfs.emplace_back(m.g.lat);
    res.joint.lat = LatticeNd::zeros(J, opts.joint_res);
    std::vector<double> v(J);
    for_each_node(J, opts.joint_res, [&](std::span<const int> mi, size_t flat) {
        for (int d = 0; d < J; ++d) v[d] = res.joint.lat.node(mi[d]);
        res.joint.lat.values[flat] = copula_joint_density(res.model, marginals, cdfs, v);
    });
    res.joint.clip_negative();
    res.joint.normalize();
    return res;
}

}  // namespace hrmt
