#include "hrmt/mtr_ident.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "hrmt/stats.hpp"

namespace hrmt {

JointDensity JointDensity::from_spec(const DensitySpec& d, int res) {
    JointDensity j;
    j.lat = LatticeNd::zeros(d.J(), res);
    std::vector<double> v(d.J());
    for_each_node(d.J(), res, [&](std::span<const int> mi, size_t flat) {
        for (int t = 0; t < d.J(); ++t) v[t] = j.lat.node(mi[t]);
        j.lat.values[flat] = d.pdf(v);
    });
    return j;
}

JointDensity JointDensity::from_grid(const GridDensity& g) { return {g.lat}; }

double JointDensity::marginal_pdf(uint32_t mask, std::span<const double> sub) const {
    const std::vector<int> dims = mask_to_dims(mask);
    std::vector<int> rest;
    for (int d = 0; d < lat.ndims; ++d)
        if (!((mask >> d) & 1u)) rest.push_back(d);

    std::vector<double> v(lat.ndims);
    for (size_t i = 0; i < dims.size(); ++i) v[dims[i]] = sub[i];

    double acc = 0.0;
    const int nrest = static_cast<int>(rest.size());
    std::vector<int> mi(nrest, 0);
    while (true) {
        double w = 1.0;
        for (int r = 0; r < nrest; ++r) {
            v[rest[r]] = lat.node(mi[r]);
            w *= lat.node_weight(mi[r]);
        }
        acc += w * lat.interp(v);
        int r = nrest - 1;
        while (r >= 0 && ++mi[r] == lat.res) mi[r--] = 0;
        if (r < 0) break;
        if (nrest == 0) break;
    }
    return nrest == 0 ? lat.interp(v) : acc;
}

LatticeNd identify_mtr_fullrank(const MomentProvider& mp, const PdfFn& fv_pdf, int k,
                                const Term& term, int res, const FdConfig& fd) {
    const int J = mp.dim();
    if (term_rank(term) != J)
        throw NotFullRank("identify_mtr_fullrank: term rank below J");
    const uint32_t full = (1u << J) - 1u;
    auto outcome = [&](std::span<const double> q) { return mp.cond_outcome_moment(k, q); };

    LatticeNd lat = LatticeNd::zeros(J, res);
    std::vector<double> v(J);
    for_each_node(J, res, [&](std::span<const int> mi, size_t flat) {
        for (int d = 0; d < J; ++d) v[d] = lat.node(mi[d]);
        const double f = fv_pdf(v);
        if (!(f > 1e-12)) throw DensityZero("identify_mtr_fullrank: density vanishes on grid");
        lat.values[flat] = mixed_partial(outcome, v, full, fd) / (term.coeff * f);
    });
    return lat;
}

ConditionalMtr conditional_mtr(const MomentProvider& mp, const Decomposition& dk,
                               const PdfFn& marginal_pdf, int k, const Term& term, int res,
                               const FdConfig& fd) {
    const int J = mp.dim();
    const auto leads = leading_terms(dk);
    const bool is_leading = std::any_of(leads.begin(), leads.end(), [&](const Term& t) {
        return t.dims == term.dims && t.coeff == term.coeff;
    });
    if (!is_leading) throw NotLeadingTerm("conditional_mtr: term is not leading");

    const std::vector<int> dims = mask_to_dims(term.dims);
    const int m = static_cast<int>(dims.size());
    auto outcome = [&](std::span<const double> q) { return mp.cond_outcome_moment(k, q); };

    ConditionalMtr out;
    out.k = k;
    out.dims = term.dims;
    out.lat = LatticeNd::zeros(m, res);
    std::vector<double> q(J, 0.35), sub(m);
    for_each_node(m, res, [&](std::span<const int> mi, size_t flat) {
        for (int i = 0; i < m; ++i) {
            sub[i] = out.lat.node(mi[i]);
            q[dims[i]] = sub[i];
        }
        const double f = marginal_pdf(sub);
        if (!(f > 1e-12)) throw DensityZero("conditional_mtr: marginal density vanishes");
        out.lat.values[flat] = mixed_partial(outcome, q, term.dims, fd) / (term.coeff * f);
    });
    return out;
}

std::vector<LeadingInfo> build_leading_catalog(const MomentProvider& mp,
                                               const std::vector<Decomposition>& decomps,
                                               const JointDensity& joint, int res,
                                               const FdConfig& fd) {
    std::vector<LeadingInfo> out;
    for (size_t i = 0; i < decomps.size(); ++i) {
        const int k = static_cast<int>(i) + 1;
        for (const Term& t : leading_terms(decomps[i])) {
            auto marginal = [&](std::span<const double> sub) {
                return joint.marginal_pdf(t.dims, sub);
            };
            out.push_back({k, t, conditional_mtr(mp, decomps[i], marginal, k, t, res, fd)});
        }
    }
    return out;
}

int ConstraintSystem::block_of(int k) const {
    for (size_t i = 0; i < K.size(); ++i)
        if (K[i] == k) return static_cast<int>(i);
    return -1;
}

namespace {

// Integral of each basis function against the conditional density
// f_{I- | I+}( . | u): quadrature over the joint lattice nodes of I-.
std::vector<double> basis_conditional_integrals(const BernsteinBasis& basis,
                                                const JointDensity& joint, uint32_t mask,
                                                std::span<const double> u) {
    const int J = basis.J;
    const std::vector<int> dims = mask_to_dims(mask);
    std::vector<int> rest;
    for (int d = 0; d < J; ++d)
        if (!((mask >> d) & 1u)) rest.push_back(d);

    std::vector<double> v(J);
    for (size_t i = 0; i < dims.size(); ++i) v[dims[i]] = u[i];

    std::vector<double> acc(basis.size(), 0.0);
    double norm = 0.0;
    const int nrest = static_cast<int>(rest.size());
    std::vector<int> mi(nrest, 0);
    while (true) {
        double w = 1.0;
        for (int r = 0; r < nrest; ++r) {
            v[rest[r]] = joint.lat.node(mi[r]);
            w *= joint.lat.node_weight(mi[r]);
        }
        const double f = w * std::max(joint.pdf(v), 0.0);
        if (f > 0.0) {
            norm += f;
            for (int t = 0; t < basis.size(); ++t) acc[t] += f * basis.eval(t, v);
        }
        if (nrest == 0) break;
        int r = nrest - 1;
        while (r >= 0 && ++mi[r] == joint.lat.res) mi[r--] = 0;
        if (r < 0) break;
    }
    if (nrest == 0) {
        for (int t = 0; t < basis.size(); ++t) acc[t] = basis.eval(t, v);
        return acc;
    }
    if (!(norm > 1e-12))
        throw DensityZero("constraint assembly: conditional density has no mass");
    for (double& a : acc) a /= norm;
    return acc;
}

std::vector<double> halton_node(uint64_t idx, int dim, uint64_t skip) {
    return halton_point(idx + skip, dim);
}

}  // namespace

ConstraintSystem build_constraints(const std::vector<int>& K,
                                   const std::vector<LeadingInfo>& catalog,
                                   const JointDensity& joint, const BernsteinBasis& basis,
                                   double ybar, const ConstraintConfig& cfg) {
    ConstraintSystem sys;
    sys.K = K;
    std::sort(sys.K.begin(), sys.K.end());
    sys.basis = basis;
    sys.ybar = ybar;
    sys.slack_eq = cfg.slack_eq;
    sys.slack_in = cfg.slack_in;

    const int Tk = basis.size();
    const int nv = sys.nvars();
    const int n = cfg.nodes_per_family;

    auto block_coeffs = [&](int k, const std::vector<double>& vals, double sign) {
        std::vector<double> c(nv, 0.0);
        const int b = sys.block_of(k);
        for (int t = 0; t < Tk; ++t) c[b * Tk + t] = sign * vals[t];
        return c;
    };

    // Node sets are shared across all rows conditioning on the same dims, and
    // confined to the hull of the conditional-MTR lattices (outside it the
    // lattice extends by a constant and no longer represents the data).  The
    // sharing makes row-wise implications between same-dims rows exact, which
    // the pruning step relies on.
    std::map<uint32_t, std::vector<std::vector<double>>> dim_nodes;
    std::map<uint32_t, std::vector<std::vector<double>>> dim_integrals;
    {
        uint64_t family = 0;
        for (const LeadingInfo& e : catalog) {
            if (dim_nodes.count(e.term.dims)) continue;
            const int m = static_cast<int>(mask_to_dims(e.term.dims).size());
            const double lo = e.cmtr.lat.node(0);
            const double hi = e.cmtr.lat.node(e.cmtr.lat.res - 1);
            auto& nodes = dim_nodes[e.term.dims];
            auto& ints = dim_integrals[e.term.dims];
            for (int i = 0; i < n; ++i) {
                auto u = halton_node(family * n + i, m, cfg.halton_skip);
                for (double& x : u) x = lo + x * (hi - lo);
                ints.push_back(basis_conditional_integrals(basis, joint, e.term.dims, u));
                nodes.push_back(std::move(u));
            }
            ++family;
        }
    }

    // equality rows: retained leading terms of members of K
    for (const LeadingInfo& e : catalog) {
        if (sys.block_of(e.k) < 0) continue;
        const auto& nodes = dim_nodes[e.term.dims];
        const auto& ints = dim_integrals[e.term.dims];
        for (int i = 0; i < n; ++i) {
            ConstraintRow row;
            row.kind = ConstraintRow::Kind::Equality;
            row.coeffs = block_coeffs(e.k, ints[i], 1.0);
            row.rhs = e.cmtr.lat.interp(nodes[i]);
            row.k = e.k;
            row.other_k = e.k;
            row.dims = e.term.dims;
            row.node = nodes[i];
            sys.rows.push_back(std::move(row));
        }
    }

    // inequality rows: every catalog term against every other member of K
    for (const LeadingInfo& e : catalog) {
        for (int k : sys.K) {
            if (k == e.k) continue;
            const auto& nodes = dim_nodes[e.term.dims];
            const auto& ints = dim_integrals[e.term.dims];
            // e.k < k: cmtr_e(u) <= int m_k f(.|u); flipped when reversed
            bool lower_bound = e.k < k;
            if (cfg.reverse_ranking) lower_bound = !lower_bound;
            for (int i = 0; i < n; ++i) {
                const double cm = e.cmtr.lat.interp(nodes[i]);
                ConstraintRow row;
                row.kind = ConstraintRow::Kind::Inequality;
                if (lower_bound) {
                    row.coeffs = block_coeffs(k, ints[i], -1.0);
                    row.rhs = -cm + cfg.slack_in;
                } else {
                    row.coeffs = block_coeffs(k, ints[i], 1.0);
                    row.rhs = cm + cfg.slack_in;
                }
                row.k = k;
                row.other_k = e.k;
                row.dims = e.term.dims;
                row.node = nodes[i];
                sys.rows.push_back(std::move(row));
            }
        }
    }

    // ranking rows inside K: pointwise at low-discrepancy points of the cube,
    // plus their conditional integrals at every shared node set (the latter
    // are implied by the former in the continuum and make same-node pruning
    // implications exact at the sieve level).
    uint64_t rank_family = 1000;
    for (size_t a = 0; a < sys.K.size(); ++a) {
        for (size_t b = a + 1; b < sys.K.size(); ++b) {
            const int klo = sys.K[a], khi = sys.K[b];
            const double slo = cfg.reverse_ranking ? -1.0 : 1.0;
            const int blo = sys.block_of(klo), bhi = sys.block_of(khi);
            for (int i = 0; i < n; ++i) {
                const auto v = halton_node(rank_family * n + i, basis.J, cfg.halton_skip);
                std::vector<double> bv(Tk);
                for (int t = 0; t < Tk; ++t) bv[t] = basis.eval(t, v);
                ConstraintRow row;
                row.kind = ConstraintRow::Kind::Ranking;
                row.coeffs.assign(nv, 0.0);
                for (int t = 0; t < Tk; ++t) {
                    row.coeffs[blo * Tk + t] = slo * bv[t];
                    row.coeffs[bhi * Tk + t] = -slo * bv[t];
                }
                row.rhs = 0.0;  // ranking is structural
                row.k = klo;
                row.other_k = khi;
                row.node = v;
                sys.rows.push_back(std::move(row));
            }
            ++rank_family;
            for (const auto& [dims, ints] : dim_integrals) {
                const auto& nodes = dim_nodes[dims];
                for (int i = 0; i < n; ++i) {
                    ConstraintRow row;
                    row.kind = ConstraintRow::Kind::Ranking;
                    row.coeffs.assign(nv, 0.0);
                    for (int t = 0; t < Tk; ++t) {
                        row.coeffs[blo * Tk + t] = slo * ints[i][t];
                        row.coeffs[bhi * Tk + t] = -slo * ints[i][t];
                    }
                    row.rhs = 0.0;  // ranking is structural
                    row.k = klo;
                    row.other_k = khi;
                    row.dims = dims;
                    row.node = nodes[i];
                    sys.rows.push_back(std::move(row));
                }
            }
        }
    }

    // box rows per member of K
    uint64_t box_family = 2000;
    for (int k : sys.K) {
        ++box_family;
        for (int i = 0; i < n; ++i) {
            const auto v = halton_node(box_family * n + i, basis.J, cfg.halton_skip);
            std::vector<double> bv(Tk);
            for (int t = 0; t < Tk; ++t) bv[t] = basis.eval(t, v);
            ConstraintRow up;
            up.kind = ConstraintRow::Kind::BoxUpper;
            up.coeffs = block_coeffs(k, bv, 1.0);
            up.rhs = ybar;
            up.k = k;
            up.node = v;
            sys.rows.push_back(up);
            ConstraintRow lo;
            lo.kind = ConstraintRow::Kind::BoxLower;
            lo.coeffs = block_coeffs(k, bv, -1.0);
            lo.rhs = 0.0;
            lo.k = k;
            lo.node = v;
            sys.rows.push_back(std::move(lo));
        }
    }
    return sys;
}

ConstraintSystem prune_redundant(const ConstraintSystem& sys,
                                 const std::map<int, std::vector<Term>>& leading,
                                 PruneStats* stats) {
    PruneStats st;
    auto has_superset = [&](int k, uint32_t dims) {
        const auto it = leading.find(k);
        if (it == leading.end()) return false;
        for (const Term& t : it->second)
            if ((dims & t.dims) == dims) return true;  // dims subseteq t.dims
        return false;
    };

    ConstraintSystem out = sys;
    out.rows.clear();
    for (const ConstraintRow& row : sys.rows) {
        if (row.kind != ConstraintRow::Kind::Inequality) {
            out.rows.push_back(row);
            continue;
        }
        const int k = row.k;          // variable side, in K
        const int kd = row.other_k;   // data side
        bool drop = false;

        // (i) k owns a leading term including the data-side dims
        if (has_superset(k, row.dims)) {
            drop = true;
            ++st.own_superset;
        }

        // (ii) chained elimination through a strictly intermediate treatment
        if (!drop) {
            const int lo = std::min(k, kd), hi = std::max(k, kd);
            for (int mid = lo + 1; mid < hi && !drop; ++mid) {
                if (has_superset(mid, row.dims)) {
                    drop = true;
                    ++st.chained;
                }
            }
        }

        // (iii) joint case
        if (!drop && out.K.size() >= 2) {
            if (out.block_of(kd) >= 0) {
                drop = true;  // both sides carry theta blocks
                ++st.within_K;
            } else {
                int up = 0, down = 0;
                for (int kk : out.K) {
                    if (kk > kd && (up == 0 || kk < up)) up = kk;
                    if (kk < kd && kk > down) down = kk;
                }
                const bool adjacent = (up != 0 && k == up) || (down != 0 && k == down);
                if (!adjacent) {
                    drop = true;
                    ++st.non_adjacent;
                }
            }
        }

        // (iv) equality rows exist only for members of K, whose leading terms
        // are never removed above; nothing further to discard.

        if (!drop) out.rows.push_back(row);
    }
    if (stats) *stats = st;
    return out;
}

LpSolver expand_lp(const ConstraintSystem& sys) {
    LpSolver lp(sys.nvars());
    std::vector<double> neg;
    for (const ConstraintRow& row : sys.rows) {
        if (row.kind == ConstraintRow::Kind::Equality) {
            lp.add_row(row.coeffs, row.rhs + sys.slack_eq);
            neg.assign(row.coeffs.begin(), row.coeffs.end());
            for (double& c : neg) c = -c;
            lp.add_row(neg, -(row.rhs - sys.slack_eq));
        } else {
            lp.add_row(row.coeffs, row.rhs);
        }
    }
    return lp;
}

IdentifiedInterval bound_functional(const ConstraintSystem& sys, std::span<const double> w) {
    if (static_cast<int>(w.size()) != sys.nvars())
        throw Error("bound_functional: weight size mismatch");
    const LpSolver lp = expand_lp(sys);

    IdentifiedInterval out;
    const LpResult lo = lp.minimize(w);
    if (lo.status == LpStatus::Infeasible) {
        out.feasible = false;
        out.status_lower = out.status_upper = "infeasible";
        return out;
    }
    if (lo.status == LpStatus::Unbounded)
        throw LpUnbounded("bound_functional: lower bound unbounded (missing box rows?)");
    const LpResult hi = lp.maximize(w);
    if (hi.status == LpStatus::Unbounded)
        throw LpUnbounded("bound_functional: upper bound unbounded (missing box rows?)");

    out.lower = lo.objective;
    out.upper = hi.objective;
    out.feasible = true;
    out.lp_iterations = lo.iterations + hi.iterations;
    out.status_lower = "optimal";
    out.status_upper = "optimal";
    return out;
}

bool feasibility_check(const ConstraintSystem& sys) { return expand_lp(sys).feasible(); }

}  // namespace hrmt
