#include "hrmt/effects.hpp"

#include <algorithm>
#include <cmath>

#include "hrmt/stats.hpp"

namespace hrmt {

const char* to_string(EffectKind k) {
    switch (k) {
        case EffectKind::MTE: return "mte";
        case EffectKind::ATE: return "ate";
        case EffectKind::ATT: return "att";
        case EffectKind::LATE: return "late";
        case EffectKind::PRTE: return "prte";
        case EffectKind::APRTE: return "aprte";
    }
    return "?";
}

void EffectQuery::validate(int T, int zdim, int J) const {
    auto need_k = [&](int k, const char* what) {
        if (k < 1 || k > T) throw Error(std::string("effect query: bad ") + what);
    };
    auto need_z = [&](const std::vector<double>& zz, const char* what) {
        if (static_cast<int>(zz.size()) != zdim)
            throw Error(std::string("effect query: missing ") + what);
    };
    switch (kind) {
        case EffectKind::MTE:
            need_k(k1, "k1");
            need_k(k2, "k2");
            if (static_cast<int>(v.size()) != J) throw Error("effect query: missing v");
            break;
        case EffectKind::ATE:
            need_k(k1, "k1");
            need_k(k2, "k2");
            break;
        case EffectKind::ATT:
            need_k(k1, "k1");
            need_k(k2, "k2");
            need_k(k3, "k3");
            need_z(z, "z");
            break;
        case EffectKind::LATE:
            need_k(k1, "k1");
            need_k(k2, "k2");
            need_z(z, "z");
            need_z(z2, "z2");
            if (z == z2) throw Error("effect query: LATE requires z != z'");
            break;
        case EffectKind::PRTE:
            need_z(z, "z");
            if (static_cast<int>(v.size()) != J) throw Error("effect query: missing v");
            break;
        case EffectKind::APRTE:
            need_z(z, "z");
            break;
    }
}

namespace {

const std::vector<Decomposition>& cf_decomps(const EffectModel& m) {
    return m.decomps_cf.empty() ? m.decomps : m.decomps_cf;
}

const ThresholdSpec& cf_threshold(const EffectModel& m) {
    return m.Qcf.J == 0 ? m.Q : m.Qcf;
}

// Tensor quadrature over the unit cube on interior lattice nodes.
double cube_integral(int J, int res, const std::function<double(std::span<const double>)>& f) {
    LatticeNd lat = LatticeNd::zeros(J, res);
    double acc = 0.0;
    std::vector<double> v(J);
    for_each_node(J, res, [&](std::span<const int> mi, size_t) {
        double w = 1.0;
        for (int d = 0; d < J; ++d) {
            v[d] = lat.node(mi[d]);
            w *= lat.node_weight(mi[d]);
        }
        acc += w * f(v);
    });
    return acc;
}

// Integral of `integrand` weighted by a locally constant region coefficient.
// The cube is partitioned at the supplied per-dimension cuts, the weight is
// evaluated once per box (at its center), and smooth parts are integrated by
// Gauss-Legendre inside each box, so region boundaries carry no error.
double partition_integral(int J, const std::vector<std::vector<double>>& cuts, int gl,
                          const std::function<double(std::span<const double>)>& weight,
                          const std::function<double(std::span<const double>)>& integrand) {
    std::vector<std::vector<double>> edges(J);
    for (int d = 0; d < J; ++d) {
        edges[d] = cuts[d];
        edges[d].push_back(0.0);
        edges[d].push_back(1.0);
        std::sort(edges[d].begin(), edges[d].end());
        edges[d].erase(std::unique(edges[d].begin(), edges[d].end(),
                                   [](double a, double b) { return std::fabs(a - b) < 1e-14; }),
                       edges[d].end());
        // drop cuts outside [0,1]
        std::erase_if(edges[d], [](double x) { return x < 0.0 || x > 1.0; });
    }
    const QuadRule& rule = gauss_legendre(gl);

    double total = 0.0;
    std::vector<int> box(J, 0);
    std::vector<double> center(J), v(J);
    while (true) {
        bool empty = false;
        for (int d = 0; d < J; ++d) {
            if (box[d] + 1 >= static_cast<int>(edges[d].size())) { empty = true; break; }
            center[d] = 0.5 * (edges[d][box[d]] + edges[d][box[d] + 1]);
        }
        if (!empty) {
            const double w = weight(center);
            if (w != 0.0) {
                // tensor GL over the box
                std::vector<int> gi(J, 0);
                double boxacc = 0.0;
                while (true) {
                    double gw = 1.0;
                    for (int d = 0; d < J; ++d) {
                        const double a = edges[d][box[d]], b = edges[d][box[d] + 1];
                        v[d] = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[gi[d]];
                        gw *= 0.5 * (b - a) * rule.weights[gi[d]];
                    }
                    boxacc += gw * integrand(v);
                    int d = J - 1;
                    while (d >= 0 && ++gi[d] == gl) gi[d--] = 0;
                    if (d < 0) break;
                }
                total += w * boxacc;
            }
        }
        int d = J - 1;
        while (d >= 0 && ++box[d] + 1 >= static_cast<int>(edges[d].size())) box[d--] = 0;
        if (d < 0) break;
    }
    return total;
}

}  // namespace

double effect_point(const EffectQuery& q, const EffectModel& model) {
    q.validate(model.T, model.Q.zdim, model.J);
    const int J = model.J;

    switch (q.kind) {
        case EffectKind::MTE:
            return model.mtr(q.k2, q.v) - model.mtr(q.k1, q.v);

        case EffectKind::ATE:
            return cube_integral(J, model.lattice_res, [&](std::span<const double> v) {
                return (model.mtr(q.k2, v) - model.mtr(q.k1, v)) * model.density(v);
            });

        case EffectKind::ATT: {
            const std::vector<double> qz = model.Q.eval(q.z);
            const Decomposition& d3 = model.decomps[q.k3 - 1];
            std::vector<std::vector<double>> cuts(J);
            for (int d = 0; d < J; ++d) cuts[d] = {qz[d]};
            auto region = [&](std::span<const double> v) {
                return static_cast<double>(d3.eval(v, qz));
            };
            const double denom = partition_integral(J, cuts, model.gl_points, region,
                                                    model.density);
            if (denom < 1e-10)
                throw ZeroDenominator("ATT: conditioning treatment has no mass");
            const double num = partition_integral(
                J, cuts, model.gl_points, region, [&](std::span<const double> v) {
                    return (model.mtr(q.k2, v) - model.mtr(q.k1, v)) * model.density(v);
                });
            return num / denom;
        }

        case EffectKind::LATE: {
            const std::vector<double> qa = model.Q.eval(q.z);
            const std::vector<double> qb = model.Q.eval(q.z2);
            const Decomposition& d1 = model.decomps[q.k1 - 1];
            const Decomposition& d2 = model.decomps[q.k2 - 1];
            std::vector<std::vector<double>> cuts(J);
            for (int d = 0; d < J; ++d) cuts[d] = {qa[d], qb[d]};
            auto region = [&](std::span<const double> v) {
                return static_cast<double>(d1.eval(v, qa) * d2.eval(v, qb));
            };
            const double denom =
                partition_integral(J, cuts, model.gl_points, region, model.density);
            if (denom < 1e-10) throw ZeroDenominator("LATE: switching population has no mass");
            const double num = partition_integral(
                J, cuts, model.gl_points, region, [&](std::span<const double> v) {
                    return (model.mtr(q.k2, v) - model.mtr(q.k1, v)) * model.density(v);
                });
            return num / denom;
        }

        case EffectKind::PRTE: {
            const std::vector<double> qa = model.Q.eval(q.z);
            const std::vector<double> qb = cf_threshold(model).eval(q.z);
            const auto& dcf = cf_decomps(model);
            double s = 0.0;
            for (int k = 1; k <= model.T; ++k) {
                const int diff = dcf[k - 1].eval(q.v, qb) - model.decomps[k - 1].eval(q.v, qa);
                if (diff != 0) s += diff * model.mtr(k, q.v);
            }
            return s;
        }

        case EffectKind::APRTE: {
            const std::vector<double> qa = model.Q.eval(q.z);
            const std::vector<double> qb = cf_threshold(model).eval(q.z);
            const auto& dcf = cf_decomps(model);
            std::vector<std::vector<double>> cuts(J);
            for (int d = 0; d < J; ++d) cuts[d] = {qa[d], qb[d]};
            double s = 0.0;
            for (int k = 1; k <= model.T; ++k) {
                auto wdiff = [&](std::span<const double> v) {
                    return static_cast<double>(dcf[k - 1].eval(v, qb) -
                                               model.decomps[k - 1].eval(v, qa));
                };
                s += partition_integral(J, cuts, model.gl_points, wdiff,
                                        [&](std::span<const double> v) {
                                            return model.mtr(k, v) * model.density(v);
                                        });
            }
            return s;
        }
    }
    throw Error("effect_point: unknown kind");
}

namespace {

void add_block(std::vector<double>& w, const ConstraintSystem& sys, int k,
               const std::vector<double>& vals, double sign) {
    const int b = sys.block_of(k);
    if (b < 0) throw Error("effect_bounds: treatment " + std::to_string(k) +
                           " has no coefficient block in the constraint system");
    for (int t = 0; t < sys.basis.size(); ++t) w[b * sys.basis.size() + t] += sign * vals[t];
}

}  // namespace

std::vector<double> effect_weights(const EffectQuery& q, const EffectModel& model,
                                   const ConstraintSystem& sys) {
    q.validate(model.T, model.Q.zdim, model.J);
    const int J = model.J;
    const int Tk = sys.basis.size();
    std::vector<double> w(sys.nvars(), 0.0);
    std::vector<double> vals(Tk, 0.0);

    auto basis_at = [&](std::span<const double> v) {
        for (int t = 0; t < Tk; ++t) vals[t] = sys.basis.eval(t, v);
    };
    auto basis_cube_integral = [&](const std::function<double(std::span<const double>)>& g) {
        std::fill(vals.begin(), vals.end(), 0.0);
        LatticeNd lat = LatticeNd::zeros(J, model.lattice_res);
        std::vector<double> v(J);
        for_each_node(J, model.lattice_res, [&](std::span<const int> mi, size_t) {
            double nw = 1.0;
            for (int d = 0; d < J; ++d) {
                v[d] = lat.node(mi[d]);
                nw *= lat.node_weight(mi[d]);
            }
            const double gw = nw * g(v);
            if (gw != 0.0)
                for (int t = 0; t < Tk; ++t) vals[t] += gw * sys.basis.eval(t, v);
        });
    };
    auto basis_partition_integral =
        [&](const std::vector<std::vector<double>>& cuts,
            const std::function<double(std::span<const double>)>& weight) {
            for (int t = 0; t < Tk; ++t) {
                const int tt = t;
                vals[t] = partition_integral(J, cuts, model.gl_points, weight,
                                             [&](std::span<const double> v) {
                                                 return sys.basis.eval(tt, v) * model.density(v);
                                             });
            }
        };

    switch (q.kind) {
        case EffectKind::MTE:
            basis_at(q.v);
            add_block(w, sys, q.k2, vals, 1.0);
            add_block(w, sys, q.k1, vals, -1.0);
            return w;

        case EffectKind::ATE:
            basis_cube_integral(model.density);
            add_block(w, sys, q.k2, vals, 1.0);
            add_block(w, sys, q.k1, vals, -1.0);
            return w;

        case EffectKind::ATT: {
            const std::vector<double> qz = model.Q.eval(q.z);
            const Decomposition& d3 = model.decomps[q.k3 - 1];
            std::vector<std::vector<double>> cuts(J);
            for (int d = 0; d < J; ++d) cuts[d] = {qz[d]};
            auto region = [&](std::span<const double> v) {
                return static_cast<double>(d3.eval(v, qz));
            };
            const double denom =
                partition_integral(J, cuts, model.gl_points, region, model.density);
            if (denom < 1e-10) throw ZeroDenominator("ATT weights: no conditioning mass");
            basis_partition_integral(cuts, region);
            for (double& x : vals) x /= denom;
            add_block(w, sys, q.k2, vals, 1.0);
            add_block(w, sys, q.k1, vals, -1.0);
            return w;
        }

        case EffectKind::LATE: {
            const std::vector<double> qa = model.Q.eval(q.z);
            const std::vector<double> qb = model.Q.eval(q.z2);
            const Decomposition& d1 = model.decomps[q.k1 - 1];
            const Decomposition& d2 = model.decomps[q.k2 - 1];
            std::vector<std::vector<double>> cuts(J);
            for (int d = 0; d < J; ++d) cuts[d] = {qa[d], qb[d]};
            auto region = [&](std::span<const double> v) {
                return static_cast<double>(d1.eval(v, qa) * d2.eval(v, qb));
            };
            const double denom =
                partition_integral(J, cuts, model.gl_points, region, model.density);
            if (denom < 1e-10) throw ZeroDenominator("LATE weights: no switching mass");
            basis_partition_integral(cuts, region);
            for (double& x : vals) x /= denom;
            add_block(w, sys, q.k2, vals, 1.0);
            add_block(w, sys, q.k1, vals, -1.0);
            return w;
        }

        case EffectKind::PRTE: {
            const std::vector<double> qa = model.Q.eval(q.z);
            const std::vector<double> qb = cf_threshold(model).eval(q.z);
            const auto& dcf = cf_decomps(model);
            basis_at(q.v);
            for (int k = 1; k <= model.T; ++k) {
                const int diff = dcf[k - 1].eval(q.v, qb) - model.decomps[k - 1].eval(q.v, qa);
                if (diff != 0) add_block(w, sys, k, vals, static_cast<double>(diff));
            }
            return w;
        }

        case EffectKind::APRTE: {
            const std::vector<double> qa = model.Q.eval(q.z);
            const std::vector<double> qb = cf_threshold(model).eval(q.z);
            const auto& dcf = cf_decomps(model);
            std::vector<std::vector<double>> cuts(J);
            for (int d = 0; d < J; ++d) cuts[d] = {qa[d], qb[d]};
            for (int k = 1; k <= model.T; ++k) {
                auto wdiff = [&](std::span<const double> v) {
                    return static_cast<double>(dcf[k - 1].eval(v, qb) -
                                               model.decomps[k - 1].eval(v, qa));
                };
                basis_partition_integral(cuts, wdiff);
                bool nonzero = false;
                for (double x : vals)
                    if (x != 0.0) nonzero = true;
                if (nonzero) add_block(w, sys, k, vals, 1.0);
            }
            return w;
        }
    }
    throw Error("effect_weights: unknown kind");
}

IdentifiedInterval effect_bounds(const EffectQuery& q, const EffectModel& model,
                                 const ConstraintSystem& sys) {
    return bound_functional(sys, effect_weights(q, model, sys));
}

}  // namespace hrmt
