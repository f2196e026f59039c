#include "hrmt/threshold_ident.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hrmt/stats.hpp"

namespace hrmt {

CoefficientMatrix coefficient_matrix(const std::vector<Decomposition>& decomps) {
    CoefficientMatrix cm;
    cm.T = static_cast<int>(decomps.size());
    cm.J = decomps.front().J;
    const uint32_t ncols = (1u << cm.J) - 1u;
    cm.m.assign(cm.T, std::vector<long long>(ncols, 0));
    for (int k = 0; k < cm.T; ++k)
        for (const auto& [mask, c] : decomps[k].terms) cm.m[k][mask - 1] = c;
    return cm;
}

RankResult rank_condition_check(const CoefficientMatrix& cm, int J) {
    std::vector<std::vector<long long>> a = cm.m;
    const int rows = static_cast<int>(a.size());
    const int cols = rows ? static_cast<int>(a[0].size()) : 0;

    int rank = 0;
    long long prev = 1;
    for (int c = 0; c < cols && rank < rows; ++c) {
        int pivot = -1;
        for (int r = rank; r < rows; ++r)
            if (a[r][c] != 0) { pivot = r; break; }
        if (pivot < 0) continue;
        std::swap(a[rank], a[pivot]);
        for (int r = rank + 1; r < rows; ++r) {
            for (int j = c + 1; j < cols; ++j) {
                const __int128 num = static_cast<__int128>(a[r][j]) * a[rank][c] -
                                     static_cast<__int128>(a[r][c]) * a[rank][j];
                a[r][j] = static_cast<long long>(num / prev);  // exact in Bareiss
            }
            a[r][c] = 0;
        }
        prev = a[rank][c];
        ++rank;
    }
    return {rank, J <= rank};
}

double predicted_prob(const Decomposition& dk, std::span<const double> qbar,
                      const DensitySpec& fv) {
    for (double q : qbar)
        if (!(q > 0.0 && q < 1.0))
            throw DomainError("predicted_prob: threshold outside (0,1)");
    double p = dk.constant;
    for (const auto& [mask, c] : dk.terms) p += c * fv.box_prob(qbar, mask);
    return p;
}

std::vector<ProbPoint> binned_probs(const Dataset& ds, int bins) {
    if (ds.zdim != 1) throw Error("binned_probs: scalar instrument required");
    double zlo = std::numeric_limits<double>::max(), zhi = std::numeric_limits<double>::lowest();
    for (size_t i = 0; i < ds.n(); ++i) {
        zlo = std::min(zlo, ds.z[i]);
        zhi = std::max(zhi, ds.z[i]);
    }
    const double width = (zhi - zlo) / bins;
    std::vector<ProbPoint> out(bins);
    std::vector<double> counts(bins, 0.0);
    for (int b = 0; b < bins; ++b) {
        out[b].z = {zlo + (b + 0.5) * width};
        out[b].probs.assign(ds.T, 0.0);
    }
    for (size_t i = 0; i < ds.n(); ++i) {
        int b = static_cast<int>((ds.z[i] - zlo) / width);
        b = std::clamp(b, 0, bins - 1);
        counts[b] += 1.0;
        out[b].probs[ds.d[i] - 1] += 1.0;
    }
    std::vector<ProbPoint> kept;
    for (int b = 0; b < bins; ++b) {
        if (counts[b] == 0.0) continue;
        for (double& p : out[b].probs) p /= counts[b];
        out[b].weight = counts[b] / static_cast<double>(ds.n());
        kept.push_back(std::move(out[b]));
    }
    return kept;
}

double loss_single(const std::vector<Decomposition>& decomps, std::span<const double> qbar,
                   std::span<const double> probs, const DensitySpec& fv) {
    double loss = 0.0;
    for (size_t k = 0; k < decomps.size(); ++k) {
        const double diff = predicted_prob(decomps[k], qbar, fv) - probs[k];
        loss += diff * diff;
    }
    return loss;
}

namespace {
constexpr double kLinkDelta = 0.01;
}

double interior_link(double x) {
    if (x < kLinkDelta)
        return std::max(kLinkDelta * std::exp((x - kLinkDelta) / kLinkDelta), 1e-12);
    if (x > 1.0 - kLinkDelta)
        return std::min(1.0 - kLinkDelta * std::exp((1.0 - kLinkDelta - x) / kLinkDelta),
                        1.0 - 1e-12);
    return x;
}

double interior_link_deriv(double x) {
    if (x < kLinkDelta) return std::exp((x - kLinkDelta) / kLinkDelta);
    if (x > 1.0 - kLinkDelta) return std::exp((1.0 - kLinkDelta - x) / kLinkDelta);
    return 1.0;
}

double total_loss(const std::vector<Decomposition>& decomps,
                  const std::vector<ProbPoint>& points, const ThresholdSpec& trial,
                  const DensitySpec& fv) {
    double loss = 0.0;
    std::vector<double> qbar(trial.J);
    for (const ProbPoint& pt : points) {
        for (int j = 0; j < trial.J; ++j)
            qbar[j] = interior_link(trial.eval_dim(j, pt.z));
        loss += pt.weight * loss_single(decomps, qbar, pt.probs, fv);
    }
    return loss;
}

namespace {

struct LossEval {
    const std::vector<Decomposition>& decomps;
    const std::vector<ProbPoint>& points;
    const DensitySpec& fv;
    int J, zdim, degree, tq;

    int nparam() const { return J * tq; }

    ThresholdSpec to_spec(std::span<const double> theta) const {
        ThresholdSpec s;
        s.J = J;
        s.zdim = zdim;
        s.degree = degree;
        s.beta.assign(J, std::vector<double>(tq, 0.0));
        for (int j = 0; j < J; ++j)
            for (int t = 0; t < tq; ++t) s.beta[j][t] = theta[j * tq + t];
        return s;
    }

    double loss(std::span<const double> theta) const {
        return total_loss(decomps, points, to_spec(theta), fv);
    }

    double loss_grad(std::span<const double> theta, std::span<double> grad) const {
        const ThresholdSpec s = to_spec(theta);
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        std::vector<double> qbar(J), linkd(J), basis(tq), dpdq(J);
        for (const ProbPoint& pt : points) {
            for (int t = 0; t < tq; ++t) basis[t] = s.basis_fn(t, pt.z);
            for (int j = 0; j < J; ++j) {
                const double lin = s.eval_dim(j, pt.z);
                qbar[j] = interior_link(lin);
                linkd[j] = interior_link_deriv(lin);
            }
            for (size_t k = 0; k < decomps.size(); ++k) {
                const double resid =
                    predicted_prob(decomps[k], qbar, fv) - pt.probs[k];
                loss += pt.weight * resid * resid;
                std::fill(dpdq.begin(), dpdq.end(), 0.0);
                for (const auto& [mask, c] : decomps[k].terms)
                    for (int j : mask_to_dims(mask))
                        dpdq[j] += c * fv.box_prob_partial(qbar, mask, j);
                for (int j = 0; j < J; ++j) {
                    const double chain = 2.0 * pt.weight * resid * dpdq[j] * linkd[j];
                    if (chain == 0.0) continue;
                    for (int t = 0; t < tq; ++t) grad[j * tq + t] += chain * basis[t];
                }
            }
        }
        return loss;
    }
};

}  // namespace

ThresholdEstimate fit_threshold(const std::vector<Decomposition>& decomps, int J,
                                const std::vector<ProbPoint>& points, const DensitySpec& fv,
                                int zdim, int degree, const OptimizerConfig& cfg) {
    const int tq = 1 + zdim * degree;
    LossEval ev{decomps, points, fv, J, zdim, degree, tq};
    const int n = ev.nparam();

    ThresholdEstimate best;
    best.loss = std::numeric_limits<double>::max();
    bool any_converged = false;

    Rng rng(derive_seed(cfg.seed, "threshold-fit"));
    for (int r = 0; r < cfg.restarts; ++r) {
        std::vector<double> theta(n, 0.0);
        for (int j = 0; j < J; ++j) {
            theta[j * tq] = r == 0 ? 0.5 : rng.uniform(0.25, 0.75);
            for (int t = 1; t < tq; ++t)
                theta[j * tq + t] = r == 0 ? 0.0 : rng.uniform(-0.25, 0.25);
        }

        std::vector<double> grad(n), trial(n);
        std::vector<double> trace;
        double f = ev.loss_grad(theta, grad);
        trace.push_back(f);
        double step = 1.0;
        bool converged = false;
        int it = 0;
        for (; it < cfg.max_iter; ++it) {
            double gnorm = 0.0, g2 = 0.0;
            for (double g : grad) {
                gnorm = std::max(gnorm, std::fabs(g));
                g2 += g * g;
            }
            if (gnorm < cfg.grad_tol) { converged = true; break; }

            // backtracking line search on the steepest-descent direction
            bool accepted = false;
            while (step > 1e-16) {
                for (int i = 0; i < n; ++i) trial[i] = theta[i] - step * grad[i];
                const double ft = ev.loss(trial);
                if (ft <= f - 1e-4 * step * g2) {
                    theta = trial;
                    f = ft;
                    trace.push_back(f);
                    accepted = true;
                    step = std::min(step * 1.5, 1e3);
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;  // no descent possible at machine precision
            f = ev.loss_grad(theta, grad);
        }

        if (f < best.loss) {
            best.spec = ev.to_spec(theta);
            best.loss = f;
            best.iterations = it;
            best.converged = converged;
            best.loss_trace = std::move(trace);
        }
        any_converged = any_converged || converged;
    }
    if (!any_converged && best.iterations >= cfg.max_iter)
        throw OptimizerFailed("fit_threshold: no restart reached gradient tolerance");

    best.rank = rank_condition_check(coefficient_matrix(decomps), J);
    best.identified = best.rank.satisfied;
    return best;
}

}  // namespace hrmt
