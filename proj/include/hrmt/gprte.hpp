#pragma once
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hrmt/dgp.hpp"
#include "hrmt/mtr_ident.hpp"

namespace hrmt {

// Baseline and counterfactual assignment mechanisms (d, Q) -> (d', Q').
struct PolicyPair {
    int J = 0;
    int T = 0;
    std::vector<Decomposition> base;
    std::vector<Decomposition> cf;
    ThresholdSpec Q;
    ThresholdSpec Qcf;

    void validate() const;
};

struct Weights {
    std::vector<double> w;

    static Weights uniform(size_t n) {
        Weights out;
        out.w.assign(n, 1.0 / static_cast<double>(n));
        return out;
    }
    void validate() const;
};

using MtrEval = std::function<double(int, std::span<const double>)>;

struct GprtePointResult {
    double dW = 0.0;
    double var_hat = 0.0;  // sum_o w_o^2 sigma_o^2 / M
    std::optional<double> z_stat;
    std::optional<double> p_value;
    bool degenerate = false;  // all draws produce zero difference
    std::vector<double> dmu;     // per observation, input order
    std::vector<double> sigma2;  // per observation, input order
    int M = 0;
    uint64_t seed = 0;
};

// Algorithm for the point-identified case: per observation, M draws of V
// from f_V, assignment under both mechanisms, the MTR difference, and the
// weighted aggregate with its variance estimate and two-sided normal test.
//
// Per-observation RNG substreams are keyed by the observation's instrument
// content, and the final reductions run in a content-sorted order, so
// permuting observations together with their weights is bit-neutral.
GprtePointResult gprte_point(std::span<const double> zs, int zdim, const Weights& weights,
                             const PolicyPair& policy, const DensitySpec& density,
                             const MtrEval& mtr, int M, uint64_t seed);

struct GprteSetResult {
    double dW_lo = 0.0;
    double dW_hi = 0.0;
    double R = 0.0;  // dW_hi - dW_lo
    // sqrt(M)-scaled deviations: sigma^2 = sum_o w_o^2 Var(delta_m^o)
    double sigma_lo = 0.0;
    double sigma_hi = 0.0;
    double cov = 0.0;  // same scaling, pairwise over shared draws
    double rho = 0.0;
    std::vector<double> dmu_lo, dmu_hi;
    int M = 0;
    uint64_t seed = 0;
};

struct SetGprteConfig {
    int M = 1000;
    uint64_t seed = 0;
    int memo_res = 32;  // per-dimension cells of the LP memo grid
};

// LP bounds of the pointwise contrast m_{k_cf}(v) - m_{k_base}(v), memoized
// by (pair, cell of v).  Sharable across replications of gprte_set so each
// distinct cell is solved once.
class PointwiseBoundsCache {
  public:
    PointwiseBoundsCache(const ConstraintSystem& sys, int memo_res);

    std::pair<double, double> bounds(int k_base, int k_cf, std::span<const double> v);

    size_t solved() const { return memo_.size(); }

  private:
    const ConstraintSystem& sys_;
    LpSolver lp_;
    int memo_res_;
    std::unordered_map<uint64_t, std::pair<double, double>> memo_;
};

// Algorithm for the set-identified case: per draw, the pointwise policy
// contrast is bounded by two LP solves over the constraint polytope, with
// results memoized by (baseline, counterfactual, cell of v).  Pass `cache`
// to share LP solutions across calls with the same system.
GprteSetResult gprte_set(std::span<const double> zs, int zdim, const Weights& weights,
                         const PolicyPair& policy, const DensitySpec& density,
                         const ConstraintSystem& sys, const SetGprteConfig& cfg,
                         PointwiseBoundsCache* cache = nullptr);

enum class ImConvention { StandardIm, PaperLiteral };

// Critical value of the interval: solves the chosen convention's equation by
// bisection to 1e-10.  StandardIm solves
//   Phi(C + sqrt(M) R / max sigma) - Phi(-C) = 1 - alpha,
// PaperLiteral uses Phi(C) in place of Phi(-C) as printed, which can lack a
// root (NoRoot is thrown in that case).
double im_critical_value(double R, double sigma_lo, double sigma_hi, int M, double alpha,
                         ImConvention convention);

struct ImInterval {
    double alpha = 0.05;
    double cbar = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    ImConvention convention = ImConvention::StandardIm;
};

ImInterval im_interval(const GprteSetResult& res, double alpha,
                       ImConvention convention = ImConvention::StandardIm);

// Reject H0: GPRTE = 0 iff zero lies outside the interval.
bool im_reject(const ImInterval& interval);

}  // namespace hrmt
