#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "hrmt/dgp.hpp"
#include "hrmt/density.hpp"
#include "hrmt/rect.hpp"

namespace hrmt {

// The T x (2^J - 1) integer matrix of decomposition coefficients c_l^k; rows
// are treatments, columns are nonempty dims subsets in ascending mask order.
struct CoefficientMatrix {
    int T = 0;
    int J = 0;
    std::vector<std::vector<long long>> m;

    long long at(int k, uint32_t mask) const { return m[k - 1][mask - 1]; }
};

CoefficientMatrix coefficient_matrix(const std::vector<Decomposition>& decomps);

struct RankResult {
    int rank = 0;
    bool satisfied = false;  // J <= rank
};

// Integer rank by fraction-free (Bareiss) elimination.
RankResult rank_condition_check(const CoefficientMatrix& cm, int J);

// Model-implied P(D=k | Z=z) under a trial threshold qbar and known F_V.
// Throws DomainError when any qbar_j leaves (0,1).
double predicted_prob(const Decomposition& dk, std::span<const double> qbar,
                      const DensitySpec& fv);

// Observation-level empirical treatment shares at an instrument point.
struct ProbPoint {
    std::vector<double> z;
    std::vector<double> probs;  // length T
    double weight = 1.0;        // e.g. bin occupancy share
};

// Empirical Pr(D=k | Z) by equal-width binning of a scalar instrument.
std::vector<ProbPoint> binned_probs(const Dataset& ds, int bins);

double loss_single(const std::vector<Decomposition>& decomps, std::span<const double> qbar,
                   std::span<const double> probs, const DensitySpec& fv);

struct OptimizerConfig {
    int restarts = 5;
    int max_iter = 2000;
    double grad_tol = 1e-8;
    uint64_t seed = 0;
};

struct ThresholdEstimate {
    ThresholdSpec spec;           // fitted basis coefficients (Q-scale)
    double loss = 0.0;
    int iterations = 0;           // of the winning restart
    bool converged = false;       // gradient tolerance reached
    RankResult rank;
    bool identified = false;      // rank condition satisfied
    std::vector<double> loss_trace;  // accepted line-search losses (winner)
};

// Sum over probability points of loss_single under the basis parametrization
// of Qbar, with the saturating interior link applied.
double total_loss(const std::vector<Decomposition>& decomps,
                  const std::vector<ProbPoint>& points, const ThresholdSpec& trial,
                  const DensitySpec& fv);

// Minimize total_loss over basis coefficients by gradient descent with
// backtracking line search and random restarts.  The trial thresholds pass
// through a saturating link that is the identity on [delta, 1-delta] and
// decays smoothly into (0,1) outside, so iterates always satisfy the interior
// condition while correctly specified fits recover coefficients exactly.
ThresholdEstimate fit_threshold(const std::vector<Decomposition>& decomps, int J,
                                const std::vector<ProbPoint>& points, const DensitySpec& fv,
                                int zdim, int degree, const OptimizerConfig& cfg = {});

// Saturating link used by fit_threshold (exposed for tests).
double interior_link(double x);
double interior_link_deriv(double x);

}  // namespace hrmt
