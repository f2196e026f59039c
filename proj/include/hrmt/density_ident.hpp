#pragma once
#include <span>
#include <utility>
#include <vector>

#include "hrmt/grid.hpp"
#include "hrmt/moments.hpp"

namespace hrmt {

// f_V on a res^J interior lattice via the full-rank derivative formula:
// grid values = mixed_partial(cond_prob(k, .), v, {1..J}) / c, clipped at
// zero and renormalized.  Throws NotFullRank when the term misses dimensions.
GridDensity identify_density_fullrank(const MomentProvider& mp, int k, const Term& term,
                                      int res, const FdConfig& fd);

// Marginal density of V over the dims of a leading term l of treatment k,
// from the distribution identification equation.  Threshold coordinates
// outside l are pinned at an arbitrary interior value; invariance to that
// choice is asserted on probe nodes (violations throw NotLeadingTerm).
MarginalDensity marginal_identification(const MomentProvider& mp, const Decomposition& dk,
                                        int k, const Term& term, int res, const FdConfig& fd,
                                        double invariance_tol = 0.05);

// Drops every (treatment, leading term) whose dims are strictly contained in
// another entry's dims (its identification equation is implied); duplicate
// dims keep their first occurrence.
std::vector<std::pair<int, Term>> prune_implied_marginals(
    std::vector<std::pair<int, Term>> items);

enum class CopulaFamily { Gaussian, Frank, Gumbel };

const char* to_string(CopulaFamily f);

// Valid parameter range of a family at the given arity.
std::pair<double, double> copula_param_range(CopulaFamily family, int arity);

// Log density of the copula (w.r.t. uniform margins) at u in (0,1)^arity.
// Gaussian is exchangeable for arity > 2; Frank and Gumbel are bivariate.
double copula_log_density(CopulaFamily family, double param, std::span<const double> u);

struct CopulaModel {
    CopulaFamily family = CopulaFamily::Gaussian;
    double param = 0.0;
    int arity = 0;

    double log_density(std::span<const double> u) const {
        return copula_log_density(family, param, u);
    }
};

struct CopulaFitOptions {
    int G = 10000;          // synthetic sample size
    uint64_t seed = 0;
    int restarts = 3;       // randomized golden-section restarts
    int joint_res = 20;     // lattice resolution of the returned joint

    // Step-4 sample of V.  Empty: generated by the sequential conditional
    // scheme over the marginals (which carries dependence only through shared
    // dimensions).  Non-empty: caller-supplied draws of V, for use when
    // genuine samples are available (J-dim points, at least G of them used).
    std::vector<std::vector<double>> provided_sample;
};

struct CopulaFitResult {
    CopulaModel model;
    GridDensity joint;               // fitted joint density over J dims
    double loglik = 0.0;             // at the optimum, over the Step-4 sample
    int G = 0;
    double overlap_discrepancy = 0;  // max L1 gap between shared-dim marginals
};

// Five-step reconstruction of f_V from identified marginals: marginal CDFs by
// exact lattice accumulation, caller-chosen family, candidate joint density
// copula-density x product of marginal densities, Step-4 sample, and scalar
// MLE of the dependence parameter.
CopulaFitResult fit_copula(int J, const std::vector<MarginalDensity>& marginals,
                           CopulaFamily family, const CopulaFitOptions& opts);

// Joint density evaluation used by fit_copula and its tests.
double copula_joint_density(const CopulaModel& model,
                            const std::vector<MarginalDensity>& marginals,
                            const std::vector<CumulativeLattice>& cdfs,
                            std::span<const double> v);

}  // namespace hrmt
