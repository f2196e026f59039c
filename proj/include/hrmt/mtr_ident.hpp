#pragma once
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hrmt/grid.hpp"
#include "hrmt/lp.hpp"
#include "hrmt/moments.hpp"
#include "hrmt/sieve.hpp"

namespace hrmt {

using PdfFn = std::function<double(std::span<const double>)>;

// Lattice-backed joint density used for conditional-density slicing in
// constraint assembly.
struct JointDensity {
    LatticeNd lat;  // J axes

    static JointDensity from_spec(const DensitySpec& d, int res);
    static JointDensity from_grid(const GridDensity& g);

    double pdf(std::span<const double> v) const { return lat.interp(v); }

    // Marginal density over the dims of `mask`, integrating the rest out.
    double marginal_pdf(uint32_t mask, std::span<const double> sub) const;
};

// E[Y_k | V = v] on a res^J lattice via the full-rank derivative formula.
LatticeNd identify_mtr_fullrank(const MomentProvider& mp, const PdfFn& fv_pdf, int k,
                                const Term& term, int res, const FdConfig& fd);

// E[Y_k | V_{I+} = .] over the dims of a leading term l of treatment k.
struct ConditionalMtr {
    int k = 0;
    uint32_t dims = 0;
    LatticeNd lat;
};

ConditionalMtr conditional_mtr(const MomentProvider& mp, const Decomposition& dk,
                               const PdfFn& marginal_pdf, int k, const Term& term, int res,
                               const FdConfig& fd);

// One retained leading term with its point-identified conditional MTR.
struct LeadingInfo {
    int k = 0;
    Term term;
    ConditionalMtr cmtr;
};

// Conditional MTRs for every leading term of every treatment, with marginal
// densities sliced from the joint lattice.
std::vector<LeadingInfo> build_leading_catalog(const MomentProvider& mp,
                                               const std::vector<Decomposition>& decomps,
                                               const JointDensity& joint, int res,
                                               const FdConfig& fd);

struct ConstraintRow {
    enum class Kind { Equality, Inequality, Ranking, BoxLower, BoxUpper };
    Kind kind;
    std::vector<double> coeffs;  // dense over all theta variables
    double rhs = 0.0;
    // provenance
    int k = 0;        // variable-side treatment
    int other_k = 0;  // data-side treatment (inequality) or ranking partner
    uint32_t dims = 0;
    std::vector<double> node;
};

struct ConstraintSystem {
    std::vector<int> K;  // ascending; one theta block per member
    BernsteinBasis basis;
    double ybar = 1.0;
    double slack_eq = 0.0;
    double slack_in = 0.0;
    std::vector<ConstraintRow> rows;

    int nvars() const { return static_cast<int>(K.size()) * basis.size(); }
    int block_of(int k) const;  // -1 when k not in K
};

struct ConstraintConfig {
    int nodes_per_family = 64;
    double slack_eq = 1e-6;
    double slack_in = 0.0;
    int quad_res = 0;            // 0: use the joint lattice resolution
    bool reverse_ranking = false;
    uint64_t halton_skip = 20;   // leading Halton points dropped
};

// Assemble the sieve-level constraint system: equality rows for the retained
// leading terms of members of K, inequality rows against every other
// treatment's leading terms, pairwise ranking rows inside K, and box rows.
ConstraintSystem build_constraints(const std::vector<int>& K,
                                   const std::vector<LeadingInfo>& catalog,
                                   const JointDensity& joint, const BernsteinBasis& basis,
                                   double ybar, const ConstraintConfig& cfg);

struct PruneStats {
    int own_superset = 0;    // rule (i)
    int chained = 0;         // rule (ii)
    int within_K = 0;        // rule (iii), members of K
    int non_adjacent = 0;    // rule (iii), treatments outside K
};

// Remove redundant inequality rows.  `leading` maps each treatment to its
// leading terms.  Equality rows are only ever instantiated for members of K,
// so the final elimination step has nothing left to discard here.
ConstraintSystem prune_redundant(const ConstraintSystem& sys,
                                 const std::map<int, std::vector<Term>>& leading,
                                 PruneStats* stats = nullptr);

struct IdentifiedInterval {
    double lower = 0.0;
    double upper = 0.0;
    bool feasible = false;
    int lp_iterations = 0;
    std::string status_lower;
    std::string status_upper;
};

// Min and max of w.theta over the constraint polytope (two LP solves).
// Infeasible systems return feasible = false; unbounded problems throw.
IdentifiedInterval bound_functional(const ConstraintSystem& sys, std::span<const double> w);

// Phase-1 feasibility of the polytope.
bool feasibility_check(const ConstraintSystem& sys);

// Expand the logical rows into an LP solver instance (exposed for tests).
LpSolver expand_lp(const ConstraintSystem& sys);

}  // namespace hrmt
