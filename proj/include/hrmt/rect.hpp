#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrmt/errors.hpp"

namespace hrmt {

// Maximum heterogeneity dimension; keeps bitmask terms and the 2^J
// sign-pattern probe tractable.
inline constexpr int kMaxDims = 24;

// Per-dimension role of a hyper-rectangle cell.  Below stands for the factor
// 1{V_j < Q_j(Z)}, Above for 1{V_j >= Q_j(Z)}, Free leaves the dimension
// unconstrained.
enum class Flag : uint8_t { Below, Above, Free };

struct CellSpec {
    std::vector<Flag> flags;  // length J

    // True when the sign pattern s (bit j-1 set <=> V_j < Q_j) lies in the cell.
    bool matches(uint32_t pattern) const;

    bool operator==(const CellSpec&) const = default;
};

// A treatment rule: for each treatment k in {1..T}, the union of disjoint
// hyper-rectangle cells that makes up its region.
struct TreatmentRule {
    int J = 0;
    int T = 0;
    std::vector<std::vector<CellSpec>> cells;  // size T, 0-indexed by k-1

    // Structural checks: dimensions, flag lengths, J/T ranges, and pairwise
    // disjointness of cells within each treatment (exhaustive over the 2^J
    // sign-pattern probe set).  Throws InvalidModel.
    void validate() const;
};

// One monomial c * prod_{j in dims} S_j of a decomposition; dims is a bitmask
// with bit j-1 for dimension j and is nonempty for stored terms.
struct Term {
    int coeff = 0;
    uint32_t dims = 0;
};

bool term_includes(const Term& a, const Term& b);  // dims(a) subseteq dims(b)
int term_rank(const Term& t);

// Canonical polynomial form of one treatment indicator: an integer constant
// plus one integer-coefficient term per distinct dims subset, keyed by the
// dims bitmask so output order is deterministic.
struct Decomposition {
    int J = 0;
    int constant = 0;
    std::map<uint32_t, int> terms;  // dims -> coeff, no zero coefficients

    // Value of the polynomial at a sign pattern (bit j-1 set <=> S_j = 1).
    int eval_pattern(uint32_t pattern) const;

    int eval(std::span<const double> v, std::span<const double> q) const;

    std::vector<Term> term_list() const;

    bool operator==(const Decomposition&) const = default;
};

// Sign pattern of a point: bit j-1 set iff v_j < q_j.
uint32_t sign_pattern(std::span<const double> v, std::span<const double> q);

// Expand treatment k's cells into the canonical decomposition (k is 1-based).
Decomposition decompose(const TreatmentRule& rule, int k);

std::vector<Decomposition> decompose_all(const TreatmentRule& rule);

struct CompletenessResult {
    bool complete = false;
    // Witness point (v, q) where the treatment indicators do not sum to one.
    std::optional<std::pair<std::vector<double>, std::vector<double>>> witness;
};

// True iff the symbolic sum of all treatment decompositions is the constant 1.
CompletenessResult check_completeness(const TreatmentRule& rule);

struct InvolvementResult {
    bool ok = false;
    uint32_t missing = 0;  // bitmask of dimensions absent from every term
};

// True iff every dimension appears in some nonzero term of some treatment.
InvolvementResult check_involvement(const std::vector<Decomposition>& decomps);

// All terms l with no distinct term l' such that dims(l) subseteq dims(l').
std::vector<Term> leading_terms(const Decomposition& d);

// 0/1 value of d_k at (v, q).
int eval_dk(const Decomposition& d, std::span<const double> v, std::span<const double> q);

// The unique treatment k with d_k(v, q) = 1; throws InvalidModel if zero or
// several indicators fire.
int eval_treatment(const std::vector<Decomposition>& decomps, std::span<const double> v,
                   std::span<const double> q);

// Precomputed sign-pattern -> treatment table for fast repeated assignment.
// Construction verifies that exactly one treatment fires on every pattern.
class AssignmentTable {
  public:
    explicit AssignmentTable(const std::vector<Decomposition>& decomps);

    int J() const { return J_; }
    int treatment_of(uint32_t pattern) const { return table_[pattern]; }
    int assign(std::span<const double> v, std::span<const double> q) const {
        return table_[sign_pattern(v, q)];
    }

  private:
    int J_;
    std::vector<int> table_;
};

std::string to_string(const Decomposition& d);

}  // namespace hrmt
