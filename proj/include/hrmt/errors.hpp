#pragma once
#include <stdexcept>
#include <string>

namespace hrmt {

// Base class for all model/computation errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Treatment rule violates completeness/exclusivity (no treatment or several fire).
struct InvalidModel : Error { using Error::Error; };

// A requested value lies outside its admissible range (e.g. outcome mean outside (0, Ybar)).
struct OutOfRange : Error { using Error::Error; };

// Finite-difference stencil would leave the open unit cube.
struct BoundaryViolation : Error { using Error::Error; };

// Kernel regression has too few effective observations near the query point.
struct InsufficientData : Error { using Error::Error; };

// Operation requires a rank-J term but the supplied term has lower rank.
struct NotFullRank : Error { using Error::Error; };

// Supplied term is not a leading term of the decomposition in question.
struct NotLeadingTerm : Error { using Error::Error; };

// Density (or marginal density) vanishes where a division is required.
struct DensityZero : Error { using Error::Error; };

// The sequential copula sampler cannot reach every dimension.
struct NonOverlappingMarginals : Error { using Error::Error; };

// Copula likelihood is unbounded (or degenerate) over the family's parameter range.
struct MleDiverged : Error { using Error::Error; };

// Argument outside the domain of an analytic map (e.g. threshold outside (0,1)).
struct DomainError : Error { using Error::Error; };

// All optimizer restarts hit the iteration cap without reaching tolerance.
struct OptimizerFailed : Error { using Error::Error; };

// Denominator mass below tolerance in a ratio-type effect (LATE/ATT).
struct ZeroDenominator : Error { using Error::Error; };

// LP is unbounded; usually means box rows are missing from the system.
struct LpUnbounded : Error { using Error::Error; };

// LP has an empty feasible region.
struct LpInfeasible : Error { using Error::Error; };

// The critical-value equation has no solution under the chosen convention.
struct NoRoot : Error { using Error::Error; };

// Density family does not support the requested analytic operation.
struct UnsupportedDensity : Error { using Error::Error; };

}  // namespace hrmt
