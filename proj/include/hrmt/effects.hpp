#pragma once
#include <functional>
#include <span>
#include <vector>

#include "hrmt/dgp.hpp"
#include "hrmt/mtr_ident.hpp"

namespace hrmt {

enum class EffectKind { MTE, ATE, ATT, LATE, PRTE, APRTE };

const char* to_string(EffectKind k);

struct EffectQuery {
    EffectKind kind = EffectKind::ATE;
    int k1 = 0;               // baseline treatment
    int k2 = 0;               // comparison treatment
    int k3 = 0;               // conditioning treatment (ATT)
    std::vector<double> z;    // instrument value (ATT/LATE/PRTE/APRTE)
    std::vector<double> z2;   // shifted instrument (LATE)
    std::vector<double> v;    // heterogeneity point (MTE/PRTE)

    void validate(int T, int zdim, int J) const;
};

// Everything a point evaluation needs: treatment geometry under both
// policies, thresholds, the heterogeneity density, and the MTR functions.
struct EffectModel {
    int J = 0;
    int T = 0;
    double ybar = 1.0;
    std::vector<Decomposition> decomps;     // baseline assignment
    std::vector<Decomposition> decomps_cf;  // counterfactual (PRTE/APRTE); empty = baseline
    ThresholdSpec Q;
    ThresholdSpec Qcf;                      // counterfactual thresholds; J==0 = baseline
    PdfFn density;
    std::function<double(int, std::span<const double>)> mtr;  // m_k(v)
    int lattice_res = 21;  // plain-integral quadrature nodes per dim
    int gl_points = 8;     // per-dim points inside partition boxes
};

// Point value of the queried effect by tensor quadrature; treatment regions
// are handled by partitioning the cube at the active thresholds so region
// boundaries are exact.  Throws ZeroDenominator for vanishing ATT/LATE mass.
double effect_point(const EffectQuery& q, const EffectModel& model);

// Linear-functional weights of the query over the sieve coefficients.
std::vector<double> effect_weights(const EffectQuery& q, const EffectModel& model,
                                   const ConstraintSystem& sys);

// Interval of the queried effect over the identified set.
IdentifiedInterval effect_bounds(const EffectQuery& q, const EffectModel& model,
                                 const ConstraintSystem& sys);

}  // namespace hrmt
