#pragma once
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "hrmt/errors.hpp"
#include "hrmt/grid.hpp"
#include "hrmt/stats.hpp"

namespace hrmt {

// Affine function of v used for mean-outcome integrals: c0 + sum_j lin[j] v_j.
struct AffineFn {
    double c0 = 0.0;
    std::vector<double> lin;

    double operator()(std::span<const double> v) const {
        double s = c0;
        for (size_t j = 0; j < lin.size(); ++j) s += lin[j] * v[j];
        return s;
    }
};

struct IndependentUniformSpec {};

// Piecewise-constant density on a uniform partition of [0,1]^J into res^J
// cells; values are densities (not masses) and must be positive.
struct CellGridSpec {
    int res = 0;
    std::vector<double> values;  // res^J row-major, dim 0 slowest
};

// Gaussian copula with uniform marginals; corr is a full correlation matrix.
struct GaussianCopulaSpec {
    std::vector<std::vector<double>> corr;
};

// The heterogeneity law f_V of a data-generating process.  Provides exact
// sampling, the density, and the partial-box integrals the moment oracle
// needs: P(V_j < q_j for j in mask) and E[m(V) 1{V_j < q_j, j in mask}].
class DensitySpec {
  public:
    DensitySpec(int J, IndependentUniformSpec s);
    DensitySpec(int J, CellGridSpec s);
    DensitySpec(int J, GaussianCopulaSpec s);

    int J() const { return J_; }

    bool is_uniform() const { return std::holds_alternative<IndependentUniformSpec>(spec_); }
    bool is_grid() const { return std::holds_alternative<CellGridSpec>(spec_); }
    bool is_gaussian() const { return std::holds_alternative<GaussianCopulaSpec>(spec_); }
    const GaussianCopulaSpec& gaussian() const { return std::get<GaussianCopulaSpec>(spec_); }

    std::vector<double> sample(Rng& rng) const;

    double pdf(std::span<const double> v) const;

    // Full joint CDF F_V(v).
    double cdf(std::span<const double> v) const;

    // P(V_j < q_j for all j in mask); mask == 0 gives 1.
    double box_prob(std::span<const double> q, uint32_t mask) const;

    // d/dq_j of box_prob, for j in mask.
    double box_prob_partial(std::span<const double> q, uint32_t mask, int j) const;

    // E[m(V) * 1{V_j < q_j for all j in mask}].
    double box_mean(const AffineFn& m, std::span<const double> q, uint32_t mask) const;

  private:
    int J_;
    std::variant<IndependentUniformSpec, CellGridSpec, GaussianCopulaSpec> spec_;

    // Gaussian-copula precomputations
    std::vector<double> chol_;      // lower Cholesky of corr, row-major J x J
    std::vector<double> corr_inv_;  // row-major J x J
    double corr_logdet_ = 0.0;
    bool exchangeable_ = false;
    double rho_ = 0.0;  // common correlation when exchangeable

    void init_gaussian();
    std::vector<std::vector<int>> corr_components(const std::vector<int>& dims) const;
    double gauss_component_prob(std::span<const double> q, const std::vector<int>& comp) const;
    double gauss_box_prob(std::span<const double> q, uint32_t mask) const;
    double gauss_box_mean_vj(std::span<const double> q, uint32_t mask, int j) const;

    // grid helpers
    double grid_clip_lo(int cell) const;
    double grid_clip_hi(int cell) const;
};

// Validation used by DGP configs: positivity, normalization, PD correlation.
void validate_density(const DensitySpec& d);

}  // namespace hrmt
