#pragma once
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hrmt/dgp.hpp"

namespace hrmt {

// Central-difference settings. The stencil is tensor-composed over the
// requested dimension subset; every stencil point must stay inside (0,1).
struct FdConfig {
    double h = 0.05;
};

// Observable conditional moments of the model, queried at threshold values q:
//   cond_prob(k, q)           = Pr(D = k | Q(Z) = q)
//   cond_outcome_moment(k, q) = E[Y 1{D = k} | Q(Z) = q]
class MomentProvider {
  public:
    virtual ~MomentProvider() = default;
    virtual int dim() const = 0;
    virtual int treatments() const = 0;
    virtual double ybar() const = 0;
    virtual double cond_prob(int k, std::span<const double> q) const = 0;
    virtual double cond_outcome_moment(int k, std::span<const double> q) const = 0;
};

// Exact moments computed from a known DGP via the rectangle-partition
// integrals; no kernel or sampling error.
class OracleMomentProvider : public MomentProvider {
  public:
    OracleMomentProvider(std::vector<Decomposition> decomps, DensitySpec density, MtrSpec mtr);

    int dim() const override { return density_.J(); }
    int treatments() const override { return static_cast<int>(decomps_.size()); }
    double ybar() const override { return mtr_.ybar; }
    double cond_prob(int k, std::span<const double> q) const override;
    double cond_outcome_moment(int k, std::span<const double> q) const override;

  private:
    std::vector<Decomposition> decomps_;
    DensitySpec density_;
    MtrSpec mtr_;
};

struct KernelConfig {
    std::vector<double> bandwidth;  // per dimension; empty = rule of thumb
    double n_min = 5.0;             // minimum effective local sample size
    double rot_constant = 3.5;      // Epanechnikov scaling of the rule of thumb
};

// Nadaraya-Watson regression of 1{d=k} and y*1{d=k} on observed threshold
// values, with a product Epanechnikov kernel and a uniform-bin spatial index.
// Read-only after construction.
class KernelMomentProvider : public MomentProvider {
  public:
    // q_points: n x J row-major threshold values Q(z_i).
    KernelMomentProvider(std::vector<double> q_points, std::vector<int> d,
                         std::vector<double> y, int J, int T, double ybar,
                         KernelConfig cfg = {});

    // Convenience: computes Q(z_i) from a dataset and a known threshold.
    static KernelMomentProvider from_dataset(const Dataset& ds, const ThresholdSpec& threshold,
                                             double ybar, KernelConfig cfg = {});

    int dim() const override { return J_; }
    int treatments() const override { return T_; }
    double ybar() const override { return ybar_; }
    double cond_prob(int k, std::span<const double> q) const override;
    double cond_outcome_moment(int k, std::span<const double> q) const override;

    const std::vector<double>& bandwidth() const { return h_; }

  private:
    int J_, T_;
    double ybar_;
    double n_min_;
    std::vector<double> q_;  // n x J
    std::vector<int> d_;
    std::vector<double> y_;
    std::vector<double> h_;

    // uniform-bin index
    int nbins_ = 1;
    std::vector<std::vector<uint32_t>> bins_;

    size_t n() const { return d_.size(); }
    int bin_of(int dim, double x) const;
    size_t bin_index(std::span<const int> mi) const;

    struct Acc { double wsum = 0, wy = 0, w2 = 0; };
    Acc accumulate(int k, std::span<const double> q, bool outcome) const;
};

// Tensor central-difference estimate of the mixed partial of `moment` over
// the dimension subset `dims_mask`, at q.  O(h^2) for C^3 integrands.
double mixed_partial(const std::function<double(std::span<const double>)>& moment,
                     std::span<const double> q, uint32_t dims_mask, const FdConfig& fd);

}  // namespace hrmt
