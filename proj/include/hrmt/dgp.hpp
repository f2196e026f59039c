#pragma once
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "hrmt/density.hpp"
#include "hrmt/rect.hpp"
#include "hrmt/stats.hpp"

namespace hrmt {

// Marginal treatment responses m_k(v) = E[Y_k | V=v], one affine function per
// treatment, with the common outcome bound Ybar.
struct MtrSpec {
    double ybar = 1.0;
    std::vector<AffineFn> fns;  // size T

    int T() const { return static_cast<int>(fns.size()); }
    double eval(int k, std::span<const double> v) const { return fns[k - 1](v); }
};

// Instrument law: uniform over a box, or a finite discrete support.
struct UniformBoxInstrument {
    std::vector<double> lo, hi;
};
struct DiscreteInstrument {
    std::vector<std::vector<double>> support;
    std::vector<double> probs;  // same length, sums to 1
};
struct InstrumentSpec {
    std::variant<UniformBoxInstrument, DiscreteInstrument> law;

    int zdim() const;
    std::vector<double> sample(Rng& rng) const;
};

// Threshold functions Q_j(z) as polynomials in each instrument coordinate:
// Q_j(z) = beta[j][0] + sum_w sum_{p=1..degree} beta[j][1 + w*degree + (p-1)] z_w^p.
struct ThresholdSpec {
    int J = 0;
    int zdim = 0;
    int degree = 0;
    std::vector<std::vector<double>> beta;  // J x (1 + zdim*degree)

    int basis_size() const { return 1 + zdim * degree; }
    double basis_fn(int t, std::span<const double> z) const;
    double eval_dim(int j, std::span<const double> z) const;  // j is 0-based
    std::vector<double> eval(std::span<const double> z) const;

    // Checks Q_j(z) in (0,1) on a probe of the instrument support.
    void validate_interior(const InstrumentSpec& instrument, int probe = 256) const;
};

// Observed records: outcome, treatment, instrument.  Latent heterogeneity is
// optionally retained for oracle checks.
struct Dataset {
    int T = 0;
    int zdim = 0;
    uint64_t seed = 0;
    std::vector<double> y;
    std::vector<int> d;
    std::vector<double> z;  // n x zdim row-major
    std::optional<std::vector<double>> latent_v;  // n x J row-major

    size_t n() const { return y.size(); }
    std::span<const double> z_row(size_t i) const {
        return {z.data() + i * static_cast<size_t>(zdim), static_cast<size_t>(zdim)};
    }
};

// Full synthetic data-generating process.
struct DgpSpec {
    TreatmentRule rule;
    DensitySpec density;
    MtrSpec mtr;
    ThresholdSpec threshold;
    InstrumentSpec instrument;
};

// One outcome draw: a two-point distribution at m_k(v) +- delta with
// delta = spread * min(m, ybar - m) / ... see gen_outcome below.  With
// spread = 0 the outcome is degenerate at the mean.
struct OutcomeConfig {
    bool degenerate = false;
};

// Draw y with E[y | v, k] = m_k(v) exactly, supported on (0, ybar):
// two points m +- delta, delta = min(m, ybar - m)/2, equal probability.
double gen_outcome(const MtrSpec& m, int k, std::span<const double> v, Rng& rng,
                   const OutcomeConfig& cfg = {});

// True iff m_1(v) <= ... <= m_T(v) at every node of a uniform grid with the
// given per-dimension resolution.
bool validate_ranking(const MtrSpec& m, int J, int grid_res);

struct SimulateOptions {
    bool keep_latent = false;
    OutcomeConfig outcome;
    int threads = 1;
};

// Simulate N_o records.  Per-record RNG substreams are derived from the seed
// and the record index, so results do not depend on scheduling.
Dataset simulate(const DgpSpec& dgp, size_t n_obs, uint64_t seed,
                 const SimulateOptions& opts = {});

}  // namespace hrmt
