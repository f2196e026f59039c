#pragma once
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace hrmt {

// ---------------------------------------------------------------------------
// Normal distribution helpers
// ---------------------------------------------------------------------------

double normal_pdf(double x);
double normal_cdf(double x);

// Inverse of the standard normal CDF (Wichura's PPND16, ~1e-15 accurate).
double normal_quantile(double p);

// Standard bivariate normal CDF P(X < x, Y < y) with correlation rho,
// after Drezner & Wesolowsky / Genz.
double bvn_cdf(double x, double y, double rho);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadRule {
    std::vector<double> nodes;    // on (-1, 1)
    std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule with n points; cached per n.
const QuadRule& gauss_legendre(int n);

// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, int n) {
    const QuadRule& r = gauss_legendre(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (size_t i = 0; i < r.nodes.size(); ++i)
        s += r.weights[i] * f(mid + half * r.nodes[i]);
    return s * half;
}

// ---------------------------------------------------------------------------
// Low-discrepancy sequence
// ---------------------------------------------------------------------------

// i-th element (i >= 0) of the van der Corput sequence in the given base.
double van_der_corput(uint64_t i, uint32_t base);

// Halton point of dimension `dim` at index `i` (prime bases 2, 3, 5, ...).
std::vector<double> halton_point(uint64_t i, int dim);

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t& state);

// Mix a seed with tags to derive independent substream seeds.
uint64_t derive_seed(uint64_t master, uint64_t tag);
uint64_t derive_seed(uint64_t master, uint64_t tag1, uint64_t tag2);
uint64_t derive_seed(uint64_t master, std::string_view tag);

// Thin wrapper over mt19937_64 that produces platform-stable streams:
// uniforms come straight from the raw bits and normals go through the
// inverse CDF, so no implementation-defined std::*_distribution is involved.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double normal() { return normal_quantile(uniform01()); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return gen_() % n; }

  private:
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

// FNV-1a 64-bit hash (used for artifact/provenance fingerprints).
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a(std::string_view s);

// Sample mean and unbiased variance.
double mean_of(std::span<const double> xs);
double variance_of(std::span<const double> xs);

// Kolmogorov-Smirnov distance between a sample and the standard normal CDF.
double ks_distance_normal(std::vector<double> xs);

}  // namespace hrmt
