#pragma once
#include <cmath>
#include <span>
#include <vector>

namespace hrmt {

// Tensor-product Bernstein basis on [0,1]^J with common per-dimension degree.
// Nonnegative and a partition of unity, so coefficient boxes translate
// directly into function-value boxes at the nodes.
struct BernsteinBasis {
    int J = 0;
    int degree = 0;

    int size() const {
        int s = 1;
        for (int d = 0; d < J; ++d) s *= degree + 1;
        return s;
    }

    // dim 0 slowest, matching LatticeNd ordering
    void decode(int t, std::span<int> mi) const {
        for (int d = J - 1; d >= 0; --d) {
            mi[d] = t % (degree + 1);
            t /= (degree + 1);
        }
    }

    static double bern1d(int m, int i, double x) {
        double binom = 1.0;
        for (int r = 0; r < i; ++r) binom = binom * (m - r) / (r + 1);
        return binom * std::pow(x, i) * std::pow(1.0 - x, m - i);
    }

    double eval(int t, std::span<const double> v) const {
        std::vector<int> mi(J);
        decode(t, mi);
        double out = 1.0;
        for (int d = 0; d < J; ++d) out *= bern1d(degree, mi[d], v[d]);
        return out;
    }

    // Evaluate the sieve function sum_t theta_t b_t(v).
    double combine(std::span<const double> theta, std::span<const double> v) const {
        double s = 0.0;
        for (int t = 0; t < size(); ++t) s += theta[t] * eval(t, v);
        return s;
    }
};

}  // namespace hrmt
