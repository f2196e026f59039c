#include "hrmt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace hrmt {

double normal_pdf(double x) {
    static const double inv_sqrt2pi = 0.3989422804014326779;
    return inv_sqrt2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

double normal_quantile(double p) {
    // Wichura (1988), algorithm AS 241, PPND16.
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0 ? -val : val;
}

double bvn_cdf(double x, double y, double rho) {
    // Genz (2004) reformulation of Drezner & Wesolowsky.  Computes
    // P(X > -x, Y > -y) style complement internally; we want P(X<x, Y<y).
    if (rho < -1.0 || rho > 1.0) throw std::domain_error("bvn_cdf: |rho| > 1");
    if (rho == 0.0) return normal_cdf(x) * normal_cdf(y);
    if (rho == 1.0) return normal_cdf(std::min(x, y));
    if (rho == -1.0) return std::max(0.0, normal_cdf(x) + normal_cdf(y) - 1.0);

    const double h = -x, k = -y;
    double bvn = 0.0;
    static const double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static const double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static const double w12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                 0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
    static const double x12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                 0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static const double w20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                 0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                 0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                 0.1527533871307259};
    static const double x20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                 0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                 0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                 0.07652652113349733};
    const double* wg;
    const double* xg;
    int ng;
    const double arho = std::fabs(rho);
    if (arho < 0.3) { wg = w6; xg = x6; ng = 3; }
    else if (arho < 0.75) { wg = w12; xg = x12; ng = 6; }
    else { wg = w20; xg = x20; ng = 10; }

    if (arho < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(rho);
        for (int i = 0; i < ng; ++i) {
            for (int s = -1; s <= 1; s += 2) {
                const double sn = std::sin(asr * (s * xg[i] + 1.0) / 2.0);
                bvn += wg[i] * std::exp((sn * h * k - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / (4.0 * M_PI) + normal_cdf(-h) * normal_cdf(-k);
    } else {
        double hh = h, kk = k;
        if (rho < 0.0) kk = -kk;
        const double hk = hh * kk;
        if (arho < 1.0) {
            const double as = (1.0 - rho) * (1.0 + rho);
            double a = std::sqrt(as);
            const double bs = (hh - kk) * (hh - kk);
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 16.0;
            const double asr2 = -(bs / as + hk) / 2.0;
            if (asr2 > -100.0)
                bvn = a * std::exp(asr2) *
                      (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
            if (-hk < 100.0) {
                const double b = std::sqrt(bs);
                bvn -= std::exp(-hk / 2.0) * std::sqrt(2.0 * M_PI) * normal_cdf(-b / a) * b *
                       (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (int i = 0; i < ng; ++i) {
                for (int s = -1; s <= 1; s += 2) {
                    const double xs = a * (s * xg[i] + 1.0);
                    const double xs2 = xs * xs;
                    const double rs = std::sqrt(1.0 - xs2);
                    const double asr3 = -(bs / xs2 + hk) / 2.0;
                    if (asr3 > -100.0) {
                        bvn += a * wg[i] * std::exp(asr3) *
                               (std::exp(-hk * xs2 / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs -
                                (1.0 + c * xs2 * (1.0 + d * xs2)));
                    }
                }
            }
            bvn = -bvn / (2.0 * M_PI);
        }
        if (rho > 0.0) bvn += normal_cdf(-std::max(hh, kk));
        else {
            bvn = -bvn;
            if (kk > hh) bvn += normal_cdf(kk) - normal_cdf(hh);
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

const QuadRule& gauss_legendre(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    // Newton iteration on Legendre polynomials.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

double van_der_corput(uint64_t i, uint32_t base) {
    double f = 1.0, r = 0.0;
    ++i;  // skip the zero point
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

std::vector<double> halton_point(uint64_t i, int dim) {
    static const uint32_t primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                      41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    if (dim > 24) throw std::domain_error("halton_point: dim > 24");
    std::vector<double> p(dim);
    for (int d = 0; d < dim; ++d) p[d] = van_der_corput(i, primes[d]);
    return p;
}

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, uint64_t tag) {
    uint64_t s = master ^ (0x9e3779b97f4a7c15ULL + tag);
    uint64_t a = splitmix64(s);
    uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

uint64_t derive_seed(uint64_t master, uint64_t tag1, uint64_t tag2) {
    return derive_seed(derive_seed(master, tag1), tag2);
}

uint64_t derive_seed(uint64_t master, std::string_view tag) {
    return derive_seed(master, fnv1a(tag));
}

uint64_t fnv1a(const void* data, size_t n, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double variance_of(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double ks_distance_normal(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double f = normal_cdf(xs[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

}  // namespace hrmt
