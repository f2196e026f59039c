#include "hrmt/dgp.hpp"

#include <cmath>
#include <thread>

namespace hrmt {

int InstrumentSpec::zdim() const {
    if (const auto* u = std::get_if<UniformBoxInstrument>(&law))
        return static_cast<int>(u->lo.size());
    return static_cast<int>(std::get<DiscreteInstrument>(law).support.front().size());
}

std::vector<double> InstrumentSpec::sample(Rng& rng) const {
    if (const auto* u = std::get_if<UniformBoxInstrument>(&law)) {
        std::vector<double> z(u->lo.size());
        for (size_t w = 0; w < z.size(); ++w) z[w] = rng.uniform(u->lo[w], u->hi[w]);
        return z;
    }
    const auto& d = std::get<DiscreteInstrument>(law);
    double u01 = rng.uniform01();
    size_t i = 0;
    for (; i + 1 < d.probs.size(); ++i) {
        if (u01 < d.probs[i]) break;
        u01 -= d.probs[i];
    }
    return d.support[i];
}

double ThresholdSpec::basis_fn(int t, std::span<const double> z) const {
    if (t == 0) return 1.0;
    const int w = (t - 1) / degree;
    const int p = (t - 1) % degree + 1;
    return std::pow(z[w], p);
}

double ThresholdSpec::eval_dim(int j, std::span<const double> z) const {
    double q = 0.0;
    for (int t = 0; t < basis_size(); ++t) q += beta[j][t] * basis_fn(t, z);
    return q;
}

std::vector<double> ThresholdSpec::eval(std::span<const double> z) const {
    std::vector<double> q(J);
    for (int j = 0; j < J; ++j) q[j] = eval_dim(j, z);
    return q;
}

void ThresholdSpec::validate_interior(const InstrumentSpec& instrument, int probe) const {
    Rng rng(0x7a1e5u);
    for (int i = 0; i < probe; ++i) {
        const std::vector<double> z = instrument.sample(rng);
        for (int j = 0; j < J; ++j) {
            const double q = eval_dim(j, z);
            if (!(q > 0.0 && q < 1.0))
                throw InvalidModel("threshold Q_" + std::to_string(j + 1) +
                                   " leaves (0,1) on the instrument support");
        }
    }
}

double gen_outcome(const MtrSpec& m, int k, std::span<const double> v, Rng& rng,
                   const OutcomeConfig& cfg) {
    const double mu = m.eval(k, v);
    if (!(mu > 0.0 && mu < m.ybar))
        throw OutOfRange("gen_outcome: m_k(v) = " + std::to_string(mu) + " outside (0, " +
                         std::to_string(m.ybar) + ")");
    if (cfg.degenerate) return mu;
    // Half of the half-margin to the nearer bound keeps both support points
    // strictly inside (0, ybar); e.g. m = 0.5, ybar = 1 gives {0.375, 0.625}.
    const double delta = std::min(mu, m.ybar - mu) / 4.0;
    return rng.uniform01() < 0.5 ? mu - delta : mu + delta;
}

bool validate_ranking(const MtrSpec& m, int J, int grid_res) {
    std::vector<double> v(J);
    bool ok = true;
    for_each_node(J, grid_res, [&](std::span<const int> mi, size_t) {
        for (int d = 0; d < J; ++d) v[d] = (mi[d] + 1.0) / (grid_res + 1.0);
        for (int k = 1; k < m.T(); ++k)
            if (m.eval(k, v) > m.eval(k + 1, v) + 1e-12) ok = false;
    });
    return ok;
}

Dataset simulate(const DgpSpec& dgp, size_t n_obs, uint64_t seed, const SimulateOptions& opts) {
    dgp.rule.validate();
    const CompletenessResult comp = check_completeness(dgp.rule);
    if (!comp.complete) throw InvalidModel("simulate: rule fails completeness");
    dgp.threshold.validate_interior(dgp.instrument);
    validate_density(dgp.density);

    const AssignmentTable table(decompose_all(dgp.rule));
    const int J = dgp.rule.J;
    const int zdim = dgp.instrument.zdim();

    Dataset ds;
    ds.T = dgp.rule.T;
    ds.zdim = zdim;
    ds.seed = seed;
    ds.y.resize(n_obs);
    ds.d.resize(n_obs);
    ds.z.resize(n_obs * static_cast<size_t>(zdim));
    if (opts.keep_latent) ds.latent_v = std::vector<double>(n_obs * static_cast<size_t>(J));

    auto make_record = [&](size_t i) {
        Rng rng(derive_seed(seed, 0x5ec0bdULL, static_cast<uint64_t>(i)));
        const std::vector<double> z = dgp.instrument.sample(rng);
        const std::vector<double> q = dgp.threshold.eval(z);
        const std::vector<double> v = dgp.density.sample(rng);
        const int k = table.assign(v, q);
        ds.y[i] = gen_outcome(dgp.mtr, k, v, rng, opts.outcome);
        ds.d[i] = k;
        for (int w = 0; w < zdim; ++w) ds.z[i * zdim + w] = z[w];
        if (ds.latent_v)
            for (int d = 0; d < J; ++d) (*ds.latent_v)[i * J + d] = v[d];
    };

    const int nthreads = std::max(1, opts.threads);
    if (nthreads == 1 || n_obs < 1024) {
        for (size_t i = 0; i < n_obs; ++i) make_record(i);
    } else {
        std::vector<std::thread> workers;
        const size_t chunk = (n_obs + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const size_t lo = t * chunk, hi = std::min(n_obs, lo + chunk);
            if (lo >= hi) break;
            workers.emplace_back([&, lo, hi] {
                for (size_t i = lo; i < hi; ++i) make_record(i);
            });
        }
        for (auto& w : workers) w.join();
    }
    return ds;
}

}  // namespace hrmt
