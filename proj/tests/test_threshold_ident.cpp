#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hrmt/threshold_ident.hpp"

using namespace hrmt;

namespace {

TreatmentRule example_rule() {
    TreatmentRule r;
    r.J = 3;
    r.T = 4;
    r.cells = {
        {{{Flag::Free, Flag::Below, Flag::Below}}},
        {{{Flag::Above, Flag::Below, Flag::Above}}, {{Flag::Above, Flag::Above, Flag::Below}}},
        {{{Flag::Above, Flag::Above, Flag::Above}}},
        {{{Flag::Below, Flag::Below, Flag::Above}}, {{Flag::Below, Flag::Above, Flag::Free}}},
    };
    return r;
}

// One threshold per axis, four quadrant treatments (J=2).
TreatmentRule quadrant_rule() {
    TreatmentRule r;
    r.J = 2;
    r.T = 4;
    r.cells = {
        {{{Flag::Below, Flag::Below}}},
        {{{Flag::Below, Flag::Above}}},
        {{{Flag::Above, Flag::Below}}},
        {{{Flag::Above, Flag::Above}}},
    };
    return r;
}

DgpSpec example_dgp(double b0, double b1) {
    MtrSpec m;
    m.ybar = 1.0;
    for (int k = 1; k <= 4; ++k) m.fns.push_back({0.2 * k, {0, 0, 0}});
    return DgpSpec{example_rule(), DensitySpec(3, IndependentUniformSpec{}), m,
                   ThresholdSpec{3, 1, 1, {{b0, b1}, {b0, b1}, {b0, b1}}},
                   InstrumentSpec{UniformBoxInstrument{{0.0}, {1.0}}}};
}

}  // namespace

TEST_CASE("coefficient matrix and rank of the example rule") {
    const auto ds = decompose_all(example_rule());
    const CoefficientMatrix cm = coefficient_matrix(ds);
    CHECK(cm.T == 4);
    CHECK(cm.at(1, 0b110) == 1);
    CHECK(cm.at(2, 0b111) == 2);
    CHECK(cm.at(4, 0b001) == 1);
    CHECK(cm.at(4, 0b111) == -1);

    const RankResult r = rank_condition_check(cm, 3);
    CHECK(r.rank == 3);
    CHECK(r.satisfied);
}

TEST_CASE("rank of degenerate rules") {
    TreatmentRule r;
    r.J = 1;
    r.T = 1;
    r.cells = {{{{Flag::Free}}}};
    const RankResult res = rank_condition_check(coefficient_matrix(decompose_all(r)), 1);
    CHECK(res.rank == 0);
    CHECK(!res.satisfied);

    // corner pair plus complement: two rows, rank at most 2 < J = 3
    TreatmentRule c;
    c.J = 3;
    c.T = 2;
    c.cells.resize(2);
    c.cells[0] = {{{Flag::Below, Flag::Below, Flag::Below}},
                  {{Flag::Above, Flag::Above, Flag::Above}}};
    for (uint32_t s = 1; s < 7; ++s) {
        CellSpec cell;
        for (int j = 0; j < 3; ++j)
            cell.flags.push_back(((s >> j) & 1u) ? Flag::Below : Flag::Above);
        c.cells[1].push_back(cell);
    }
    const RankResult res2 = rank_condition_check(coefficient_matrix(decompose_all(c)), 3);
    CHECK(res2.rank < 3);
    CHECK(!res2.satisfied);
}

TEST_CASE("predicted probabilities match the region masses") {
    const auto ds = decompose_all(example_rule());
    DensitySpec fv(3, IndependentUniformSpec{});
    const std::vector<double> q{0.5, 0.5, 0.5};
    CHECK(predicted_prob(ds[3], q, fv) == doctest::Approx(0.375).epsilon(1e-12));
    double sum = 0;
    for (int k = 0; k < 4; ++k) sum += predicted_prob(ds[k], q, fv);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // empty-region limit: treatment 1 needs V2<q2, V3<q3
    const std::vector<double> q0{0.5, 1e-9, 0.5};
    CHECK(predicted_prob(ds[0], q0, fv) == doctest::Approx(0.0).epsilon(1e-8));

    CHECK_THROWS_AS(predicted_prob(ds[0], std::vector<double>{0.5, 1.5, 0.5}, fv),
                    DomainError);
}

TEST_CASE("loss is zero at the truth and grows under perturbation") {
    const auto ds = decompose_all(example_rule());
    DensitySpec fv(3, IndependentUniformSpec{});
    // oracle probability points on a z grid for Q_j(z) = 0.2 + 0.5 z
    std::vector<ProbPoint> points;
    for (int i = 0; i < 21; ++i) {
        ProbPoint pt;
        pt.z = {i / 20.0};
        const double q = 0.2 + 0.5 * pt.z[0];
        const std::vector<double> qv{q, q, q};
        for (int k = 0; k < 4; ++k) pt.probs.push_back(predicted_prob(ds[k], qv, fv));
        pt.weight = 1.0 / 21;
        points.push_back(pt);
    }
    const ThresholdSpec truth{3, 1, 1, {{0.2, 0.5}, {0.2, 0.5}, {0.2, 0.5}}};
    CHECK(total_loss(ds, points, truth, fv) == doctest::Approx(0.0).epsilon(1e-15));

    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        ThresholdSpec pert = truth;
        const int j = static_cast<int>(rng.below(3));
        const int c = static_cast<int>(rng.below(2));
        pert.beta[j][c] += rng.uniform01() < 0.5 ? 0.1 : -0.1;
        CHECK(total_loss(ds, points, pert, fv) > 1e-6);
    }
}

TEST_CASE("fit recovers the true coefficients from oracle-binned shares") {
    const DgpSpec dgp = example_dgp(0.2, 0.5);
    const Dataset data = simulate(dgp, 100000, 42);
    const auto points = binned_probs(data, 50);
    const auto ds = decompose_all(dgp.rule);

    OptimizerConfig cfg;
    cfg.seed = 1;
    const ThresholdEstimate est =
        fit_threshold(ds, 3, points, dgp.density, 1, 1, cfg);
    CHECK(est.identified);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::fabs(est.spec.beta[j][0] - 0.2) <= 0.02);
        CHECK(std::fabs(est.spec.beta[j][1] - 0.5) <= 0.02);
    }
    // loss decreases monotonically along accepted steps
    for (size_t i = 1; i < est.loss_trace.size(); ++i)
        CHECK(est.loss_trace[i] <= est.loss_trace[i - 1] + 1e-15);
}

TEST_CASE("constant thresholds recovered with a degree-0 basis") {
    // Oracle-binned shares: the loss minimum sits exactly at the truth.  (The
    // symmetric point q2 = q3 is locally flat along the swap direction, so
    // only noise-free shares give tight recovery here.)
    const auto ds = decompose_all(example_rule());
    DensitySpec fv(3, IndependentUniformSpec{});
    std::vector<ProbPoint> points;
    for (int i = 0; i < 20; ++i) {
        ProbPoint pt;
        pt.z = {(i + 0.5) / 20.0};
        const std::vector<double> qv{0.5, 0.5, 0.5};
        for (int k = 0; k < 4; ++k) pt.probs.push_back(predicted_prob(ds[k], qv, fv));
        pt.weight = 1.0 / 20;
        points.push_back(pt);
    }
    OptimizerConfig cfg;
    cfg.seed = 2;
    const ThresholdEstimate est = fit_threshold(ds, 3, points, fv, 1, 0, cfg);
    for (int j = 0; j < 3; ++j) CHECK(std::fabs(est.spec.beta[j][0] - 0.5) <= 0.01);
}

TEST_CASE("rank-deficient rules still return an estimate, flagged unidentified") {
    TreatmentRule r;
    r.J = 2;
    r.T = 2;
    r.cells = {{{{Flag::Below, Flag::Free}}}, {{{Flag::Above, Flag::Free}}}};
    const auto ds = decompose_all(r);
    DensitySpec fv(2, IndependentUniformSpec{});
    std::vector<ProbPoint> points;
    for (int i = 0; i < 11; ++i) {
        ProbPoint pt;
        pt.z = {i / 10.0};
        const double q1 = 0.3 + 0.3 * pt.z[0];
        pt.probs = {q1, 1.0 - q1};
        pt.weight = 1.0 / 11;
        points.push_back(pt);
    }
    OptimizerConfig cfg;
    cfg.seed = 3;
    const ThresholdEstimate est = fit_threshold(ds, 2, points, fv, 1, 1, cfg);
    CHECK(!est.identified);
    CHECK(est.rank.rank == 1);
    // the involved dimension is still pinned by the data
    CHECK(std::fabs(est.spec.beta[0][0] - 0.3) <= 0.02);
    CHECK(std::fabs(est.spec.beta[0][1] - 0.3) <= 0.02);
}

TEST_CASE("singleton-equation inversion agrees with the joint fit") {
    // Quadrant rule: P(D=1)+P(D=2) = F_V(q1, 1) pins q1 directly; similarly
    // P(D=1)+P(D=3) pins q2.  The joint fit must agree with that inversion.
    const TreatmentRule r = quadrant_rule();
    const auto ds = decompose_all(r);
    DensitySpec fv(2, IndependentUniformSpec{});

    const double true_b0 = 0.3, true_b1 = 0.4;
    std::vector<ProbPoint> points;
    for (int i = 0; i < 26; ++i) {
        ProbPoint pt;
        pt.z = {i / 25.0};
        const double q = true_b0 + true_b1 * pt.z[0];
        const std::vector<double> qv{q, q};
        for (int k = 0; k < 4; ++k) pt.probs.push_back(predicted_prob(ds[k], qv, fv));
        pt.weight = 1.0 / 26;
        points.push_back(pt);
    }
    OptimizerConfig cfg;
    cfg.seed = 4;
    const ThresholdEstimate est = fit_threshold(ds, 2, points, fv, 1, 1, cfg);

    for (const ProbPoint& pt : points) {
        // monotone inversion of the singleton equation under uniform F_V:
        // F_V(q1, 1) = q1 = P(D=1) + P(D=2)
        const double q1_direct = pt.probs[0] + pt.probs[1];
        const double q1_joint = interior_link(est.spec.eval_dim(0, pt.z));
        CHECK(std::fabs(q1_direct - q1_joint) <= 5e-3);
        const double q2_direct = pt.probs[0] + pt.probs[2];
        const double q2_joint = interior_link(est.spec.eval_dim(1, pt.z));
        CHECK(std::fabs(q2_direct - q2_joint) <= 5e-3);
    }
}

TEST_CASE("estimation error shrinks with sample size") {
    std::vector<double> errs;
    for (size_t n : {size_t(1000), size_t(10000), size_t(100000)}) {
        std::vector<double> seed_errs;
        for (uint64_t s = 0; s < 5; ++s) {
            const DgpSpec dgp = example_dgp(0.2, 0.5);
            const Dataset data = simulate(dgp, n, 100 + s);
            const auto points = binned_probs(data, n >= 100000 ? 50 : 20);
            OptimizerConfig cfg;
            cfg.seed = s;
            cfg.restarts = 2;
            const ThresholdEstimate est =
                fit_threshold(decompose_all(dgp.rule), 3, points, dgp.density, 1, 1, cfg);
            double err = 0;
            for (int j = 0; j < 3; ++j)
                err = std::max({err, std::fabs(est.spec.beta[j][0] - 0.2),
                                std::fabs(est.spec.beta[j][1] - 0.5)});
            seed_errs.push_back(err);
        }
        std::sort(seed_errs.begin(), seed_errs.end());
        errs.push_back(seed_errs[2]);  // median of 5
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
}

TEST_CASE("interior link") {
    CHECK(interior_link(0.5) == 0.5);
    CHECK(interior_link(0.02) == 0.02);
    CHECK(interior_link(-5.0) > 0.0);
    CHECK(interior_link(-5.0) < 0.01);
    CHECK(interior_link(7.0) < 1.0);
    CHECK(interior_link(7.0) > 0.99);
    // C1 at the knots
    const double h = 1e-7;
    const double num_d = (interior_link(0.01 + h) - interior_link(0.01 - h)) / (2 * h);
    CHECK(num_d == doctest::Approx(interior_link_deriv(0.01)).epsilon(1e-4));
}
