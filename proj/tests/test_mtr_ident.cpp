#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hrmt/mtr_ident.hpp"

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

// J=2 bands: treatment 1 is the left band (leading term of rank 1 only),
// treatments 2 and 3 split the right band and have full-rank leading terms.
TreatmentRule band_rule() {
    TreatmentRule r;
    r.J = 2;
    r.T = 3;
    r.cells = {
        {{{Flag::Below, Flag::Free}}},
        {{{Flag::Above, Flag::Below}}},
        {{{Flag::Above, Flag::Above}}},
    };
    return r;
}

MtrSpec ranked_affine() {
    // m_1 <= m_2 <= m_3 on the cube, all within (0, 2)
    MtrSpec m;
    m.ybar = 2.0;
    m.fns = {{0.3, {0.2, 0.1}}, {0.7, {0.2, 0.1}}, {1.1, {0.2, 0.1}}};
    return m;
}

PdfFn uniform_pdf() {
    return [](std::span<const double>) { return 1.0; };
}

}  // namespace

TEST_CASE("full-rank mtr identification recovers an affine response") {
    MtrSpec m{3.0, {{0.2, {0, 0, 0}}, {0.4, {0, 0, 0}}, {0.0, {1, 1, 1}}, {2.9, {0, 0, 0}}}};
    OracleMomentProvider mp(decompose_all(example_rule()),
                            DensitySpec(3, IndependentUniformSpec{}), m);
    const LatticeNd lat =
        identify_mtr_fullrank(mp, uniform_pdf(), 3, Term{-1, 0b111}, 9, FdConfig{0.02});
    double worst = 0.0;
    std::vector<int> mi(3);
    std::vector<double> v(3);
    for (size_t i = 0; i < lat.size(); ++i) {
        lat.multi_index(i, mi);
        for (int d = 0; d < 3; ++d) v[d] = lat.node(mi[d]);
        worst = std::max(worst, std::fabs(lat.values[i] - (v[0] + v[1] + v[2])));
    }
    CHECK(worst <= 1e-4);
    CHECK(lat.interp(std::vector<double>{0.2, 0.3, 0.4}) ==
          doctest::Approx(0.9).epsilon(1e-3));

    // constant responses are recovered as constants
    MtrSpec mc{1.0, {{0.2, {0, 0, 0}}, {0.4, {0, 0, 0}}, {0.6, {0, 0, 0}}, {0.8, {0, 0, 0}}}};
    OracleMomentProvider mpc(decompose_all(example_rule()),
                             DensitySpec(3, IndependentUniformSpec{}), mc);
    const LatticeNd flat =
        identify_mtr_fullrank(mpc, uniform_pdf(), 3, Term{-1, 0b111}, 7, FdConfig{0.02});
    for (double x : flat.values) CHECK(x == doctest::Approx(0.6).epsilon(1e-9));

    CHECK_THROWS_AS(
        identify_mtr_fullrank(mp, uniform_pdf(), 1, Term{1, 0b110}, 7, FdConfig{0.02}),
        NotFullRank);
}

TEST_CASE("conditional mtr over a leading term") {
    MtrSpec m{3.0, {{0.0, {0, 1, 1}}, {0.4, {0, 0, 0}}, {2.0, {0, 0, 0}}, {2.9, {0, 0, 0}}}};
    OracleMomentProvider mp(decompose_all(example_rule()),
                            DensitySpec(3, IndependentUniformSpec{}), m);
    const auto d1 = decompose(example_rule(), 1);
    auto marginal = [](std::span<const double>) { return 1.0; };
    const ConditionalMtr cm =
        conditional_mtr(mp, d1, marginal, 1, Term{1, 0b110}, 11, FdConfig{0.02});
    CHECK(cm.dims == 0b110);
    CHECK(cm.lat.interp(std::vector<double>{0.3, 0.4}) == doctest::Approx(0.7).epsilon(1e-6));

    // response depending only on the uninvolved dim integrates to its mean
    MtrSpec m2{3.0, {{0.5, {1, 0, 0}}, {1.6, {0, 0, 0}}, {2.0, {0, 0, 0}}, {2.9, {0, 0, 0}}}};
    OracleMomentProvider mp2(decompose_all(example_rule()),
                             DensitySpec(3, IndependentUniformSpec{}), m2);
    const ConditionalMtr cm2 =
        conditional_mtr(mp2, d1, marginal, 1, Term{1, 0b110}, 7, FdConfig{0.02});
    for (double x : cm2.lat.values) CHECK(x == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(
        conditional_mtr(mp, d1, marginal, 1, Term{1, 0b010}, 7, FdConfig{0.02}),
        NotLeadingTerm);
}

TEST_CASE("bernstein basis is a partition of unity") {
    BernsteinBasis basis{2, 3};
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> v{rng.uniform01(), rng.uniform01()};
        double s = 0;
        for (int t = 0; t < basis.size(); ++t) {
            const double b = basis.eval(t, v);
            CHECK(b >= 0.0);
            s += b;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("one-dimensional toy systems solve by hand") {
    // 0 <= mhat <= 1 at nodes, one equality: int mhat = 1/2.
    // Degree 0: theta = 1/2 exactly.  Degree 1: mhat(1/2) is pinned at 1/2 by
    // partition of unity; mhat(1/4) ranges over [1/4, 3/4].
    const JointDensity joint = JointDensity::from_spec(
        DensitySpec(1, IndependentUniformSpec{}), 21);

    auto make_system = [&](int degree) {
        ConstraintSystem sys;
        sys.K = {1};
        sys.basis = BernsteinBasis{1, degree};
        sys.ybar = 1.0;
        sys.slack_eq = 0.0;
        sys.slack_in = 0.0;
        const int Tk = sys.basis.size();
        // integral of each bernstein basis over [0,1] is 1/(degree+1)
        ConstraintRow eq;
        eq.kind = ConstraintRow::Kind::Equality;
        eq.coeffs.assign(Tk, 1.0 / (degree + 1));
        eq.rhs = 0.5;
        eq.k = 1;
        sys.rows.push_back(eq);
        for (int i = 0; i <= 20; ++i) {
            const std::vector<double> v{i / 20.0};
            std::vector<double> bv(Tk);
            for (int t = 0; t < Tk; ++t) bv[t] = sys.basis.eval(t, v);
            ConstraintRow hi;
            hi.kind = ConstraintRow::Kind::BoxUpper;
            hi.coeffs = bv;
            hi.rhs = 1.0;
            hi.k = 1;
            sys.rows.push_back(hi);
            ConstraintRow lo;
            lo.kind = ConstraintRow::Kind::BoxLower;
            lo.coeffs = bv;
            for (double& c : lo.coeffs) c = -c;
            lo.rhs = 0.0;
            lo.k = 1;
            sys.rows.push_back(lo);
        }
        return sys;
    };

    const ConstraintSystem deg0 = make_system(0);
    std::vector<double> w0{1.0};  // mhat(0.5) = theta
    const IdentifiedInterval iv0 = bound_functional(deg0, w0);
    REQUIRE(iv0.feasible);
    CHECK(iv0.lower == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(iv0.upper == doctest::Approx(0.5).epsilon(1e-9));

    const ConstraintSystem deg1 = make_system(1);
    std::vector<double> w_mid(2), w_quarter(2);
    for (int t = 0; t < 2; ++t) {
        w_mid[t] = deg1.basis.eval(t, std::vector<double>{0.5});
        w_quarter[t] = deg1.basis.eval(t, std::vector<double>{0.25});
    }
    const IdentifiedInterval iv_mid = bound_functional(deg1, w_mid);
    CHECK(iv_mid.lower == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(iv_mid.upper == doctest::Approx(0.5).epsilon(1e-9));
    const IdentifiedInterval iv_q = bound_functional(deg1, w_quarter);
    CHECK(iv_q.lower == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(iv_q.upper == doctest::Approx(0.75).epsilon(1e-9));

    // brute-force theta-grid search agrees to 1e-9 (optima at grid corners)
    double bf_lo = 1e300, bf_hi = -1e300;
    const int steps = 1000;
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; j <= steps; ++j) {
            const double t0 = static_cast<double>(i) / steps;
            const double t1 = static_cast<double>(j) / steps;
            if (std::fabs((t0 + t1) / 2 - 0.5) > 1e-12) continue;
            const double val = w_quarter[0] * t0 + w_quarter[1] * t1;
            bf_lo = std::min(bf_lo, val);
            bf_hi = std::max(bf_hi, val);
        }
    }
    CHECK(iv_q.lower == doctest::Approx(bf_lo).epsilon(1e-9));
    CHECK(iv_q.upper == doctest::Approx(bf_hi).epsilon(1e-9));
}

TEST_CASE("constraint assembly bookkeeping and joint-density slicing") {
    const auto decomps = decompose_all(band_rule());
    const JointDensity joint =
        JointDensity::from_spec(DensitySpec(2, IndependentUniformSpec{}), 15);
    OracleMomentProvider mp(decomps, DensitySpec(2, IndependentUniformSpec{}),
                            ranked_affine());
    const auto catalog = build_leading_catalog(mp, decomps, joint, 13, FdConfig{0.02});
    // leading terms: k1 {1}; k2 {1,2}; k3 {1,2}
    REQUIRE(catalog.size() == 3);

    BernsteinBasis basis{2, 2};
    ConstraintConfig cfg;
    cfg.nodes_per_family = 16;
    cfg.slack_eq = 1e-4;
    const std::vector<int> K{1, 2};
    const ConstraintSystem sys = build_constraints(K, catalog, joint, basis, 2.0, cfg);

    // row bookkeeping: equalities for K-owned catalog entries, inequalities
    // for each catalog entry against each other member of K, ranking pairs,
    // and two box rows per member node
    int eq = 0, in = 0, rank = 0, box = 0;
    for (const auto& r : sys.rows) {
        switch (r.kind) {
            case ConstraintRow::Kind::Equality: ++eq; break;
            case ConstraintRow::Kind::Inequality: ++in; break;
            case ConstraintRow::Kind::Ranking: ++rank; break;
            default: ++box;
        }
    }
    CHECK(eq == 2 * cfg.nodes_per_family);        // catalog entries for k=1,2
    CHECK(in == 4 * cfg.nodes_per_family);        // (k1 vs 2) (k2 vs 1) (k3 vs 1,2)
    // pair (1,2): pointwise nodes plus integrated rows at the two shared
    // dims-node sets ({1} and {1,2})
    CHECK(rank == 3 * cfg.nodes_per_family);
    CHECK(box == 2 * 2 * cfg.nodes_per_family);   // two members, two sides

    CHECK(feasibility_check(sys));

    // the true sieve projection satisfies every row within slack: evaluate
    // rows at theta = bernstein interpolant of the true responses
    const MtrSpec truth = ranked_affine();
    std::vector<double> theta(sys.nvars());
    const int Tk = basis.size();
    for (size_t b = 0; b < K.size(); ++b) {
        std::vector<int> mi(2);
        for (int t = 0; t < Tk; ++t) {
            basis.decode(t, mi);
            // For affine functions the Bernstein coefficients at the control
            // grid i/degree reproduce the function exactly.
            const std::vector<double> v{mi[0] / 2.0, mi[1] / 2.0};
            theta[b * Tk + t] = truth.eval(K[b], v);
        }
    }
    for (const auto& row : sys.rows) {
        double lhs = 0;
        for (int i = 0; i < sys.nvars(); ++i) lhs += row.coeffs[i] * theta[i];
        if (row.kind == ConstraintRow::Kind::Equality) {
            CHECK(std::fabs(lhs - row.rhs) <= sys.slack_eq + 1e-6);
        } else {
            CHECK(lhs <= row.rhs + 1e-8);
        }
    }
}

TEST_CASE("pruning rules") {
    const auto decomps = decompose_all(example_rule());
    std::map<int, std::vector<Term>> leading;
    for (int k = 1; k <= 4; ++k) leading[k] = leading_terms(decomps[k - 1]);

    MtrSpec mc{1.0, {{0.2, {0, 0, 0}}, {0.4, {0, 0, 0}}, {0.6, {0, 0, 0}}, {0.8, {0, 0, 0}}}};
    OracleMomentProvider mp(decomps, DensitySpec(3, IndependentUniformSpec{}), mc);
    const JointDensity joint =
        JointDensity::from_spec(DensitySpec(3, IndependentUniformSpec{}), 11);
    const auto catalog = build_leading_catalog(mp, decomps, joint, 9, FdConfig{0.02});

    BernsteinBasis basis{3, 1};
    ConstraintConfig cfg;
    cfg.nodes_per_family = 8;
    cfg.slack_eq = 1e-4;

    SUBCASE("chained elimination for K={1}") {
        const ConstraintSystem sys = build_constraints({1}, catalog, joint, basis, 1.0, cfg);
        PruneStats st;
        const ConstraintSystem pruned = prune_redundant(sys, leading, &st);
        // rows against treatments 3 and 4 (via {1,2,3}) drop through k'=2
        CHECK(st.chained == 2 * cfg.nodes_per_family);
        int kept_vs3 = 0, kept_vs2 = 0;
        for (const auto& r : pruned.rows) {
            if (r.kind != ConstraintRow::Kind::Inequality) continue;
            if (r.other_k == 2) ++kept_vs2;
            if (r.other_k == 3) ++kept_vs3;
        }
        CHECK(kept_vs2 == cfg.nodes_per_family);
        CHECK(kept_vs3 == 0);

        // pruning neutrality: identical bounds with and without pruned rows
        std::vector<double> w(sys.nvars(), 0.0);
        for (int t = 0; t < basis.size(); ++t)
            w[t] = basis.eval(t, std::vector<double>{0.4, 0.6, 0.5});
        const IdentifiedInterval a = bound_functional(sys, w);
        const IdentifiedInterval b = bound_functional(pruned, w);
        REQUIRE(a.feasible);
        REQUIRE(b.feasible);
        CHECK(a.lower == doctest::Approx(b.lower).epsilon(1e-9));
        CHECK(a.upper == doctest::Approx(b.upper).epsilon(1e-9));
    }

    SUBCASE("own-superset elimination for K={2}") {
        const ConstraintSystem sys = build_constraints({2}, catalog, joint, basis, 1.0, cfg);
        PruneStats st;
        const ConstraintSystem pruned = prune_redundant(sys, leading, &st);
        // treatment 2 owns {1,2,3}: every data-side term is included in it
        for (const auto& r : pruned.rows)
            CHECK(r.kind != ConstraintRow::Kind::Inequality);
        CHECK(st.own_superset > 0);
    }

    SUBCASE("joint case drops rows between members of K") {
        const ConstraintSystem sys =
            build_constraints({1, 2}, catalog, joint, basis, 1.0, cfg);
        PruneStats st;
        const ConstraintSystem pruned = prune_redundant(sys, leading, &st);
        // the family (k=1 data-side treatment 2) falls to the joint rule
        CHECK(st.within_K == cfg.nodes_per_family);
        for (const auto& r : pruned.rows) {
            if (r.kind != ConstraintRow::Kind::Inequality) continue;
            CHECK(sys.block_of(r.other_k) < 0);
        }
    }
}

TEST_CASE("subset-direction is not pruned") {
    // chained rule requires l'' included in the middle treatment's term;
    // when instead l' subset l'', the row must stay
    std::map<int, std::vector<Term>> leading;
    leading[1] = {Term{1, 0b001}};
    leading[2] = {Term{1, 0b001}};  // middle owns {1} only
    leading[3] = {Term{1, 0b010}};

    ConstraintSystem sys;
    sys.K = {3};
    sys.basis = BernsteinBasis{2, 1};
    sys.ybar = 1.0;
    ConstraintRow row;
    row.kind = ConstraintRow::Kind::Inequality;
    row.coeffs.assign(sys.nvars(), 0.0);
    row.rhs = 0.5;
    row.k = 3;
    row.other_k = 1;
    row.dims = 0b011;  // data-side dims {1,2} not included in {1}
    sys.rows.push_back(row);
    const ConstraintSystem pruned = prune_redundant(sys, leading);
    CHECK(pruned.rows.size() == 1);
}

TEST_CASE("full-rank treatments degenerate to near-point intervals") {
    const auto decomps = decompose_all(band_rule());
    OracleMomentProvider mp(decomps, DensitySpec(2, IndependentUniformSpec{}),
                            ranked_affine());
    const JointDensity joint =
        JointDensity::from_spec(DensitySpec(2, IndependentUniformSpec{}), 15);
    const auto catalog = build_leading_catalog(mp, decomps, joint, 13, FdConfig{0.02});

    BernsteinBasis basis{2, 1};  // affine truth lies in the sieve space
    ConstraintConfig cfg;
    cfg.nodes_per_family = 16;
    cfg.slack_eq = 1e-5;
    const ConstraintSystem sys = build_constraints({3}, catalog, joint, basis, 2.0, cfg);

    std::vector<double> w(sys.nvars());
    const std::vector<double> at{0.3, 0.7};
    for (int t = 0; t < basis.size(); ++t) w[t] = basis.eval(t, at);
    const IdentifiedInterval iv = bound_functional(sys, w);
    REQUIRE(iv.feasible);
    const MtrSpec truth = ranked_affine();
    const double true_val = truth.eval(3, at);
    CHECK(iv.lower <= true_val + 1e-6);
    CHECK(iv.upper >= true_val - 1e-6);
    CHECK(iv.upper - iv.lower <= 2 * cfg.slack_eq + 1e-3);
}

TEST_CASE("feasibility responds to slack") {
    ConstraintSystem sys;
    sys.K = {1};
    sys.basis = BernsteinBasis{1, 0};
    sys.ybar = 1.0;
    sys.slack_eq = 0.01;
    ConstraintRow a;
    a.kind = ConstraintRow::Kind::Equality;
    a.coeffs = {1.0};
    a.rhs = 0.5;
    a.k = 1;
    ConstraintRow b = a;
    b.rhs = 0.6;  // contradicts a beyond the slack
    sys.rows = {a, b};
    CHECK(!feasibility_check(sys));
    sys.slack_eq = 0.06;  // widening the slack restores feasibility
    CHECK(feasibility_check(sys));
}

TEST_CASE("adding treatments to K never widens a member's interval") {
    const auto decomps = decompose_all(band_rule());
    OracleMomentProvider mp(decomps, DensitySpec(2, IndependentUniformSpec{}),
                            ranked_affine());
    const JointDensity joint =
        JointDensity::from_spec(DensitySpec(2, IndependentUniformSpec{}), 15);
    const auto catalog = build_leading_catalog(mp, decomps, joint, 13, FdConfig{0.02});

    BernsteinBasis basis{2, 2};
    ConstraintConfig cfg;
    cfg.nodes_per_family = 16;
    cfg.slack_eq = 1e-3;

    const ConstraintSystem solo = build_constraints({1}, catalog, joint, basis, 2.0, cfg);
    const ConstraintSystem joint_sys =
        build_constraints({1, 2}, catalog, joint, basis, 2.0, cfg);

    const std::vector<double> at{0.4, 0.6};
    std::vector<double> w1(solo.nvars(), 0.0), w2(joint_sys.nvars(), 0.0);
    for (int t = 0; t < basis.size(); ++t) {
        const double b = basis.eval(t, at);
        w1[t] = b;
        w2[joint_sys.block_of(1) * basis.size() + t] = b;
    }
    const IdentifiedInterval iv1 = bound_functional(solo, w1);
    const IdentifiedInterval iv2 = bound_functional(joint_sys, w2);
    REQUIRE(iv1.feasible);
    REQUIRE(iv2.feasible);
    CHECK(iv2.lower >= iv1.lower - 1e-9);
    CHECK(iv2.upper <= iv1.upper + 1e-9);
}
