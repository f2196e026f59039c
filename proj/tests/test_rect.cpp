#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>

#include "hrmt/rect.hpp"
#include "hrmt/stats.hpp"

using namespace hrmt;

namespace {

// The three-test training-program rule: J=3 scores, T=4 groups.
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

// Complement pair of corner boxes: d = S1S2S3 + (1-S1)(1-S2)(1-S3), plus the
// rest of the cube as a second treatment.
TreatmentRule corners_rule() {
    TreatmentRule r;
    r.J = 3;
    r.T = 2;
    r.cells.resize(2);
    r.cells[0] = {{{Flag::Below, Flag::Below, Flag::Below}},
                  {{Flag::Above, Flag::Above, Flag::Above}}};
    // complement: enumerate the remaining six sign cells
    for (uint32_t s = 0; s < 8; ++s) {
        if (s == 7u || s == 0u) continue;
        CellSpec c;
        for (int j = 0; j < 3; ++j)
            c.flags.push_back(((s >> j) & 1u) ? Flag::Below : Flag::Above);
        r.cells[1].push_back(c);
    }
    return r;
}

uint32_t mask(std::initializer_list<int> dims) {
    uint32_t m = 0;
    for (int j : dims) m |= 1u << (j - 1);
    return m;
}

// Random valid rule: partition the 2^J sign cells among T treatments.
TreatmentRule random_rule(Rng& rng, int J, int T) {
    TreatmentRule r;
    r.J = J;
    r.T = T;
    r.cells.resize(T);
    const uint32_t ncell = 1u << J;
    std::vector<int> owner(ncell);
    for (uint32_t s = 0; s < ncell; ++s) owner[s] = static_cast<int>(rng.below(T));
    // ensure every treatment owns at least one cell
    for (int k = 0; k < T; ++k) owner[rng.below(ncell)] = k;
    for (uint32_t s = 0; s < ncell; ++s) {
        CellSpec c;
        for (int j = 0; j < J; ++j)
            c.flags.push_back(((s >> j) & 1u) ? Flag::Below : Flag::Above);
        r.cells[owner[s]].push_back(c);
    }
    return r;
}

}  // namespace

TEST_CASE("decomposition of the example rule reproduces the printed polynomials") {
    const TreatmentRule r = example_rule();

    const Decomposition d1 = decompose(r, 1);
    CHECK(d1.constant == 0);
    CHECK(d1.terms == std::map<uint32_t, int>{{mask({2, 3}), 1}});

    const Decomposition d2 = decompose(r, 2);
    CHECK(d2.constant == 0);
    CHECK(d2.terms == std::map<uint32_t, int>{{mask({2}), 1},
                                              {mask({3}), 1},
                                              {mask({1, 2}), -1},
                                              {mask({1, 3}), -1},
                                              {mask({2, 3}), -2},
                                              {mask({1, 2, 3}), 2}});

    const Decomposition d3 = decompose(r, 3);
    CHECK(d3.constant == 1);
    CHECK(d3.terms == std::map<uint32_t, int>{{mask({1}), -1},
                                              {mask({2}), -1},
                                              {mask({3}), -1},
                                              {mask({1, 2}), 1},
                                              {mask({1, 3}), 1},
                                              {mask({2, 3}), 1},
                                              {mask({1, 2, 3}), -1}});

    const Decomposition d4 = decompose(r, 4);
    CHECK(d4.constant == 0);
    CHECK(d4.terms == std::map<uint32_t, int>{{mask({1}), 1}, {mask({1, 2, 3}), -1}});
}

TEST_CASE("whole-cube treatment decomposes to the constant one") {
    TreatmentRule r;
    r.J = 2;
    r.T = 1;
    r.cells = {{{{Flag::Free, Flag::Free}}}};
    const Decomposition d = decompose(r, 1);
    CHECK(d.constant == 1);
    CHECK(d.terms.empty());
    CHECK(check_completeness(r).complete);
}

TEST_CASE("completeness of the example rule, and a witness after deletion") {
    CHECK(check_completeness(example_rule()).complete);

    TreatmentRule broken = example_rule();
    broken.cells[3].clear();  // delete treatment 4
    const CompletenessResult res = check_completeness(broken);
    CHECK(!res.complete);
    REQUIRE(res.witness.has_value());
    const auto& [v, q] = *res.witness;
    // witness must be a point where no treatment (or several) fires
    const auto ds = decompose_all(broken);
    int fired = 0;
    for (const auto& d : ds) fired += d.eval(v, q);
    CHECK(fired != 1);
    // deleted region was v1<q1 with (v2>=q2 or v3>=q3)
    CHECK(v[0] < q[0]);
}

TEST_CASE("involvement") {
    CHECK(check_involvement(decompose_all(example_rule())).ok);
    CHECK(check_involvement(decompose_all(corners_rule())).ok);

    TreatmentRule r;
    r.J = 2;
    r.T = 2;
    r.cells = {{{{Flag::Below, Flag::Free}}}, {{{Flag::Above, Flag::Free}}}};
    const InvolvementResult res = check_involvement(decompose_all(r));
    CHECK(!res.ok);
    CHECK(res.missing == mask({2}));
}

TEST_CASE("leading terms of the example rule") {
    const TreatmentRule r = example_rule();

    auto lead1 = leading_terms(decompose(r, 1));
    REQUIRE(lead1.size() == 1);
    CHECK(lead1[0].dims == mask({2, 3}));
    CHECK(term_rank(lead1[0]) == 2);

    auto lead2 = leading_terms(decompose(r, 2));
    REQUIRE(lead2.size() == 1);
    CHECK(lead2[0].dims == mask({1, 2, 3}));
    CHECK(lead2[0].coeff == 2);
    CHECK(term_rank(lead2[0]) == 3);

    auto lead_corners = leading_terms(decompose(corners_rule(), 1));
    REQUIRE(lead_corners.size() == 3);
    CHECK(lead_corners[0].dims == mask({1, 2}));
    CHECK(lead_corners[1].dims == mask({1, 3}));
    CHECK(lead_corners[2].dims == mask({2, 3}));
    for (const auto& t : lead_corners) CHECK(term_rank(t) == 2);
}

TEST_CASE("inclusion and rank calculus") {
    CHECK(term_includes({1, mask({2, 3})}, {1, mask({1, 2, 3})}));
    CHECK(!term_includes({1, mask({1, 2})}, {1, mask({2, 3})}));
    CHECK(term_rank({1, mask({1, 2, 3})}) == 3);
}

TEST_CASE("treatment evaluation") {
    const TreatmentRule r = example_rule();
    const auto ds = decompose_all(r);
    const std::vector<double> q{0.5, 0.5, 0.5};

    CHECK(eval_dk(ds[0], std::vector<double>{0.6, 0.2, 0.1}, q) == 1);
    CHECK(eval_treatment(ds, std::vector<double>{0.6, 0.2, 0.1}, q) == 1);
    CHECK(eval_treatment(ds, std::vector<double>{0.6, 0.6, 0.6}, q) == 3);

    const AssignmentTable table(ds);
    CHECK(table.assign(std::vector<double>{0.6, 0.2, 0.1}, q) == 1);
    CHECK(table.assign(std::vector<double>{0.6, 0.6, 0.6}, q) == 3);

    // incomplete rule: evaluation in the hole must throw
    TreatmentRule broken = r;
    broken.cells[3].clear();
    const auto broken_ds = decompose_all(broken);
    CHECK_THROWS_AS(eval_treatment(broken_ds, std::vector<double>{0.2, 0.2, 0.9}, q),
                    InvalidModel);
}

TEST_CASE("overlapping cells within a treatment are rejected") {
    TreatmentRule r;
    r.J = 2;
    r.T = 1;
    r.cells = {{{{Flag::Below, Flag::Free}}, {{Flag::Below, Flag::Below}}}};
    CHECK_THROWS_AS(r.validate(), InvalidModel);
}

TEST_CASE("properties over random valid rules") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const int J = 1 + static_cast<int>(rng.below(4));
        const int T = 2 + static_cast<int>(rng.below(3));
        const TreatmentRule r = random_rule(rng, J, T);
        const auto ds = decompose_all(r);

        // canonicality: polynomial evaluation equals direct cell membership on
        // every sign pattern
        for (uint32_t s = 0; s < (1u << J); ++s) {
            for (int k = 0; k < T; ++k) {
                int member = 0;
                for (const CellSpec& c : r.cells[k]) member += c.matches(s) ? 1 : 0;
                CHECK(ds[k].eval_pattern(s) == member);
            }
        }

        // partition rules are complete by construction
        CHECK(check_completeness(r).complete);

        for (int k = 0; k < T; ++k) {
            const auto leads = leading_terms(ds[k]);
            // leading terms exist whenever there are terms
            if (!ds[k].terms.empty()) CHECK(!leads.empty());

            // Full-rank term present => it is the unique leading term.
            const uint32_t full = (1u << J) - 1u;
            if (ds[k].terms.count(full)) {
                REQUIRE(leads.size() == 1);
                CHECK(leads[0].dims == full);
            }

            // Every leading term separates itself from every other term.
            for (const Term& lt : leads) {
                for (const auto& [m2, c2] : ds[k].terms) {
                    (void)c2;
                    if (m2 == lt.dims) continue;
                    CHECK((lt.dims & ~m2) != 0u);
                }
            }
        }

        // idempotence: re-decomposing the rule yields identical output
        for (int k = 1; k <= T; ++k) CHECK(decompose(r, k) == ds[k - 1]);
    }
}

TEST_CASE("mutating a complete rule breaks the symbolic sum") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        TreatmentRule r = random_rule(rng, 2 + static_cast<int>(rng.below(2)), 2);
        // removing one owned cell from a treatment must break completeness
        int k = static_cast<int>(rng.below(2));
        if (r.cells[k].empty()) k = 1 - k;
        r.cells[k].pop_back();
        bool had_all_cells = true;
        size_t total = r.cells[0].size() + r.cells[1].size();
        had_all_cells = total == (1u << r.J) - 1u;
        CHECK(had_all_cells);
        CHECK(!check_completeness(r).complete);
    }
}
