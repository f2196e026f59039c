#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "hrmt/io.hpp"

using namespace hrmt;

namespace {

struct TempDir {
    std::filesystem::path p;
    TempDir() {
        p = std::filesystem::temp_directory_path() /
            ("hrmt_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(p);
    }
    ~TempDir() { std::filesystem::remove_all(p); }
    std::string file(const std::string& name) const { return (p / name).string(); }
};

}  // namespace

TEST_CASE("rule json round trip") {
    const Json j = Json::parse(R"({
      "J": 3, "T": 4,
      "treatments": [
        {"k": 1, "cells": [["free", "below", "below"]]},
        {"k": 2, "cells": [["above", "below", "above"], ["above", "above", "below"]]},
        {"k": 3, "cells": [["above", "above", "above"]]},
        {"k": 4, "cells": [["below", "below", "above"], ["below", "above", "free"]]}
      ]
    })");
    const TreatmentRule r = rule_from_json(j);
    CHECK(r.J == 3);
    CHECK(r.T == 4);
    CHECK(check_completeness(r).complete);
    const Json back = rule_to_json(r);
    CHECK(rule_from_json(back).cells == r.cells);

    const Json rep = decomposition_report(decompose_all(r));
    CHECK(rep.size() == 4);
    CHECK(rep[0]["constant"] == 0);
    CHECK(rep[0]["terms"][0]["coeff"] == 1);
    CHECK(rep[0]["terms"][0]["dims"] == Json::array({2, 3}));
    // d4 = S1 - S1S2S3
    CHECK(rep[3]["terms"][0]["dims"] == Json::array({1}));
    CHECK(rep[3]["terms"][1]["coeff"] == -1);
    CHECK(rep[3]["terms"][1]["dims"] == Json::array({1, 2, 3}));
}

TEST_CASE("dgp config parsing and dataset csv round trip") {
    const Json cfg = Json::parse(R"({
      "rule": {"J": 2, "T": 2, "treatments": [
        {"k": 1, "cells": [["below", "free"]]},
        {"k": 2, "cells": [["above", "free"]]}]},
      "density": {"type": "uniform"},
      "mtr": {"ybar": 1.0, "functions": [
        {"c0": 0.3, "lin": [0.0, 0.0]},
        {"c0": 0.6, "lin": [0.1, 0.0]}]},
      "threshold": {"degree": 1, "beta": [[0.3, 0.3], [0.5, 0.0]]},
      "instrument": {"type": "uniform", "lo": [0.0], "hi": [1.0]},
      "n_obs": 500,
      "seed": 11
    })");
    const DgpConfig c = dgp_from_json(cfg);
    CHECK(c.n_obs == 500);
    CHECK(c.spec.rule.T == 2);
    const Dataset ds = simulate(c.spec, c.n_obs, c.seed, {.keep_latent = true});

    TempDir tmp;
    write_dataset_csv(ds, tmp.file("d.csv"), tmp.file("d.latent.csv"));
    const Dataset back = read_dataset_csv(tmp.file("d.csv"));
    CHECK(back.n() == ds.n());
    CHECK(back.zdim == 1);
    CHECK(back.y == ds.y);
    CHECK(back.d == ds.d);
    CHECK(back.z == ds.z);
    CHECK(std::filesystem::exists(tmp.file("d.latent.csv")));
}

TEST_CASE("lattice csv round trip") {
    LatticeNd lat = LatticeNd::zeros(2, 5);
    for (size_t i = 0; i < lat.size(); ++i) lat.values[i] = 0.01 * static_cast<double>(i) + 1;
    TempDir tmp;
    write_lattice_csv(lat, tmp.file("lat.csv"));
    const LatticeNd back = read_lattice_csv(tmp.file("lat.csv"));
    CHECK(back.ndims == 2);
    CHECK(back.res == 5);
    CHECK(back.values == lat.values);
}

TEST_CASE("constraint system json round trip") {
    ConstraintSystem sys;
    sys.K = {1, 3};
    sys.basis = BernsteinBasis{2, 1};
    sys.ybar = 2.0;
    sys.slack_eq = 1e-4;
    sys.slack_in = 0.0;
    ConstraintRow row;
    row.kind = ConstraintRow::Kind::Inequality;
    row.coeffs.assign(sys.nvars(), 0.25);
    row.rhs = 0.5;
    row.k = 1;
    row.other_k = 2;
    row.dims = 0b10;
    row.node = {0.3};
    sys.rows.push_back(row);

    const Json j = constraint_system_to_json(sys);
    const ConstraintSystem back = constraint_system_from_json(j);
    CHECK(back.K == sys.K);
    CHECK(back.basis.degree == 1);
    CHECK(back.rows.size() == 1);
    CHECK(back.rows[0].dims == 0b10);
    CHECK(back.rows[0].coeffs == sys.rows[0].coeffs);
    CHECK(back.rows[0].rhs == sys.rows[0].rhs);
}

TEST_CASE("json hashing is stable") {
    const Json a = {{"x", 1}, {"y", 2.5}};
    const Json b = {{"y", 2.5}, {"x", 1}};
    CHECK(json_hash_hex(a) == json_hash_hex(b));  // object keys are ordered
    CHECK(json_hash_hex(a).size() == 16);
}
