#include "hrmt/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hrmt/stats.hpp"

namespace hrmt {

namespace {

Flag flag_from_string(const std::string& s) {
    if (s == "below") return Flag::Below;
    if (s == "above") return Flag::Above;
    if (s == "free") return Flag::Free;
    throw Error("rule: unknown cell flag '" + s + "'");
}

std::string flag_to_string(Flag f) {
    switch (f) {
        case Flag::Below: return "below";
        case Flag::Above: return "above";
        case Flag::Free: return "free";
    }
    return "?";
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

TreatmentRule rule_from_json(const Json& j) {
    TreatmentRule r;
    r.J = j.at("J").get<int>();
    r.T = j.at("T").get<int>();
    r.cells.assign(r.T, {});
    for (const Json& tj : j.at("treatments")) {
        const int k = tj.at("k").get<int>();
        if (k < 1 || k > r.T) throw Error("rule: treatment index out of range");
        for (const Json& cj : tj.at("cells")) {
            CellSpec cell;
            for (const Json& f : cj) cell.flags.push_back(flag_from_string(f.get<std::string>()));
            r.cells[k - 1].push_back(std::move(cell));
        }
    }
    r.validate();
    return r;
}

Json rule_to_json(const TreatmentRule& r) {
    Json j;
    j["J"] = r.J;
    j["T"] = r.T;
    Json ts = Json::array();
    for (int k = 1; k <= r.T; ++k) {
        Json tj;
        tj["k"] = k;
        Json cells = Json::array();
        for (const CellSpec& c : r.cells[k - 1]) {
            Json cj = Json::array();
            for (Flag f : c.flags) cj.push_back(flag_to_string(f));
            cells.push_back(cj);
        }
        tj["cells"] = cells;
        ts.push_back(tj);
    }
    j["treatments"] = ts;
    return j;
}

Json decomposition_report(const std::vector<Decomposition>& ds) {
    Json out = Json::array();
    for (size_t i = 0; i < ds.size(); ++i) {
        Json dj;
        dj["k"] = static_cast<int>(i) + 1;
        dj["constant"] = ds[i].constant;
        Json terms = Json::array();
        for (const auto& [mask, c] : ds[i].terms) {
            Json tj;
            tj["coeff"] = c;
            Json dims = Json::array();
            for (int d : mask_to_dims(mask)) dims.push_back(d + 1);
            tj["dims"] = dims;
            terms.push_back(tj);
        }
        dj["terms"] = terms;
        out.push_back(dj);
    }
    return out;
}

DensitySpec density_from_json(const Json& j, int J) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "uniform") return DensitySpec(J, IndependentUniformSpec{});
    if (type == "grid") {
        CellGridSpec g;
        g.res = j.at("res").get<int>();
        g.values = j.at("values").get<std::vector<double>>();
        return DensitySpec(J, std::move(g));
    }
    if (type == "gaussian") {
        GaussianCopulaSpec g;
        g.corr = j.at("corr").get<std::vector<std::vector<double>>>();
        return DensitySpec(J, std::move(g));
    }
    throw Error("density: unknown type '" + type + "'");
}

Json density_to_json(const DensitySpec& d) {
    Json j;
    if (d.is_uniform()) j["type"] = "uniform";
    else if (d.is_gaussian()) {
        j["type"] = "gaussian";
        j["corr"] = d.gaussian().corr;
    } else {
        j["type"] = "grid";
    }
    j["J"] = d.J();
    return j;
}

MtrSpec mtr_from_json(const Json& j) {
    MtrSpec m;
    m.ybar = j.at("ybar").get<double>();
    for (const Json& fj : j.at("functions")) {
        AffineFn f;
        f.c0 = fj.at("c0").get<double>();
        f.lin = fj.at("lin").get<std::vector<double>>();
        m.fns.push_back(std::move(f));
    }
    return m;
}

ThresholdSpec threshold_from_json(const Json& j, int J, int zdim) {
    ThresholdSpec t;
    t.J = J;
    t.zdim = zdim;
    t.degree = j.at("degree").get<int>();
    t.beta = j.at("beta").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(t.beta.size()) != J)
        throw Error("threshold: beta must have J rows");
    for (const auto& row : t.beta)
        if (static_cast<int>(row.size()) != t.basis_size())
            throw Error("threshold: beta row size must be 1 + zdim*degree");
    return t;
}

Json threshold_to_json(const ThresholdSpec& t) {
    Json j;
    j["degree"] = t.degree;
    j["beta"] = t.beta;
    j["basis"] = {{"type", "poly"}, {"degree", t.degree}};
    return j;
}

InstrumentSpec instrument_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "uniform") {
        UniformBoxInstrument u;
        u.lo = j.at("lo").get<std::vector<double>>();
        u.hi = j.at("hi").get<std::vector<double>>();
        return InstrumentSpec{u};
    }
    if (type == "discrete") {
        DiscreteInstrument d;
        d.support = j.at("support").get<std::vector<std::vector<double>>>();
        d.probs = j.at("probs").get<std::vector<double>>();
        return InstrumentSpec{d};
    }
    throw Error("instrument: unknown type '" + type + "'");
}

DgpConfig dgp_from_json(const Json& j) {
    const TreatmentRule rule = rule_from_json(j.at("rule"));
    InstrumentSpec inst = instrument_from_json(j.at("instrument"));
    const int zdim = inst.zdim();
    DgpConfig cfg{DgpSpec{rule, density_from_json(j.at("density"), rule.J),
                          mtr_from_json(j.at("mtr")),
                          threshold_from_json(j.at("threshold"), rule.J, zdim),
                          std::move(inst)},
                  j.at("n_obs").get<size_t>(), j.at("seed").get<uint64_t>()};
    if (cfg.spec.mtr.T() != rule.T) throw Error("dgp: mtr function count != T");
    return cfg;
}

void write_dataset_csv(const Dataset& ds, const std::string& path,
                       const std::string& latent_path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "y,d";
    for (int w = 0; w < ds.zdim; ++w) out << ",z" << (w + 1);
    out << "\n";
    for (size_t i = 0; i < ds.n(); ++i) {
        out << format_double(ds.y[i]) << "," << ds.d[i];
        for (int w = 0; w < ds.zdim; ++w) out << "," << format_double(ds.z[i * ds.zdim + w]);
        out << "\n";
    }
    if (!latent_path.empty() && ds.latent_v) {
        const size_t J = ds.latent_v->size() / ds.n();
        std::ofstream lout(latent_path);
        if (!lout) throw Error("cannot write " + latent_path);
        for (size_t d = 0; d < J; ++d) lout << (d ? "," : "") << "v" << (d + 1);
        lout << "\n";
        for (size_t i = 0; i < ds.n(); ++i) {
            for (size_t d = 0; d < J; ++d)
                lout << (d ? "," : "") << format_double((*ds.latent_v)[i * J + d]);
            lout << "\n";
        }
    }
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty dataset " + path);
    int zdim = 0;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.rfind('z', 0) == 0) ++zdim;
        }
    }
    Dataset ds;
    ds.zdim = zdim;
    int maxd = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        ds.y.push_back(std::stod(cell));
        std::getline(ss, cell, ',');
        const int d = std::stoi(cell);
        ds.d.push_back(d);
        maxd = std::max(maxd, d);
        for (int w = 0; w < zdim; ++w) {
            std::getline(ss, cell, ',');
            ds.z.push_back(std::stod(cell));
        }
    }
    ds.T = maxd;
    return ds;
}

void write_lattice_csv(const LatticeNd& lat, const std::string& path,
                       const std::string& value_name) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (int d = 0; d < lat.ndims; ++d) out << "v" << (d + 1) << ",";
    out << value_name << "\n";
    std::vector<int> mi(lat.ndims);
    for (size_t i = 0; i < lat.size(); ++i) {
        lat.multi_index(i, mi);
        for (int d = 0; d < lat.ndims; ++d) out << format_double(lat.node(mi[d])) << ",";
        out << format_double(lat.values[i]) << "\n";
    }
}

LatticeNd read_lattice_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty lattice " + path);
    int ndims = 0;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.rfind('v', 0) == 0) ++ndims;
        }
    }
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int d = 0; d < ndims; ++d) std::getline(ss, cell, ',');
        std::getline(ss, cell, ',');
        values.push_back(std::stod(cell));
    }
    int res = 1;
    while (true) {
        size_t total = 1;
        for (int d = 0; d < ndims; ++d) total *= static_cast<size_t>(res);
        if (total == values.size()) break;
        if (total > values.size()) throw Error("lattice size is not a perfect power");
        ++res;
    }
    LatticeNd lat = LatticeNd::zeros(ndims, res);
    lat.values = std::move(values);
    return lat;
}

Json constraint_system_to_json(const ConstraintSystem& sys) {
    Json j;
    j["K"] = sys.K;
    j["basis"] = {{"type", "bernstein"}, {"J", sys.basis.J}, {"degree", sys.basis.degree}};
    j["ybar"] = sys.ybar;
    j["slack_eq"] = sys.slack_eq;
    j["slack_in"] = sys.slack_in;
    Json rows = Json::array();
    for (const ConstraintRow& r : sys.rows) {
        Json rj;
        switch (r.kind) {
            case ConstraintRow::Kind::Equality: rj["kind"] = "eq"; break;
            case ConstraintRow::Kind::Inequality: rj["kind"] = "ineq"; break;
            case ConstraintRow::Kind::Ranking: rj["kind"] = "rank"; break;
            case ConstraintRow::Kind::BoxLower: rj["kind"] = "box_lo"; break;
            case ConstraintRow::Kind::BoxUpper: rj["kind"] = "box_hi"; break;
        }
        rj["k"] = r.k;
        rj["other_k"] = r.other_k;
        Json dims = Json::array();
        for (int d : mask_to_dims(r.dims)) dims.push_back(d + 1);
        rj["dims"] = dims;
        rj["node"] = r.node;
        rj["coeffs"] = r.coeffs;
        rj["rhs"] = r.rhs;
        rows.push_back(rj);
    }
    j["rows"] = rows;
    return j;
}

ConstraintSystem constraint_system_from_json(const Json& j) {
    ConstraintSystem sys;
    sys.K = j.at("K").get<std::vector<int>>();
    sys.basis.J = j.at("basis").at("J").get<int>();
    sys.basis.degree = j.at("basis").at("degree").get<int>();
    sys.ybar = j.at("ybar").get<double>();
    sys.slack_eq = j.at("slack_eq").get<double>();
    sys.slack_in = j.at("slack_in").get<double>();
    for (const Json& rj : j.at("rows")) {
        ConstraintRow r;
        const std::string kind = rj.at("kind").get<std::string>();
        if (kind == "eq") r.kind = ConstraintRow::Kind::Equality;
        else if (kind == "ineq") r.kind = ConstraintRow::Kind::Inequality;
        else if (kind == "rank") r.kind = ConstraintRow::Kind::Ranking;
        else if (kind == "box_lo") r.kind = ConstraintRow::Kind::BoxLower;
        else if (kind == "box_hi") r.kind = ConstraintRow::Kind::BoxUpper;
        else throw Error("constraint row: unknown kind " + kind);
        r.k = rj.at("k").get<int>();
        r.other_k = rj.at("other_k").get<int>();
        for (const Json& d : rj.at("dims")) r.dims |= 1u << (d.get<int>() - 1);
        r.node = rj.at("node").get<std::vector<double>>();
        r.coeffs = rj.at("coeffs").get<std::vector<double>>();
        r.rhs = rj.at("rhs").get<double>();
        sys.rows.push_back(std::move(r));
    }
    return sys;
}

Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    Json j;
    in >> j;
    return j;
}

void save_json(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(bytes.data(), bytes.size()));
    return buf;
}

std::string json_hash_hex(const Json& j) {
    const std::string s = j.dump();
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(s.data(), s.size()));
    return buf;
}

}  // namespace hrmt
