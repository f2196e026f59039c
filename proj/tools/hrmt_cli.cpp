// Command-line front end: simulate, decompose, check, identify-density,
// identify-threshold, identify-mtr, effects, test-gprte.  Every command
// writes a JSON report that embeds the hashes of its inputs and the seed, so
// fixed configs reproduce byte-identical artifacts.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "hrmt/effects.hpp"
#include "hrmt/gprte.hpp"
#include "hrmt/io.hpp"
#include "hrmt/threshold_ident.hpp"

namespace fs = std::filesystem;
using namespace hrmt;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOut {
    std::string out_dir = ".";

    fs::path path(const std::string& name) const { return fs::path(out_dir) / name; }
    void prepare() const { fs::create_directories(out_dir); }
};

Json base_report(const std::string& command, uint64_t seed) {
    Json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["inputs"] = Json::object();
    return j;
}

EffectKind effect_kind_from_string(const std::string& s) {
    if (s == "mte") return EffectKind::MTE;
    if (s == "ate") return EffectKind::ATE;
    if (s == "att") return EffectKind::ATT;
    if (s == "late") return EffectKind::LATE;
    if (s == "prte") return EffectKind::PRTE;
    if (s == "aprte") return EffectKind::APRTE;
    throw Error("unknown effect kind '" + s + "'");
}

CopulaFamily family_from_string(const std::string& s) {
    if (s == "gaussian") return CopulaFamily::Gaussian;
    if (s == "frank") return CopulaFamily::Frank;
    if (s == "gumbel") return CopulaFamily::Gumbel;
    throw Error("unknown copula family '" + s + "'");
}

EffectQuery query_from_json(const Json& j) {
    EffectQuery q;
    q.kind = effect_kind_from_string(j.at("kind").get<std::string>());
    q.k1 = j.value("k1", 0);
    q.k2 = j.value("k2", 0);
    q.k3 = j.value("k3", 0);
    if (j.contains("z")) q.z = j.at("z").get<std::vector<double>>();
    if (j.contains("z2")) q.z2 = j.at("z2").get<std::vector<double>>();
    if (j.contains("v")) q.v = j.at("v").get<std::vector<double>>();
    return q;
}

// Oracle model pieces assembled from a DGP config.
struct OracleModel {
    DgpConfig cfg;
    std::vector<Decomposition> decomps;

    explicit OracleModel(const Json& config_json) : cfg(dgp_from_json(config_json)) {
        decomps = decompose_all(cfg.spec.rule);
    }

    OracleMomentProvider provider() const {
        return OracleMomentProvider(decomps, cfg.spec.density, cfg.spec.mtr);
    }

    EffectModel effect_model() const {
        EffectModel m;
        m.J = cfg.spec.rule.J;
        m.T = cfg.spec.rule.T;
        m.ybar = cfg.spec.mtr.ybar;
        m.decomps = decomps;
        m.Q = cfg.spec.threshold;
        const DensitySpec& den = cfg.spec.density;
        m.density = [den](std::span<const double> v) { return den.pdf(v); };
        const MtrSpec mtr = cfg.spec.mtr;
        m.mtr = [mtr](int k, std::span<const double> v) { return mtr.eval(k, v); };
        return m;
    }
};

int run_simulate(const std::string& config_path, const CommonOut& out, int64_t seed_override,
                 bool latent, int threads) {
    const Json cj = load_json(config_path);
    DgpConfig cfg = dgp_from_json(cj);
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);

    SimulateOptions opts;
    opts.keep_latent = latent;
    opts.threads = threads;
    const Dataset ds = simulate(cfg.spec, cfg.n_obs, cfg.seed, opts);

    out.prepare();
    const std::string data_path = out.path("dataset.csv").string();
    write_dataset_csv(ds, data_path,
                      latent ? out.path("dataset.latent.csv").string() : "");

    Json rep = base_report("simulate", cfg.seed);
    rep["inputs"]["config"] = file_hash_hex(config_path);
    rep["config_hash"] = json_hash_hex(cj);
    rep["n_obs"] = cfg.n_obs;
    Json counts = Json::object();
    std::vector<size_t> freq(cfg.spec.rule.T + 1, 0);
    for (int d : ds.d) ++freq[d];
    for (int k = 1; k <= cfg.spec.rule.T; ++k) counts[std::to_string(k)] = freq[k];
    rep["treatment_counts"] = counts;
    rep["artifacts"] = {{"dataset", file_hash_hex(data_path)}};
    save_json(rep, out.path("simulate.json").string());
    return 0;
}

int run_decompose(const std::string& rule_path, const CommonOut& out) {
    const Json rj = load_json(rule_path);
    const TreatmentRule rule = rule_from_json(rj);
    const auto ds = decompose_all(rule);

    out.prepare();
    Json rep = base_report("decompose", 0);
    rep["inputs"]["rule"] = file_hash_hex(rule_path);
    rep["config_hash"] = json_hash_hex(rj);
    rep["decompositions"] = decomposition_report(ds);
    save_json(rep, out.path("decompose.json").string());
    return 0;
}

int run_check(const std::string& rule_path, const CommonOut& out) {
    const Json rj = load_json(rule_path);
    const TreatmentRule rule = rule_from_json(rj);
    const auto ds = decompose_all(rule);
    const CompletenessResult comp = check_completeness(rule);
    const InvolvementResult inv = check_involvement(ds);
    const RankResult rank = rank_condition_check(coefficient_matrix(ds), rule.J);

    out.prepare();
    Json rep = base_report("check", 0);
    rep["inputs"]["rule"] = file_hash_hex(rule_path);
    rep["config_hash"] = json_hash_hex(rj);
    rep["complete"] = comp.complete;
    if (comp.witness) {
        rep["witness"] = {{"v", comp.witness->first}, {"q", comp.witness->second}};
    }
    Json missing = Json::array();
    for (int d : mask_to_dims(inv.missing)) missing.push_back(d + 1);
    rep["involvement"] = {{"ok", inv.ok}, {"missing", missing}};
    rep["rank"] = {{"value", rank.rank}, {"satisfied", rank.satisfied}};
    save_json(rep, out.path("check.json").string());
    if (!comp.complete) std::cerr << "warning: rule fails completeness\n";
    if (!rank.satisfied) std::cerr << "warning: rank condition not satisfied\n";
    return 0;
}

int run_identify_density(const std::string& config_path, const std::string& dataset_path,
                         const CommonOut& out, int res, double fd_step,
                         const std::string& family, int G, uint64_t seed) {
    const Json cj = load_json(config_path);
    OracleModel om(cj);
    const int J = om.cfg.spec.rule.J;
    const FdConfig fd{fd_step};

    std::unique_ptr<MomentProvider> provider;
    Json inputs = Json::object();
    inputs["config"] = file_hash_hex(config_path);
    if (dataset_path.empty()) {
        provider = std::make_unique<OracleMomentProvider>(om.provider());
    } else {
        const Dataset ds = read_dataset_csv(dataset_path);
        provider = std::make_unique<KernelMomentProvider>(KernelMomentProvider::from_dataset(
            ds, om.cfg.spec.threshold, om.cfg.spec.mtr.ybar));
        inputs["dataset"] = file_hash_hex(dataset_path);
    }

    out.prepare();
    Json rep = base_report("identify-density", seed);
    rep["inputs"] = inputs;
    rep["config_hash"] = json_hash_hex(cj);
    rep["fd_step"] = fd_step;
    rep["res"] = res;

    // Look for a full-rank leading term on any treatment.
    int full_k = 0;
    Term full_term;
    std::vector<std::pair<int, Term>> all_leads;
    for (int k = 1; k <= om.cfg.spec.rule.T; ++k) {
        for (const Term& t : leading_terms(om.decomps[k - 1])) {
            all_leads.emplace_back(k, t);
            if (term_rank(t) == J && full_k == 0) {
                full_k = k;
                full_term = t;
            }
        }
    }

    if (full_k > 0) {
        const GridDensity gd = identify_density_fullrank(*provider, full_k, full_term, res, fd);
        const std::string dpath = out.path("density.csv").string();
        write_lattice_csv(gd.lat, dpath);
        rep["route"] = "full-rank";
        rep["full_rank_treatment"] = full_k;
        rep["artifacts"] = {{"density", file_hash_hex(dpath)}};
    } else {
        const auto retained = prune_implied_marginals(all_leads);
        std::vector<MarginalDensity> marginals;
        Json marg_report = Json::array();
        Json artifacts = Json::object();
        for (const auto& [k, t] : retained) {
            MarginalDensity md =
                marginal_identification(*provider, om.decomps[k - 1], k, t, res, fd);
            std::string name = "marginal_k" + std::to_string(k);
            for (int d : mask_to_dims(t.dims)) name += "_" + std::to_string(d + 1);
            const std::string mpath = out.path(name + ".csv").string();
            write_lattice_csv(md.g.lat, mpath);
            Json mj;
            mj["k"] = k;
            Json dims = Json::array();
            for (int d : mask_to_dims(t.dims)) dims.push_back(d + 1);
            mj["dims"] = dims;
            marg_report.push_back(mj);
            artifacts[name] = file_hash_hex(mpath);
            marginals.push_back(std::move(md));
        }
        CopulaFitOptions copts;
        copts.G = G;
        copts.seed = seed;
        copts.joint_res = res;
        const CopulaFitResult fit =
            fit_copula(J, marginals, family_from_string(family), copts);
        const std::string dpath = out.path("density.csv").string();
        write_lattice_csv(fit.joint.lat, dpath);
        artifacts["density"] = file_hash_hex(dpath);
        rep["route"] = "copula";
        rep["marginals"] = marg_report;
        rep["copula"] = {{"family", to_string(fit.model.family)},
                         {"params", fit.model.param},
                         {"loglik", fit.loglik},
                         {"G", fit.G},
                         {"overlap_discrepancy", fit.overlap_discrepancy}};
        rep["artifacts"] = artifacts;
    }
    save_json(rep, out.path("identify-density.json").string());
    return 0;
}

int run_identify_threshold(const std::string& config_path, const std::string& dataset_path,
                           const CommonOut& out, int degree, int bins, uint64_t seed) {
    const Json cj = load_json(config_path);
    OracleModel om(cj);
    const Dataset ds = read_dataset_csv(dataset_path);
    const auto points = binned_probs(ds, bins);

    OptimizerConfig ocfg;
    ocfg.seed = seed;
    const ThresholdEstimate est = fit_threshold(om.decomps, om.cfg.spec.rule.J, points,
                                                om.cfg.spec.density, ds.zdim, degree, ocfg);

    out.prepare();
    Json rep = base_report("identify-threshold", seed);
    rep["inputs"]["config"] = file_hash_hex(config_path);
    rep["inputs"]["dataset"] = file_hash_hex(dataset_path);
    rep["config_hash"] = json_hash_hex(cj);
    rep["beta"] = est.spec.beta;
    rep["basis"] = {{"type", "poly"}, {"degree", degree}};
    rep["loss"] = est.loss;
    rep["iterations"] = est.iterations;
    rep["converged"] = est.converged;
    rep["bins"] = bins;
    rep["rank"] = {{"value", est.rank.rank}, {"satisfied", est.rank.satisfied}};
    rep["identified"] = est.identified;
    save_json(rep, out.path("threshold.json").string());
    if (!est.identified) std::cerr << "warning: rank condition not satisfied\n";
    return 0;
}

int run_identify_mtr(const std::string& config_path, const CommonOut& out,
                     std::vector<int> K, int res, double fd_step, int degree, int nodes,
                     double slack_eq, double slack_in) {
    const Json cj = load_json(config_path);
    OracleModel om(cj);
    const int J = om.cfg.spec.rule.J;
    const FdConfig fd{fd_step};
    const OracleMomentProvider provider = om.provider();
    if (K.empty())
        for (int k = 1; k <= om.cfg.spec.rule.T; ++k) K.push_back(k);

    out.prepare();
    Json rep = base_report("identify-mtr", 0);
    rep["inputs"]["config"] = file_hash_hex(config_path);
    rep["config_hash"] = json_hash_hex(cj);
    Json artifacts = Json::object();
    Json point_list = Json::array();
    std::vector<int> set_K;

    const DensitySpec& den = om.cfg.spec.density;
    for (int k : K) {
        Term full;
        bool has_full = false;
        for (const Term& t : leading_terms(om.decomps[k - 1]))
            if (term_rank(t) == J) {
                full = t;
                has_full = true;
            }
        if (has_full) {
            const LatticeNd lat = identify_mtr_fullrank(
                provider, [&](std::span<const double> v) { return den.pdf(v); }, k, full, res,
                fd);
            const std::string mpath = out.path("mtr_k" + std::to_string(k) + ".csv").string();
            write_lattice_csv(lat, mpath, "m");
            artifacts["mtr_k" + std::to_string(k)] = file_hash_hex(mpath);
            point_list.push_back(k);
        } else {
            set_K.push_back(k);
        }
    }

    if (!set_K.empty()) {
        const JointDensity joint = JointDensity::from_spec(den, res);
        const auto catalog = build_leading_catalog(provider, om.decomps, joint, res, fd);
        BernsteinBasis basis{J, degree};
        ConstraintConfig ccfg;
        ccfg.nodes_per_family = nodes;
        ccfg.slack_eq = slack_eq;
        ccfg.slack_in = slack_in;
        const ConstraintSystem sys = build_constraints(set_K, catalog, joint, basis,
                                                       om.cfg.spec.mtr.ybar, ccfg);
        std::map<int, std::vector<Term>> leading;
        for (int k = 1; k <= om.cfg.spec.rule.T; ++k)
            leading[k] = leading_terms(om.decomps[k - 1]);
        const ConstraintSystem pruned = prune_redundant(sys, leading);
        const std::string cpath = out.path("constraints.json").string();
        save_json(constraint_system_to_json(pruned), cpath);
        artifacts["constraints"] = file_hash_hex(cpath);
        rep["set_identified"] = set_K;
        rep["rows_before_prune"] = sys.rows.size();
        rep["rows_after_prune"] = pruned.rows.size();
        rep["feasible"] = feasibility_check(pruned);
    }
    rep["point_identified"] = point_list;
    rep["artifacts"] = artifacts;
    save_json(rep, out.path("identify-mtr.json").string());
    return 0;
}

int run_effects(const std::string& config_path, const std::string& query_path,
                const std::string& constraints_path, const CommonOut& out) {
    const Json cj = load_json(config_path);
    OracleModel om(cj);
    const EffectModel model = om.effect_model();
    const Json qj = load_json(query_path);

    std::unique_ptr<ConstraintSystem> sys;
    if (!constraints_path.empty())
        sys = std::make_unique<ConstraintSystem>(
            constraint_system_from_json(load_json(constraints_path)));

    out.prepare();
    Json rep = base_report("effects", 0);
    rep["inputs"]["config"] = file_hash_hex(config_path);
    rep["inputs"]["query"] = file_hash_hex(query_path);
    if (!constraints_path.empty())
        rep["inputs"]["constraints"] = file_hash_hex(constraints_path);
    rep["config_hash"] = json_hash_hex(cj);

    Json results = Json::array();
    const Json queries = qj.is_array() ? qj : Json::array({qj});
    for (const Json& one : queries) {
        const EffectQuery q = query_from_json(one);
        Json res;
        res["kind"] = to_string(q.kind);
        res["params"] = one;
        if (sys) {
            const IdentifiedInterval iv = effect_bounds(q, model, *sys);
            res["interval"] = {{"lower", iv.lower},
                               {"upper", iv.upper},
                               {"feasible", iv.feasible},
                               {"lp_iterations", iv.lp_iterations}};
        } else {
            res["value"] = effect_point(q, model);
        }
        results.push_back(res);
    }
    rep["results"] = results;
    save_json(rep, out.path("effects.json").string());
    return 0;
}

int run_test_gprte(const std::string& config_path, const std::string& dataset_path,
                   const std::string& policy_path, const std::string& constraints_path,
                   const std::string& weights_path, const CommonOut& out, double alpha, int M,
                   uint64_t seed, const std::string& convention, int memo_res) {
    const Json cj = load_json(config_path);
    OracleModel om(cj);
    const Dataset ds = read_dataset_csv(dataset_path);
    const Json pj = load_json(policy_path);

    PolicyPair policy;
    policy.J = om.cfg.spec.rule.J;
    policy.T = om.cfg.spec.rule.T;
    const TreatmentRule base_rule = rule_from_json(pj.at("base_rule"));
    const TreatmentRule cf_rule = rule_from_json(pj.at("cf_rule"));
    policy.base = decompose_all(base_rule);
    policy.cf = decompose_all(cf_rule);
    policy.Q = threshold_from_json(pj.at("base_threshold"), policy.J, ds.zdim);
    policy.Qcf = threshold_from_json(pj.at("cf_threshold"), policy.J, ds.zdim);

    Weights weights = Weights::uniform(ds.n());
    if (!weights_path.empty()) {
        std::ifstream win(weights_path);
        if (!win) throw Error("cannot read " + weights_path);
        weights.w.clear();
        double x;
        while (win >> x) weights.w.push_back(x);
        if (weights.w.size() != ds.n())
            throw Error("weights length does not match dataset");
    }

    const ImConvention conv =
        convention == "paper" ? ImConvention::PaperLiteral : ImConvention::StandardIm;

    out.prepare();
    Json rep = base_report("test-gprte", seed);
    rep["inputs"]["config"] = file_hash_hex(config_path);
    rep["inputs"]["dataset"] = file_hash_hex(dataset_path);
    rep["inputs"]["policy"] = file_hash_hex(policy_path);
    if (!weights_path.empty()) rep["inputs"]["weights"] = file_hash_hex(weights_path);
    rep["config_hash"] = json_hash_hex(cj);
    rep["alpha"] = alpha;
    rep["M"] = M;
    rep["n_obs"] = ds.n();
    rep["convention"] = convention;

    if (constraints_path.empty()) {
        const MtrSpec mtr = om.cfg.spec.mtr;
        const GprtePointResult res = gprte_point(
            ds.z, ds.zdim, weights, policy, om.cfg.spec.density,
            [mtr](int k, std::span<const double> v) { return mtr.eval(k, v); }, M, seed);
        rep["mode"] = "point";
        rep["dW"] = res.dW;
        rep["var"] = res.var_hat;
        rep["degenerate"] = res.degenerate;
        if (res.z_stat) {
            rep["z_test"] = *res.z_stat;
            rep["p_value"] = *res.p_value;
            rep["reject_at_alpha"] = *res.p_value < alpha;
        }
    } else {
        rep["inputs"]["constraints"] = file_hash_hex(constraints_path);
        const ConstraintSystem sys =
            constraint_system_from_json(load_json(constraints_path));
        SetGprteConfig scfg;
        scfg.M = M;
        scfg.seed = seed;
        scfg.memo_res = memo_res;
        const GprteSetResult res =
            gprte_set(ds.z, ds.zdim, weights, policy, om.cfg.spec.density, sys, scfg);
        const ImInterval iv = im_interval(res, alpha, conv);
        rep["mode"] = "set";
        rep["dW_lower"] = res.dW_lo;
        rep["dW_upper"] = res.dW_hi;
        rep["R"] = res.R;
        rep["sigma_lower"] = res.sigma_lo;
        rep["sigma_upper"] = res.sigma_hi;
        rep["cov"] = res.cov;
        rep["rho"] = res.rho;
        rep["cbar"] = iv.cbar;
        rep["interval"] = {{"lower", iv.lower}, {"upper", iv.upper}};
        rep["reject"] = im_reject(iv);
    }
    save_json(rep, out.path("gprte.json").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyper-rectangle multi-valued treatment toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset from a DGP config");
    std::string sim_config, sim_out = ".";
    int64_t sim_seed = -1;
    bool sim_latent = false;
    int sim_threads = 1;
    sim->add_option("--config", sim_config, "DGP config JSON")->required();
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--seed", sim_seed, "override config seed");
    sim->add_flag("--latent", sim_latent, "write the latent heterogeneity sidecar");
    sim->add_option("--threads", sim_threads, "worker threads");

    // decompose
    auto* dec = app.add_subcommand("decompose", "canonical decomposition of a rule file");
    std::string dec_rule, dec_out = ".";
    dec->add_option("--rule", dec_rule, "rule JSON")->required();
    dec->add_option("--out", dec_out, "output directory");

    // check
    auto* chk = app.add_subcommand("check", "completeness/involvement/rank diagnostics");
    std::string chk_rule, chk_out = ".";
    chk->add_option("--rule", chk_rule, "rule JSON")->required();
    chk->add_option("--out", chk_out, "output directory");

    // identify-density
    auto* idd = app.add_subcommand("identify-density",
                                   "recover f_V given a known threshold function");
    std::string idd_config, idd_dataset, idd_out = ".", idd_family = "gaussian";
    int idd_res = 20, idd_G = 10000;
    double idd_fd = 0.02;
    uint64_t idd_seed = 0;
    idd->add_option("--config", idd_config, "DGP config JSON")->required();
    idd->add_option("--dataset", idd_dataset, "dataset CSV (kernel backend; omit for oracle)");
    idd->add_option("--out", idd_out, "output directory");
    idd->add_option("--res", idd_res, "lattice nodes per dimension");
    idd->add_option("--fd-step", idd_fd, "central-difference step");
    idd->add_option("--family", idd_family, "copula family (gaussian|frank|gumbel)");
    idd->add_option("--G", idd_G, "copula sample size");
    idd->add_option("--seed", idd_seed, "copula sampling seed");

    // identify-threshold
    auto* idt = app.add_subcommand("identify-threshold",
                                   "fit Q(Z) given a known heterogeneity distribution");
    std::string idt_config, idt_dataset, idt_out = ".";
    int idt_degree = 1, idt_bins = 50;
    uint64_t idt_seed = 0;
    idt->add_option("--config", idt_config, "DGP config JSON")->required();
    idt->add_option("--dataset", idt_dataset, "dataset CSV")->required();
    idt->add_option("--out", idt_out, "output directory");
    idt->add_option("--degree", idt_degree, "polynomial basis degree");
    idt->add_option("--bins", idt_bins, "instrument bins for empirical shares");
    idt->add_option("--seed", idt_seed, "optimizer restart seed");

    // identify-mtr
    auto* idm = app.add_subcommand("identify-mtr",
                                   "point or set identification of marginal responses");
    std::string idm_config, idm_out = ".";
    std::vector<int> idm_K;
    int idm_res = 12, idm_degree = 2, idm_nodes = 64;
    double idm_fd = 0.05, idm_slack_eq = 1e-4, idm_slack_in = 0.0;
    idm->add_option("--config", idm_config, "DGP config JSON")->required();
    idm->add_option("--out", idm_out, "output directory");
    idm->add_option("--k", idm_K, "treatments of interest (default: all)");
    idm->add_option("--res", idm_res, "lattice nodes per dimension");
    idm->add_option("--fd-step", idm_fd, "central-difference step");
    idm->add_option("--degree", idm_degree, "Bernstein sieve degree");
    idm->add_option("--nodes", idm_nodes, "constraint nodes per family");
    idm->add_option("--slack-eq", idm_slack_eq, "equality slack");
    idm->add_option("--slack-in", idm_slack_in, "inequality slack");

    // effects
    auto* eff = app.add_subcommand("effects", "treatment effects from model artifacts");
    std::string eff_config, eff_query, eff_constraints, eff_out = ".";
    eff->add_option("--config", eff_config, "DGP config JSON")->required();
    eff->add_option("--query", eff_query, "effect query JSON")->required();
    eff->add_option("--constraints", eff_constraints,
                    "constraint-system artifact (interval mode)");
    eff->add_option("--out", eff_out, "output directory");

    // test-gprte
    auto* tg = app.add_subcommand("test-gprte", "gross policy-relevant treatment effect test");
    std::string tg_config, tg_dataset, tg_policy, tg_constraints, tg_weights, tg_out = ".";
    std::string tg_convention = "standard";
    double tg_alpha = 0.05;
    int tg_M = 1000, tg_memo = 32;
    uint64_t tg_seed = 0;
    tg->add_option("--config", tg_config, "DGP config JSON")->required();
    tg->add_option("--dataset", tg_dataset, "dataset CSV (instruments)")->required();
    tg->add_option("--policy", tg_policy, "policy pair JSON")->required();
    tg->add_option("--constraints", tg_constraints, "constraint-system artifact (set mode)");
    tg->add_option("--weights", tg_weights, "per-observation weights file");
    tg->add_option("--out", tg_out, "output directory");
    tg->add_option("--alpha", tg_alpha, "significance level");
    tg->add_option("--M", tg_M, "Monte Carlo draws per observation");
    tg->add_option("--seed", tg_seed, "master seed");
    tg->add_option("--convention", tg_convention, "standard|paper");
    tg->add_option("--memo-res", tg_memo, "LP memo grid resolution");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return run_simulate(sim_config, {sim_out}, sim_seed, sim_latent, sim_threads);
        if (dec->parsed()) return run_decompose(dec_rule, {dec_out});
        if (chk->parsed()) return run_check(chk_rule, {chk_out});
        if (idd->parsed())
            return run_identify_density(idd_config, idd_dataset, {idd_out}, idd_res, idd_fd,
                                        idd_family, idd_G, idd_seed);
        if (idt->parsed())
            return run_identify_threshold(idt_config, idt_dataset, {idt_out}, idt_degree,
                                          idt_bins, idt_seed);
        if (idm->parsed())
            return run_identify_mtr(idm_config, {idm_out}, idm_K, idm_res, idm_fd, idm_degree,
                                    idm_nodes, idm_slack_eq, idm_slack_in);
        if (eff->parsed()) return run_effects(eff_config, eff_query, eff_constraints, {eff_out});
        if (tg->parsed())
            return run_test_gprte(tg_config, tg_dataset, tg_policy, tg_constraints, tg_weights,
                                  {tg_out}, tg_alpha, tg_M, tg_seed, tg_convention, tg_memo);
    } catch (const nlohmann::json::exception& e) {
        Json err{{"error", e.what()}, {"kind", "config"}};
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const Error& e) {
        const std::string what = e.what();
        const bool config_error = what.rfind("cannot read", 0) == 0;
        Json err{{"error", what}, {"kind", config_error ? "config" : "computation"}};
        std::cerr << err.dump() << "\n";
        return config_error ? 2 : 3;
    }
    return 2;
}
