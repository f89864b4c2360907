#ifndef MSA_HARNESS_HPP
#define MSA_HARNESS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "msa/dynamics.hpp"
#include "msa/reduction.hpp"

// Monte Carlo experiment engine: JSON config, good-scale certification with
// Wilson intervals, probe dispatch, and deterministic CSV/JSON artifact
// emission.

namespace msa {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    int schema_version = 1;
    int d = 1;
    Distribution dist = Distribution::bernoulli(0.0, 1.0, 0.5, 8.0);
    double nu = 1.0;
    Interval I{-10.0, -9.0};
    std::vector<double> scales{20};
    // analysis parameters
    double m = 0.5, eta = 0.5, fraction = 0.01, p_target = 0.3;
    // ledger inputs
    double m0 = 1.0, eta0 = 0.5, p0 = 0.4, b = 1.0, rho = 0.75, J = 2.0;
    int N2 = -1;  // joint (rho, N2) choice; -1 = smallest admissible
    // seeds / sampling
    std::uint64_t master_seed = 1;
    int samples = 100;
    std::vector<std::string> probes;  // subset of certify shell reduce trap keythm dynamics
    // desk-scale overrides (negative = nominal value)
    double theta_override = -1, gamma = 0.25, delta_E = 1e-6;
    int energy_grid = 9;
    // geometry knobs used by shell/trap/dynamics probes
    double shell_l = 8, shell_L1 = 24, shell_L2 = 48;
    double t_max = 1e3;
    int time_points = 60;
    double sdl_s = 1.0, sdl_q = 1.0;
    // overrides actually applied on top of the file, echoed in the manifest
    std::map<std::string, std::string> applied_overrides;
};

namespace detail {

inline double req_num(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError("config field '" + key + "' missing or not a number");
    return j[key].get<double>();
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    if (j.contains("schema_version")) c.schema_version = j["schema_version"].get<int>();
    if (c.schema_version != 1) throw ConfigError("unsupported schema_version");
    c.d = int(detail::req_num(j, "d"));
    if (c.d < 1) throw ConfigError("config field 'd' must be >= 1");
    if (j.contains("distribution")) {
        const json& dj = j["distribution"];
        std::string kind = dj.value("kind", "bernoulli");
        double lambda = dj.value("lambda", 1.0);
        if (kind == "bernoulli")
            c.dist = Distribution::bernoulli(dj.value("v0", 0.0), dj.value("v1", 1.0),
                                             dj.value("q", 0.5), lambda);
        else if (kind == "uniform")
            c.dist = Distribution::uniform(dj.value("a", 0.0), dj.value("b", 1.0), lambda);
        else if (kind == "point")
            c.dist = Distribution::point(dj.value("v0", 0.0), lambda);
        else
            throw ConfigError("config field 'distribution.kind' unknown: " + kind);
    }
    c.nu = detail::req_num(j, "nu");
    if (!(c.nu > c.d / 2.0)) throw ConfigError("config field 'nu' must exceed d/2");
    if (j.contains("interval")) {
        c.I.lo = j["interval"].at(0).get<double>();
        c.I.hi = j["interval"].at(1).get<double>();
        if (!(c.I.lo < c.I.hi)) throw ConfigError("config field 'interval' must be increasing");
    }
    if (j.contains("scales")) {
        c.scales.clear();
        for (const auto& v : j["scales"]) c.scales.push_back(v.get<double>());
        if (c.scales.empty()) throw ConfigError("config field 'scales' must be nonempty");
    }
    auto opt = [&](const char* key, double& slot) {
        if (j.contains(key)) slot = j[key].get<double>();
    };
    opt("m", c.m);
    opt("eta", c.eta);
    if (!(c.eta > 0 && c.eta < 1)) throw ConfigError("config field 'eta' must lie in (0,1)");
    opt("fraction", c.fraction);
    opt("p_target", c.p_target);
    opt("m0", c.m0);
    opt("eta0", c.eta0);
    opt("p0", c.p0);
    opt("b", c.b);
    opt("rho", c.rho);
    opt("J", c.J);
    opt("theta_override", c.theta_override);
    opt("gamma", c.gamma);
    opt("delta_E", c.delta_E);
    opt("shell_l", c.shell_l);
    opt("shell_L1", c.shell_L1);
    opt("shell_L2", c.shell_L2);
    opt("t_max", c.t_max);
    opt("sdl_s", c.sdl_s);
    opt("sdl_q", c.sdl_q);
    if (j.contains("N2")) c.N2 = j["N2"].get<int>();
    if (j.contains("energy_grid")) c.energy_grid = j["energy_grid"].get<int>();
    if (j.contains("time_points")) c.time_points = j["time_points"].get<int>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("samples")) c.samples = j["samples"].get<int>();
    if (c.samples < 1) throw ConfigError("config field 'samples' must be >= 1");
    if (j.contains("probes"))
        for (const auto& p : j["probes"]) c.probes.push_back(p.get<std::string>());
    for (const auto& p : c.probes)
        if (p != "certify" && p != "shell" && p != "reduce" && p != "trap" && p != "keythm" &&
            p != "dynamics")
            throw ConfigError("config field 'probes' contains unknown probe: " + p);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

inline json config_to_json(const ExperimentConfig& c) {
    json dj;
    switch (c.dist.kind) {
        case Distribution::Kind::Bernoulli:
            dj = {{"kind", "bernoulli"}, {"v0", c.dist.v0}, {"v1", c.dist.v1}, {"q", c.dist.q}};
            break;
        case Distribution::Kind::Uniform:
            dj = {{"kind", "uniform"}, {"a", c.dist.a}, {"b", c.dist.b}};
            break;
        case Distribution::Kind::Point:
            dj = {{"kind", "point"}, {"v0", c.dist.v0}};
            break;
    }
    dj["lambda"] = c.dist.lambda;
    return json{{"schema_version", c.schema_version},
                {"d", c.d},
                {"distribution", dj},
                {"nu", c.nu},
                {"interval", {c.I.lo, c.I.hi}},
                {"scales", c.scales},
                {"m", c.m},
                {"eta", c.eta},
                {"fraction", c.fraction},
                {"p_target", c.p_target},
                {"m0", c.m0},
                {"eta0", c.eta0},
                {"p0", c.p0},
                {"b", c.b},
                {"rho", c.rho},
                {"J", c.J},
                {"N2", c.N2},
                {"master_seed", c.master_seed},
                {"samples", c.samples},
                {"probes", c.probes},
                {"theta_override", c.theta_override},
                {"gamma", c.gamma},
                {"delta_E", c.delta_E},
                {"energy_grid", c.energy_grid},
                {"shell_l", c.shell_l},
                {"shell_L1", c.shell_L1},
                {"shell_L2", c.shell_L2},
                {"t_max", c.t_max},
                {"time_points", c.time_points},
                {"sdl_s", c.sdl_s},
                {"sdl_q", c.sdl_q}};
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
    std::string dump = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

// ---------------------------------------------------------------------------

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        default: return "inconclusive";
    }
}

struct GoodScaleCertificate {
    double L = 0, E = 0;
    double p_hat = 0;
    WilsonInterval wilson;
    double target = 0;  // 1 - L^{-p d}
    Verdict verdict = Verdict::Inconclusive;
    int samples = 0;
    size_t near_singular = 0;
};

inline Verdict wilson_verdict(const WilsonInterval& w, double target) {
    if (w.lo >= target) return Verdict::Pass;
    if (w.hi < target) return Verdict::Fail;
    return Verdict::Inconclusive;
}

// Monte Carlo over independent disorder seeds at one center (translation
// invariance of the i.i.d. disorder makes the law center-independent).
inline GoodScaleCertificate certify_good_scale(const ExperimentConfig& c, double L, double E) {
    GoodScaleCertificate cert;
    cert.L = L;
    cert.E = E;
    cert.samples = c.samples;
    cert.target = 1.0 - std::pow(L, -c.p_target * c.d);
    Site x0(size_t(c.d), 0);
    Box box(x0, L);
    int good = 0;
    for (int s = 0; s < c.samples; ++s) {
        DisorderField field(sample_seed(c.master_seed, uint64_t(s)), c.dist);
        try {
            if (classify_box(assemble(box, field), E, c.m, c.eta, c.fraction).good) ++good;
        } catch (const NearSingular&) {
            ++cert.near_singular;  // counts as not good
        }
    }
    cert.p_hat = double(good) / double(c.samples);
    cert.wilson = wilson_interval(size_t(good), size_t(c.samples));
    cert.verdict = wilson_verdict(cert.wilson, cert.target);
    return cert;
}

struct IntervalCertification {
    std::vector<GoodScaleCertificate> certificates;
    double worst_p_hat = 1;
    Verdict worst_verdict = Verdict::Pass;
};

inline IntervalCertification certify_interval(const ExperimentConfig& c, double L,
                                              const std::vector<double>& energies) {
    IntervalCertification out;
    for (double E : energies) {
        GoodScaleCertificate cert = certify_good_scale(c, L, E);
        out.worst_p_hat = std::min(out.worst_p_hat, cert.p_hat);
        if (cert.verdict == Verdict::Fail) out.worst_verdict = Verdict::Fail;
        else if (cert.verdict == Verdict::Inconclusive && out.worst_verdict == Verdict::Pass)
            out.worst_verdict = Verdict::Inconclusive;
        out.certificates.push_back(cert);
    }
    if (energies.empty()) out.worst_p_hat = 0;
    return out;
}

inline std::vector<double> energy_grid(const Interval& I, int n) {
    std::vector<double> g;
    if (n <= 0) return g;
    if (n == 1) { g.push_back((I.lo + I.hi) / 2); return g; }
    for (int i = 0; i < n; ++i) g.push_back(I.lo + (I.hi - I.lo) * i / (n - 1));
    return g;
}

// ---------------------------------------------------------------------------
// artifact writers: all floats rendered with %.17g so identical runs are
// byte-identical

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

struct CsvWriter {
    std::ofstream out;
    CsvWriter(const std::filesystem::path& path, const std::string& header) : out(path) {
        if (!out) throw std::runtime_error("cannot open " + path.string());
        out << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << "\n";
    }
};

struct ProbeStatus {
    std::string name;
    bool ok = false;
    std::string error;
};

struct RunReport {
    std::filesystem::path out_dir;
    std::vector<ProbeStatus> statuses;
    bool all_ok() const {
        for (const auto& s : statuses)
            if (!s.ok) return false;
        return true;
    }
};

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump(2) << "\n";
}

namespace probes {

inline json run_certify(const ExperimentConfig& c, const std::filesystem::path& dir) {
    CsvWriter csv(dir / "certify.csv", "L,E,p_hat,wilson_lo,wilson_hi,target,verdict,samples");
    json summary = json::array();
    for (double L : c.scales) {
        IntervalCertification ic = certify_interval(c, L, energy_grid(c.I, c.energy_grid));
        for (const auto& cert : ic.certificates)
            csv.row({detail::fmt(cert.L), detail::fmt(cert.E), detail::fmt(cert.p_hat),
                     detail::fmt(cert.wilson.lo), detail::fmt(cert.wilson.hi),
                     detail::fmt(cert.target), to_string(cert.verdict),
                     std::to_string(cert.samples)});
        summary.push_back({{"L", L},
                           {"worst_p_hat", ic.worst_p_hat},
                           {"worst_verdict", to_string(ic.worst_verdict)}});
    }
    return json{{"per_scale", summary}};
}

inline json run_shell(const ExperimentConfig& c, const std::filesystem::path& dir) {
    double E0 = (c.I.lo + c.I.hi) / 2;
    ShellProbability sp = shell_probability(c.dist, c.master_seed, c.d, c.shell_l, c.shell_L1,
                                            c.shell_L2, E0, c.m, c.eta, c.samples, c.fraction,
                                            /*allow_small_scale=*/true);
    CsvWriter csv(dir / "shell.csv",
                  "l,L1,L2,E0,shell_lo,shell_hi,node_bad_lo,node_bad_hi,nominal_bound,measured_p,samples");
    csv.row({detail::fmt(c.shell_l), detail::fmt(c.shell_L1), detail::fmt(c.shell_L2),
             detail::fmt(E0), detail::fmt(sp.shell_prob.lo), detail::fmt(sp.shell_prob.hi),
             detail::fmt(sp.node_bad_prob.lo), detail::fmt(sp.node_bad_prob.hi),
             detail::fmt(sp.nominal_bound), detail::fmt(sp.measured_p),
             std::to_string(sp.samples)});
    return json{{"shell_prob", {sp.shell_prob.lo, sp.shell_prob.hi}},
                {"node_bad_prob", {sp.node_bad_prob.lo, sp.node_bad_prob.hi}},
                {"nominal_bound", sp.nominal_bound},
                {"measured_p", sp.measured_p}};
}

inline json run_reduce(const ExperimentConfig& c, const std::filesystem::path& dir) {
    ConstantsLedger led = derive_constants(c.m0, c.eta0, c.p0, c.p_target, c.b, c.d, c.rho, c.J, c.N2);
    CsvWriter csv(dir / "reduce.csv", "L,seed,base_count,survivor_count,theta,nominal_theta");
    json per_scale = json::array();
    Site x0(size_t(c.d), 0);
    for (double L : c.scales) {
        size_t base = 0, surv = 0;
        int nseeds = std::min(c.samples, 20);
        for (int s = 0; s < nseeds; ++s) {
            DisorderField field(sample_seed(c.master_seed, uint64_t(s)), c.dist);
            ReducedSpectrum red = reduced_spectrum(field, x0, L, c.I, led, c.theta_override);
            base += red.base.size();
            surv += red.survivors.size();
            csv.row({detail::fmt(L), std::to_string(s), std::to_string(red.base.size()),
                     std::to_string(red.survivors.size()), detail::fmt(red.theta),
                     detail::fmt(red.nominal_theta)});
        }
        per_scale.push_back({{"L", L}, {"base_total", base}, {"survivor_total", surv}});
    }
    return json{{"ledger",
                 {{"N1", led.N1}, {"M", led.M}, {"r", led.r}, {"K", led.K}, {"N2", led.N2},
                  {"beta", led.beta}, {"c", led.c}, {"mu_exp", led.mu_exp},
                  {"J", led.J}, {"J_nominal_floor", led.J_nominal_floor}}},
                {"per_scale", per_scale}};
}

inline json run_trap(const ExperimentConfig& c, const std::filesystem::path& dir) {
    double L = c.scales.front();
    double E0 = (c.I.lo + c.I.hi) / 2;
    Site x0(size_t(c.d), 0);
    Box host(x0, 3.0 * L);
    CsvWriter csv(dir / "trap.csv", "seed,event_holds,bad_boxes,bound_verified,worst_w,threshold");
    size_t events = 0, verified = 0;
    int nseeds = std::min(c.samples, 20);
    double theta_adj = (c.theta_override > 0) ? c.theta_override : 1.0;
    for (int s = 0; s < nseeds; ++s) {
        DisorderField field(sample_seed(c.master_seed, uint64_t(s)), c.dist);
        FiniteHamiltonian fh = assemble(host, field);
        EigenSystem sys = diagonalize(fh);
        TrapReport tr = trap_check(field, x0, L, E0, c.m, 1.6 * c.m, c.gamma, c.eta, sys,
                                   fh.sites, host, c.nu, theta_adj, 7, c.delta_E);
        if (tr.event_holds) ++events;
        if (tr.event_holds && tr.bound_verified) ++verified;
        csv.row({std::to_string(s), tr.event_holds ? "1" : "0", std::to_string(tr.bad_boxes),
                 tr.bound_verified ? "1" : "0", detail::fmt(tr.worst_w),
                 detail::fmt(tr.threshold)});
    }
    return json{{"seeds", nseeds}, {"events", events}, {"bound_verified", verified}};
}

inline json run_keythm(const ExperimentConfig& c, const std::filesystem::path& dir) {
    ConstantsLedger led = derive_constants(c.m0, c.eta0, c.p0, c.p_target, c.b, c.d, c.rho, c.J, c.N2);
    double L = c.scales.front();
    Site x0(size_t(c.d), 0);
    CsvWriter csv(dir / "keythm.csv",
                  "seed,grid_points,implication_violations,product_violations,theta");
    size_t impl = 0, prod = 0, pts = 0;
    int nseeds = std::min(c.samples, 20);
    for (int s = 0; s < nseeds; ++s) {
        DisorderField field(sample_seed(c.master_seed, uint64_t(s)), c.dist);
        KeyTheoremReport kr = key_theorem_probe(field, x0, L, c.I, led, c.nu, c.energy_grid,
                                                c.theta_override, c.delta_E);
        impl += kr.implication_violations;
        prod += kr.product_violations;
        pts += kr.grid_points;
        csv.row({std::to_string(s), std::to_string(kr.grid_points),
                 std::to_string(kr.implication_violations),
                 std::to_string(kr.product_violations), detail::fmt(kr.theta)});
    }
    return json{{"grid_points", pts},
                {"implication_violations", impl},
                {"product_violations", prod},
                {"violation_rate", pts ? double(impl) / double(pts) : 0.0}};
}

inline json run_dynamics(const ExperimentConfig& c, const std::filesystem::path& dir) {
    double L = c.scales.front();
    Site x0(size_t(c.d), 0);
    Box host(x0, L);
    EvolutionPlan plan;
    plan.filter = c.I;
    plan.x0 = x0;
    plan.times = log_time_grid(1.0, c.t_max, c.time_points);
    int nseeds = std::min(c.samples, 10);
    auto make_field = [&](int s) {
        return DisorderField(sample_seed(c.master_seed, uint64_t(s)), c.dist);
    };
    SdlStatistic stat = sdl_statistic(make_field, host, plan, c.sdl_q, c.sdl_s, nseeds);
    CsvWriter csv(dir / "dynamics.csv", "seed,t,moment");
    for (size_t s = 0; s < stat.trajectories.size(); ++s)
        for (size_t ti = 0; ti < stat.trajectories[s].times.size(); ++ti)
            csv.row({std::to_string(s), detail::fmt(stat.trajectories[s].times[ti]),
                     detail::fmt(stat.trajectories[s].moments[ti])});
    return json{{"mean", stat.mean},
                {"ci", {stat.ci_lo, stat.ci_hi}},
                {"leak_count", stat.leak_count},
                {"seeds", nseeds}};
}

}  // namespace probes

inline RunReport run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir,
                                const std::string& version = "0.1.0") {
    std::filesystem::create_directories(out_dir);
    RunReport rep;
    rep.out_dir = out_dir;
    json manifest = {{"version", version},
                     {"config", config_to_json(c)},
                     {"config_hash", config_hash(c)},
                     {"master_seed", c.master_seed},
                     {"overrides", json::object()},
                     {"probes", json::object()}};
    try {
        ConstantsLedger led = derive_constants(c.m0, c.eta0, c.p0, c.p_target, c.b, c.d, c.rho,
                                               c.J, c.N2);
        manifest["ledger"] = {{"N1", led.N1},     {"M", led.M},
                              {"r", led.r},       {"K", led.K},
                              {"N2", led.N2},     {"beta", led.beta},
                              {"c", led.c},       {"mu_exp", led.mu_exp},
                              {"J", led.J},       {"J_nominal_floor", led.J_nominal_floor},
                              {"nominal_theta", led.nominal_theta()}};
    } catch (const std::exception& e) {
        manifest["ledger"] = {{"status", "infeasible"}, {"error", e.what()}};
    }
    for (const auto& [k, v] : c.applied_overrides) manifest["overrides"][k] = v;
    if (c.theta_override > 0) manifest["overrides"]["theta_override"] = detail::fmt(c.theta_override);
    for (const std::string& name : c.probes) {
        ProbeStatus st;
        st.name = name;
        try {
            json summary;
            if (name == "certify") summary = probes::run_certify(c, out_dir);
            else if (name == "shell") summary = probes::run_shell(c, out_dir);
            else if (name == "reduce") summary = probes::run_reduce(c, out_dir);
            else if (name == "trap") summary = probes::run_trap(c, out_dir);
            else if (name == "keythm") summary = probes::run_keythm(c, out_dir);
            else if (name == "dynamics") summary = probes::run_dynamics(c, out_dir);
            write_json(out_dir / (name + ".summary.json"), summary);
            st.ok = true;
        } catch (const std::exception& e) {
            st.error = e.what();
        }
        manifest["probes"][name] = st.ok ? json{{"status", "ok"}}
                                         : json{{"status", "error"}, {"error", st.error}};
        rep.statuses.push_back(st);
    }
    write_json(out_dir / "manifest.json", manifest);
    return rep;
}

}  // namespace msa

#endif
