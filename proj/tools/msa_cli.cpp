// Command-line front end: one subcommand per probe plus `run <config.json>`
// for full experiment bundles.  Exit codes: 0 done, 2 config error, 3 probe
// internal error.

#include <CLI11.hpp>

#include <msa/harness.hpp>

#include <iostream>

namespace {

// --override k=v on top of the base JSON config
msa::json apply_overrides(msa::json base, const std::vector<std::string>& overrides,
                          std::map<std::string, std::string>& applied) {
    for (const std::string& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw msa::ConfigError("override must look like key=value: " + kv);
        std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
            base[key] = msa::json::parse(val);  // numbers, arrays, booleans
        } catch (const std::exception&) {
            base[key] = val;  // bare strings
        }
        applied[key] = val;
    }
    return base;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for multiscale localization analysis of the "
                 "discrete Anderson model"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    uint64_t seed = 0;
    bool seed_set = false, samples_set = false;
    int samples = 0;
    std::vector<std::string> overrides;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--samples", samples, "Monte Carlo sample count")
            ->each([&](const std::string&) { samples_set = true; });
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--override", overrides, "config override key=value (repeatable)");
    };

    std::vector<std::string> probe_names{"certify", "shell", "reduce", "trap", "keythm",
                                         "dynamics"};
    for (const auto& name : probe_names) add_common(app.add_subcommand(name, name + " probe"));
    CLI::App* run = app.add_subcommand("run", "run an experiment bundle from a JSON config");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    add_common(run);

    CLI11_PARSE(app, argc, argv);

    msa::ExperimentConfig cfg;
    try {
        msa::json base = msa::json::object();
        if (app.got_subcommand("run")) {
            std::ifstream in(config_path);
            if (!in) throw msa::ConfigError("cannot open config file: " + config_path);
            in >> base;
        } else {
            base = {{"d", 1}, {"nu", 1.0}};
        }
        std::map<std::string, std::string> applied;
        base = apply_overrides(base, overrides, applied);
        cfg = msa::parse_config(base);
        cfg.applied_overrides = applied;
        if (seed_set) {
            cfg.master_seed = seed;
            cfg.applied_overrides["master_seed"] = std::to_string(seed);
        }
        if (samples_set) {
            cfg.samples = samples;
            cfg.applied_overrides["samples"] = std::to_string(samples);
        }
        if (!app.got_subcommand("run")) {
            for (const auto& name : probe_names)
                if (app.got_subcommand(name)) cfg.probes = {name};
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        msa::RunReport rep = msa::run_experiment(cfg, out_dir);
        for (const auto& st : rep.statuses) {
            std::cout << st.name << ": " << (st.ok ? "ok" : "error") << "\n";
            if (!st.ok) std::cerr << "  " << st.error << "\n";
        }
        std::cout << "artifacts in " << rep.out_dir.string() << "\n";
        if (!rep.all_ok()) return 3;
    } catch (const std::exception& e) {
        std::cerr << "probe error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
