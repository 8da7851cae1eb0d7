#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psc/psc.hpp"

namespace {

struct Common {
    std::string config, case_id, mode, output;
    std::vector<std::string> sets;
    std::size_t threads = 0;
    long long seed = -1;
    bool assert_checks = false, full_scale = false, full_rate = false, dump = false;
};

void add_common(CLI::App* cmd, Common& o, bool with_mode) {
    auto* cfg = cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--case", o.case_id, "built-in case study (1, 2, 3)")->excludes(cfg);
    if (with_mode) cmd->add_option("--mode", o.mode, "exhaustive | accelerated | uncontrolled | replay | ssa | train-nn");
    cmd->add_option("--set", o.sets, "override a leaf, e.g. plan.M=50 or genes.1.gamma_x=1.2");
    cmd->add_option("--output", o.output, "run directory (relative paths use $PSC_OUTPUT_ROOT)");
    cmd->add_option("--threads", o.threads, "worker cap");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_flag("--assert", o.assert_checks, "exit 4 when a mode check fails");
    cmd->add_flag("--full-scale", o.full_scale, "250^3 grid and 1600 windows for case 3");
    cmd->add_flag("--full-rate-snapshots", o.full_rate, "keep a snapshot after every window");
}

psc::RunConfig build(const Common& o, const std::string& forced_mode) {
    psc::json j;
    if (!o.config.empty()) {
        std::ifstream is(o.config);
        try {
            j = psc::json::parse(is);
        } catch (const psc::json::parse_error& e) {
            throw psc::ConfigError("config", std::string("parse error: ") + e.what());
        }
    } else if (!o.case_id.empty()) {
        j = psc::to_json(psc::case_config(psc::parse_case(o.case_id), o.full_scale));
    } else {
        throw psc::ConfigError("config", "pass --config or --case");
    }
    if (!forced_mode.empty()) j["mode"] = forced_mode;
    else if (!o.mode.empty()) j["mode"] = o.mode;
    if (!o.output.empty()) j["output"] = o.output;
    if (o.threads) j["threads"] = o.threads;
    if (o.seed >= 0) j["seed"] = o.seed;
    if (o.full_rate) j["snapshot_every"] = 1;
    for (const auto& s : o.sets) psc::apply_override(j, s);
    return psc::from_json(j);
}

int run(const Common& o, const std::string& forced_mode) {
    const auto cfg = build(o, forced_mode);
    const auto dir = psc::resolve_output(cfg.output);
    const auto res = psc::execute(cfg, dir, &std::cerr);
    for (const auto& c : res.checks) std::cout << (c.pass ? "ok   " : "FAIL ") << c.name << ": " << c.detail << '\n';
    std::cout << "artifacts in " << dir.string() << '\n';
    return o.assert_checks && !res.passed() ? psc::kExitAssertion : psc::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic switching control of gene regulatory networks"};
    app.require_subcommand(1);
    Common o;
    std::string trace, run_dir, model;
    std::size_t trajectories = 0;

    auto* run_cmd = app.add_subcommand("run", "run a case or config in the selected mode");
    add_common(run_cmd, o, true);
    auto* replay_cmd = app.add_subcommand("replay", "replay one switching profile on several initial densities");
    add_common(replay_cmd, o, false);
    replay_cmd->add_option("--trace", trace, "trace CSV to replay (default: run exhaustive PSC first)");
    auto* ssa_cmd = app.add_subcommand("ssa", "stochastic simulation histogram");
    add_common(ssa_cmd, o, false);
    ssa_cmd->add_option("--trace", trace, "trace CSV giving the input profile");
    ssa_cmd->add_option("--trajectories", trajectories, "trajectory count");
    auto* train_cmd = app.add_subcommand("train-nn", "collect PSC samples and train the proposal network");
    add_common(train_cmd, o, false);
    train_cmd->add_option("--model", model, "where to write the trained network");
    auto* plots_cmd = app.add_subcommand("emit-plots", "write per-plot CSVs from a run directory");
    plots_cmd->add_option("run_dir", run_dir, "completed run directory")->required();
    auto* check_cmd = app.add_subcommand("validate-config", "parse and validate a configuration");
    add_common(check_cmd, o, true);
    check_cmd->add_flag("--dump", o.dump, "print the validated configuration as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? psc::kExitOk : psc::kExitConfig;
    }

    try {
        if (!trace.empty()) o.sets.push_back("replay.trace=\"" + trace + "\"");
        if (trajectories) o.sets.push_back("ssa.trajectories=" + std::to_string(trajectories));
        if (!model.empty()) o.sets.push_back("accelerator.model=\"" + model + "\"");
        if (*run_cmd) return run(o, "");
        if (*replay_cmd) return run(o, "replay");
        if (*ssa_cmd) return run(o, "ssa");
        if (*train_cmd) return run(o, "train-nn");
        if (*plots_cmd) {
            for (const auto& p : psc::emit_plot_data(run_dir)) std::cout << p.string() << '\n';
            return psc::kExitOk;
        }
        if (*check_cmd) {
            const auto cfg = build(o, "");
            if (o.dump) std::cout << psc::to_json(cfg).dump(2) << '\n';
            else std::cout << "config ok\n";
            return psc::kExitOk;
        }
    } catch (const std::exception& e) {
        const int code = psc::exit_code(e);
        const char* kind = code == psc::kExitConfig ? "config error" : code == psc::kExitNumerical ? "numerical error" : "error";
        std::cerr << kind << ": " << e.what() << '\n';
        return code;
    }
    return psc::kExitOther;
}
