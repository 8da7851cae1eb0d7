#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "psc/app.hpp"

using namespace psc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("psc_test_config_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string field_of(const json& j) {
    try {
        from_json(j);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

// Toggle on a 40 x 40 grid with an explicit target; runs in well under a second.
RunConfig tiny() {
    RunConfig c = case_config(2);
    c.case_id = "tiny";
    c.cells = {40, 40};
    c.windows = 6;
    c.window_steps = 5;
    c.cost.target_rule = "explicit";
    c.cost.target = {52.5, 52.5};
    c.cost.stationary_steps = 0;
    c.initial = ShapeSpec{"gaussian", {150, 40}, {20, 20}, {}, {}, {}, 0};
    c.snapshot_every = 2;
    return c;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(PSC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST(CaseDefaults, RoundTripThroughJson) {
    for (int k = 1; k <= 3; ++k) {
        const auto c = case_config(k);
        const auto back = from_json(json::parse(to_json(c).dump()));
        EXPECT_TRUE(back == c) << "case " << k;
    }
    const auto full = case_config(3, true);
    EXPECT_TRUE(from_json(to_json(full)) == full);
    EXPECT_EQ(full.cells, (std::vector<std::size_t>{250, 250, 250}));
    EXPECT_EQ(case_config(3).cells, (std::vector<std::size_t>{64, 64, 64}));
}

TEST(CaseDefaults, ParameterTables) {
    const auto c1 = case_config(1);
    EXPECT_EQ(c1.params.genes[0].burst_frequency, 11);
    EXPECT_EQ(c1.params.genes[1].burst_frequency, 9);
    EXPECT_FALSE(c1.params.genes[0].inducer.has_value());
    EXPECT_TRUE(c1.params.genes[1].inducer.has_value());
    EXPECT_EQ(c1.window_steps, 10u);
    const auto c2 = case_config(2);
    EXPECT_EQ(c2.params.genes[0].hill_constant, 40);
    EXPECT_EQ(c2.window_steps, 20u);
    const auto c3 = case_config(3);
    EXPECT_EQ(c3.params.genes[2].hill_coefficient, 7);
    EXPECT_EQ(*c3.params.genes[2].regulator, 0u);
    EXPECT_EQ(c3.window_steps, 1u);
    EXPECT_EQ(parse_case("II"), 2);
    EXPECT_THROW(parse_case("4"), ConfigError);
}

TEST(Config, MissingGammaXNamesTheField) {
    json j = to_json(case_config(2));
    j["genes"][1].erase("gamma_x");
    EXPECT_EQ(field_of(j), "genes[1].gamma_x");
    try {
        from_json(j);
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("gamma_x"), std::string::npos);
    }
}

TEST(Config, UnknownAndMistypedFields) {
    json j = to_json(case_config(1));
    j["plan"]["windows"] = 3;
    EXPECT_EQ(field_of(j), "plan.windows");
    j = to_json(case_config(1));
    j["genes"][0]["k_m"] = "fast";
    EXPECT_EQ(field_of(j), "genes[0].k_m");
    j = to_json(case_config(1));
    j["mode"] = "turbo";
    EXPECT_EQ(field_of(j), "mode");
    j = to_json(case_config(1));
    j["initial"]["shape"] = "blob";
    EXPECT_EQ(field_of(j), "initial.shape");
    j = to_json(case_config(1));
    j.erase("domain");
    EXPECT_EQ(field_of(j), "domain");
}

TEST(Config, SemanticValidation) {
    json j = to_json(case_config(2));
    j["step"]["dt"] = 2.0;
    EXPECT_EQ(field_of(j), "step.dt");
    j = to_json(case_config(2));
    j["mode"] = "accelerated";
    EXPECT_EQ(field_of(j), "accelerator.model");
    j = to_json(case_config(2));
    j["mode"] = "replay";
    j["replay"]["initial"] = json::array();
    EXPECT_EQ(field_of(j), "replay.initial");
    j = to_json(case_config(2));
    j["ssa"]["row"] = 4;
    EXPECT_EQ(field_of(j), "ssa.row");
    j = to_json(case_config(3));
    j["cost"]["target_rule"] = "explicit";
    j["cost"]["target"] = {1, 2};
    EXPECT_EQ(field_of(j), "cost.target");
}

TEST(Config, Overrides) {
    json j = to_json(case_config(2));
    apply_override(j, "plan.M=50");
    apply_override(j, "genes.1.gamma_x=1.2");
    apply_override(j, "output=runs/x");
    apply_override(j, "cost.target=[10,20]");
    const auto c = from_json(j);
    EXPECT_EQ(c.windows, 50u);
    EXPECT_DOUBLE_EQ(c.params.genes[1].protein_decay, 1.2);
    EXPECT_EQ(c.output, "runs/x");
    EXPECT_EQ(c.cost.target, (std::vector<double>{10, 20}));
    EXPECT_THROW(apply_override(j, "plan.M"), ConfigError);
    EXPECT_THROW(apply_override(j, "=3"), ConfigError);
}

TEST(Config, LoadFromFile) {
    const auto dir = scratch("load");
    std::ofstream(dir / "c.json") << to_json(case_config(1)).dump(2);
    EXPECT_TRUE(load_config((dir / "c.json").string()) == case_config(1));
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
    EXPECT_THROW(load_config((dir / "none.json").string()), ConfigError);
}

TEST(Analysis, LocalMaximaAndHelpers) {
    const DomainSpec d({300, 300}, {30, 30});
    DensityGrid p = truncated_gaussian(d, std::vector<double>{55, 55}, std::vector<double>{15, 15});
    const auto q = truncated_gaussian(d, std::vector<double>{245, 245}, std::vector<double>{15, 15});
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = 0.5 * p[c] + 0.2 * q[c];
    const auto peaks = local_maxima(p);
    ASSERT_EQ(peaks.size(), 2u);
    EXPECT_EQ(cell_center(d, peaks[0]), (std::vector<double>{55, 55}));
    EXPECT_EQ(cell_center(d, peaks[1]), (std::vector<double>{245, 245}));
    EXPECT_NEAR(peak_in_box(p, Box{{200, 200}, {300, 300}}), 0.4, 1e-9);
    EXPECT_EQ(peak_in_box(p, Box{{100, 0}, {200, 100}}), 0.0);
    const auto m = marginal(p, 0);
    const auto v = valley_between_peaks(m);
    EXPECT_GT(d.center(0, v), 55.0);
    EXPECT_LT(d.center(0, v), 245.0);
    const auto mean = density_mean(uniform_density(d));
    EXPECT_NEAR(mean[0], 150.0, 1e-9);
    DensityGrid one(d);
    one[5] = 1.0;
    EXPECT_THROW(valley_between_peaks(marginal(one, 0)), NumericalError);
}

TEST(Execute, ArtifactsAndPlotData) {
    auto c = tiny();
    const auto dir = scratch("exec");
    const auto res = execute(c, dir / "run");
    for (const char* f : {"config.json", "trace.csv", "trace.json", "timing.csv", "timing.json", "summary.json",
                          "manifest.json", "final_density.bin", "snapshots/w000000.bin", "snapshots/w000006.bin"})
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    EXPECT_EQ(res.summary["trace"]["PIDE evaluations"], 24u);
    const auto files = emit_plot_data(dir / "run");
    EXPECT_FALSE(files.empty());
    // Input signal: one row per window, timestamp plus one column per inducer.
    std::ifstream is(dir / "run/plots/input_signal.csv");
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,s0,s1");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, c.windows);
    // Cost series is the trace's J column verbatim.
    std::ifstream tr(dir / "run/trace.csv"), co(dir / "run/plots/cost.csv");
    std::getline(tr, line);
    std::getline(co, line);
    std::size_t on0 = 0;
    for (std::string a, b; std::getline(tr, a) && std::getline(co, b);) {
        std::vector<std::string> fa, fb;
        std::stringstream sa(a), sb(b);
        for (std::string f; std::getline(sa, f, ',');) fa.push_back(f);
        for (std::string f; std::getline(sb, f, ',');) fb.push_back(f);
        EXPECT_EQ(fa[5], fb[1]);
        on0 += fa[3] == "1";
    }
    std::ifstream ac(dir / "run/plots/activation.csv");
    std::getline(ac, line);
    std::getline(ac, line);
    EXPECT_EQ(line.substr(0, 3), "s0,");
    EXPECT_NEAR(std::stod(line.substr(3)), static_cast<double>(on0) / static_cast<double>(c.windows), 1e-12);
    EXPECT_THROW(emit_plot_data(dir / "missing"), ConfigError);
}

TEST(Execute, ManifestIsReproducible) {
    auto c = tiny();
    const auto dir = scratch("repro");
    execute(c, dir / "a");
    execute(c, dir / "b");
    const auto ma = json::parse(slurp(dir / "a/manifest.json")), mb = json::parse(slurp(dir / "b/manifest.json"));
    EXPECT_EQ(ma["numeric_hash"], mb["numeric_hash"]);
    EXPECT_EQ(ma["artifacts"], mb["artifacts"]);
    EXPECT_FALSE(ma["artifacts"].contains("timing.csv"));
    c.seed = 9;
    c.cost.target = {67.5, 52.5};
    execute(c, dir / "c");
    const auto mc = json::parse(slurp(dir / "c/manifest.json"));
    EXPECT_NE(ma["numeric_hash"], mc["numeric_hash"]);
}

TEST(Execute, ReplayAndUncontrolledModes) {
    auto c = tiny();
    c.mode = "replay";
    const auto dir = scratch("modes");
    const auto r = execute(c, dir / "replay");
    EXPECT_TRUE(fs::exists(dir / "replay/contraction.csv"));
    EXPECT_EQ(r.summary["contraction"]["violations"], 0u);
    // Replaying the written trace gives the same distances.
    c.replay_trace = (dir / "replay/trace.csv").string();
    execute(c, dir / "replay2");
    EXPECT_EQ(slurp(dir / "replay/contraction.csv"), slurp(dir / "replay2/contraction.csv"));
    c.mode = "uncontrolled";
    const auto u = execute(c, dir / "unc");
    EXPECT_EQ(u.summary["trace"]["activations"], (std::vector<std::size_t>{0, 0}));
}

TEST(Exit, CodesByExceptionType) {
    EXPECT_EQ(exit_code(ConfigError("x", "y")), kExitConfig);
    EXPECT_EQ(exit_code(DomainMismatch("z")), kExitConfig);
    EXPECT_EQ(exit_code(NumericalError("n")), kExitNumerical);
    EXPECT_EQ(exit_code(std::runtime_error("r")), kExitOther);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    EXPECT_EQ(cli("validate-config --case 2"), kExitOk);
    EXPECT_EQ(cli("validate-config --case 7"), kExitConfig);
    json j = to_json(case_config(2));
    j["genes"][1].erase("gamma_x");
    std::ofstream((dir / "bad.json").string()) << j.dump();
    EXPECT_EQ(cli("validate-config --config " + (dir / "bad.json").string()), kExitConfig);
    EXPECT_EQ(cli("validate-config --case 2 --set plan.alpha=2"), kExitConfig);
    EXPECT_EQ(cli("frobnicate"), kExitConfig);
    // A short exhaustive run cannot reach the Case II level, so --assert must fail.
    std::ofstream((dir / "tiny.json").string()) << to_json(tiny()).dump();
    const std::string base = "run --config " + (dir / "tiny.json").string() + " --output " + (dir / "out").string();
    EXPECT_EQ(cli(base), kExitOk);
    EXPECT_EQ(cli(base + " --set case=II --assert"), kExitAssertion);
}
