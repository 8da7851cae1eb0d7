#pragma once

// Run orchestration: problem setup from a RunConfig, the six modes, artifacts and plot data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psc/accelerator.hpp"
#include "psc/config.hpp"
#include "psc/contractivity.hpp"
#include "psc/controller.hpp"
#include "psc/errors.hpp"
#include "psc/grid.hpp"
#include "psc/pide.hpp"

namespace psc {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Density analysis shared by assertions and tests.

/// Cells whose value is >= every neighbour (including diagonals) and > 0.
inline std::vector<std::size_t> local_maxima(const DensityGrid& p) {
    const auto& d = p.domain;
    const std::size_t n = d.dims();
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (!(p[c] > 0.0)) continue;
        const Index3 idx = d.unflat(c);
        bool peak = true;
        const int reach[3] = {1, n > 1 ? 1 : 0, n > 2 ? 1 : 0};
        for (int a = -reach[0]; a <= reach[0] && peak; ++a)
            for (int b = -reach[1]; b <= reach[1] && peak; ++b)
                for (int e = -reach[2]; e <= reach[2] && peak; ++e) {
                    if (a == 0 && b == 0 && e == 0) continue;
                    const long q[3] = {static_cast<long>(idx[0]) + a, static_cast<long>(idx[1]) + b, static_cast<long>(idx[2]) + e};
                    bool inside = true;
                    for (std::size_t i = 0; i < 3; ++i)
                        if (q[i] < 0 || q[i] >= static_cast<long>(d.shape3()[i])) inside = false;
                    if (!inside) continue;
                    const Index3 qi{static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]), static_cast<std::size_t>(q[2])};
                    if (p[d.flat(qi)] > p[c]) peak = false;
                }
        if (peak) out.push_back(c);
    }
    return out;
}

/// Largest normalised local maximum inside `box`, or 0 when there is none.
inline double peak_in_box(const DensityGrid& p, const Box& box) {
    const double top = *std::max_element(p.values.begin(), p.values.end());
    double best = 0.0;
    for (auto c : local_maxima(p)) {
        const auto x = cell_center(p.domain, c);
        if (box.contains(x)) best = std::max(best, p[c] / top);
    }
    return best;
}

inline std::vector<double> density_mean(const DensityGrid& p) {
    const auto& d = p.domain;
    std::vector<double> m(d.dims(), 0.0);
    double mass = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        const Index3 idx = d.unflat(c);
        for (std::size_t i = 0; i < d.dims(); ++i) m[i] += d.center(i, idx[i]) * p[c];
        mass += p[c];
    }
    for (double& v : m) v /= mass;
    return m;
}

/// Minimum of the curve between its two largest interior local maxima.
inline std::size_t valley_between_peaks(const DensityGrid& m) {
    std::vector<std::size_t> peaks;
    for (std::size_t k = 1; k + 1 < m.size(); ++k)
        if (m[k] > m[k - 1] && m[k] >= m[k + 1]) peaks.push_back(k);
    if (peaks.size() < 2) throw NumericalError("stationary marginal has fewer than two interior maxima");
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return m[a] > m[b]; });
    const std::size_t lo = std::min(peaks[0], peaks[1]), hi = std::max(peaks[0], peaks[1]);
    std::size_t best = lo;
    for (std::size_t k = lo; k <= hi; ++k)
        if (m[k] < m[best]) best = k;
    return best;
}

// ---------------------------------------------------------------------------
// Problem setup.

struct Problem {
    RunConfig config;
    DomainSpec domain;
    SwitchingPlan plan;
    std::optional<PscEngine> engine;
    std::vector<double> target;  // snapped; empty for region costs
    CostFunctional cost;
    DensityGrid initial;

    /// Target used for NN features; the centre of the first region for region costs.
    std::vector<double> feature_target() const {
        if (!target.empty()) return target;
        const auto& b = std::get<BimodalRegions>(cost).first;
        std::vector<double> x(b.lo.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * (b.lo[i] + b.hi[i]);
        return snap_to_cell(domain, x).center;
    }
};

namespace detail {

/// Uncontrolled relaxations keyed by their start box and length.
class StationaryCache {
public:
    const DensityGrid& get(const PscEngine& engine, const std::vector<double>& lo, const std::vector<double>& hi,
                           std::size_t steps) {
        for (const auto& e : entries_)
            if (e.lo == lo && e.hi == hi && e.steps == steps) return e.density;
        const auto& d = engine.domain();
        DensityGrid p = lo.empty() ? uniform_density(d) : uniform_box(d, lo, hi);
        p = engine.propagator(0).propagate(p, steps);
        p.time = 0.0;
        entries_.push_back({lo, hi, steps, std::move(p)});
        return entries_.back().density;
    }

private:
    struct Entry {
        std::vector<double> lo, hi;
        std::size_t steps;
        DensityGrid density;
    };
    std::deque<Entry> entries_;
};

}  // namespace detail

inline DensityGrid make_density(const ShapeSpec& s, const PscEngine& engine, detail::StationaryCache& cache) {
    const auto& d = engine.domain();
    if (s.shape == "gaussian") return truncated_gaussian(d, s.center, s.sigma);
    if (s.shape == "box") return uniform_box(d, s.lo, s.hi);
    if (s.shape == "delta") return grid_delta(d, s.point);
    if (s.shape == "uniform") return uniform_density(d);
    return cache.get(engine, s.lo, s.hi, s.relax_steps);
}

inline Problem setup(const RunConfig& cfg) {
    validate(cfg);
    Problem pr;
    pr.config = cfg;
    pr.domain = cfg.domain();
    pr.plan = SwitchingPlan::make(cfg.params, pr.domain, cfg.window_steps, cfg.windows, cfg.alpha, cfg.kappa);
    pr.engine.emplace(pr.domain, cfg.params, cfg.step, pr.plan, EngineOptions{cfg.threads});
    const auto& c = cfg.cost;
    detail::StationaryCache cache;
    if (c.type == "bimodal_regions") {
        pr.cost = BimodalRegions{c.omega1, c.omega2, c.omega_c, c.penalty};
    } else {
        std::vector<double> x = c.target;
        if (c.target_rule != "explicit") {
            const auto& st = cache.get(*pr.engine, c.stationary_lo, c.stationary_hi, c.stationary_steps);
            if (c.target_rule == "stationary_mean") {
                x = density_mean(st);
            } else {
                x.assign(pr.domain.dims(), 0.0);
                for (std::size_t i = 0; i < pr.domain.dims(); ++i) {
                    const auto m = pr.domain.dims() == 1 ? st : marginal(st, i);
                    x[i] = pr.domain.center(i, valley_between_peaks(m));
                }
            }
        }
        pr.target = snap_to_cell(pr.domain, x).center;
        if (c.type == "marginal_targets") pr.cost = MarginalTargets{pr.target};
        else pr.cost = PointTarget{pr.target};
    }
    validate_cost(pr.cost, pr.domain);
    pr.initial = make_density(cfg.initial, *pr.engine, cache);
    return pr;
}

// ---------------------------------------------------------------------------
// Artifacts.

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// Relative output paths are resolved against $PSC_OUTPUT_ROOT when it is set.
inline fs::path resolve_output(const std::string& out) {
    fs::path p(out);
    if (p.is_relative())
        if (const char* root = std::getenv("PSC_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
    return p;
}

/// Writes files under one run directory and records their hashes for the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    const fs::path& dir() const noexcept { return dir_; }

    /// Timing-bearing files are written but left out of the reproducibility hash.
    void text(const std::string& name, const std::string& content, bool timing = false) {
        const fs::path path = dir_ / name;
        fs::create_directories(path.parent_path());
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        os << content;
        if (timing) timing_.push_back(name);
        else hashes_[name] = hex64(fnv1a(content));
    }
    void json_file(const std::string& name, const json& j, bool timing = false) { text(name, j.dump(2) + "\n", timing); }
    void density(const std::string& name, const DensityGrid& p) {
        std::ostringstream os;
        write_binary(os, p);
        text(name, os.str());
    }

    json manifest(const RunConfig& cfg) const {
        json m;
        m["version"] = kVersion;
        m["config_hash"] = hex64(fnv1a(to_json(cfg).dump()));
        m["seed"] = cfg.seed;
        m["mode"] = cfg.mode;
        m["case"] = cfg.case_id;
        m["artifacts"] = hashes_;
        m["timing_artifacts"] = timing_;
        std::uint64_t h = fnv1a(m["config_hash"].get<std::string>());
        for (const auto& [k, v] : hashes_) h = fnv1a(k + "=" + v, h);
        m["numeric_hash"] = hex64(h);
        return m;
    }
    void write_manifest(const RunConfig& cfg) {
        std::ofstream os(dir_ / "manifest.json");
        os << manifest(cfg).dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::map<std::string, std::string> hashes_;
    std::vector<std::string> timing_;
};

inline std::string window_name(std::size_t w) {
    std::ostringstream os;
    os << "snapshots/w" << std::setw(6) << std::setfill('0') << w << ".bin";
    return os.str();
}

inline json stats_json(const RunStats& s) {
    return {{"steps", s.steps},
            {"max_relative_drift", s.max_relative_drift},
            {"total_drift", s.total_drift},
            {"max_clamped", s.max_clamped},
            {"max_gain_loss_mismatch", s.max_gain_loss_mismatch},
            {"boundary_mass", s.boundary_mass}};
}

/// Table-style metrics of one trace. Elapsed time is returned separately.
inline json trace_metrics(const ControlTrace& t, std::size_t configurations) {
    json j;
    j["mode"] = t.mode;
    j["windows"] = t.windows.size();
    j["Iterations"] = t.windows.size();
    j["PIDE evaluations"] = t.evaluations();
    j["NN acceptances"] = t.accepts();
    j["configurations"] = configurations;
    j["initial_J"] = t.initial_cost;
    j["final_J"] = t.final_cost();
    double best = t.initial_cost;
    json first = nullptr;
    for (const auto& w : t.windows) {
        best = std::max(best, w.cost);
        if (first.is_null() && w.cost >= 0.999) first = w.m + 1;
    }
    j["max_J"] = best;
    j["first_window_J_ge_0.999"] = first;
    std::vector<std::size_t> on(t.controlled.size(), 0);
    for (const auto& w : t.windows)
        for (std::size_t k = 0; k < w.bits.size(); ++k) on[k] += w.bits[k] ? 1 : 0;
    j["activations"] = on;
    j["solver"] = stats_json(t.stats);
    return j;
}

inline void write_trace(ArtifactWriter& out, const ControlTrace& t, std::size_t configurations, const std::string& prefix = "") {
    std::ostringstream tr, tm;
    t.write_csv(tr, false);
    out.text(prefix + "trace.csv", tr.str());
    tm << "m,evaluations,wall_s\n" << std::setprecision(9);
    for (const auto& w : t.windows) tm << w.m << ',' << w.evaluations << ',' << w.wall_seconds << '\n';
    out.text(prefix + "timing.csv", tm.str(), true);
    json meta = trace_metrics(t, configurations);
    meta["controlled"] = t.controlled;
    meta["saturation"] = t.saturation;
    meta["window_steps"] = t.window_steps;
    meta["dt"] = t.dt;
    meta["cost"] = t.cost_kind;
    out.json_file(prefix + "trace.json", meta);
    out.json_file(prefix + "timing.json", {{"Elapsed time", t.elapsed()}, {"windows", t.windows.size()}}, true);
    for (const auto& s : t.snapshots) out.density(prefix + window_name(s.window), s.density);
}

/// The applied row of every window in a trace CSV.
inline std::vector<std::size_t> read_trace_rows(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("replay.trace", "cannot open " + path);
    std::string line;
    std::getline(is, line);
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) head.push_back(f);
    }
    const auto it = std::find(head.begin(), head.end(), "row");
    if (it == head.end()) throw ConfigError("replay.trace", "trace has no 'row' column");
    const auto col = static_cast<std::size_t>(it - head.begin());
    std::vector<std::size_t> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        for (std::size_t k = 0; k <= col; ++k) std::getline(ss, f, ',');
        try {
            rows.push_back(std::stoul(f));
        } catch (const std::exception&) {
            throw ConfigError("replay.trace", "bad row entry '" + f + "'");
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Assertions.

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline Check drift_check(const RunStats& s) {
    return {"mass drift <= 1e-6 per step", s.max_relative_drift <= 1e-6, "max " + fmt(s.max_relative_drift)};
}

/// Final J >= level and every J over the last `tail` fraction of windows >= level.
inline Check holds_level(const ControlTrace& t, double level, double tail) {
    const std::size_t n = t.windows.size();
    const auto from = static_cast<std::size_t>(std::floor((1.0 - tail) * static_cast<double>(n)));
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t m = from; m < n; ++m) low = std::min(low, t.windows[m].cost);
    const bool ok = n > 0 && low >= level;
    return {"J >= " + fmt(level) + " over the final " + fmt(100 * tail) + "% of windows", ok, "min " + fmt(low)};
}

inline Check argmax_near(const DensityGrid& p, const std::vector<double>& target, double cells) {
    const auto x = cell_center(p.domain, argmax_cell(p));
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - target[i]) / p.domain.spacing(i));
    std::ostringstream os;
    os << "argmax (";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << "), " << worst << " cells from target";
    return {"argmax within " + fmt(cells) + " cells of the target", worst <= cells, os.str()};
}

/// Controlled: a local maximum with p~ >= level inside each region.
inline Check bimodal_check(const DensityGrid& p, const BimodalRegions& r, double level) {
    const double a = peak_in_box(p, r.first), b = peak_in_box(p, r.second);
    return {"local maxima in both regions", a >= level && b >= level, "peaks " + fmt(a) + ", " + fmt(b)};
}

/// Uncontrolled: global maximum in the first region and no significant local maximum in the second.
inline Check unimodal_check(const DensityGrid& p, const BimodalRegions& r, double level) {
    const bool top = r.first.contains(cell_center(p.domain, argmax_cell(p)));
    const double b = peak_in_box(p, r.second);
    return {"maximum only in the first region", top && b < level, "argmax in first " + std::to_string(top) + ", second peak " + fmt(b)};
}

/// Every marginal has two interior maxima, the smaller at least `level` of the larger.
inline Check bimodal_marginals(const DensityGrid& p, double level) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.domain.dims(); ++i) {
        const auto m = p.domain.dims() == 1 ? p : marginal(p, i);
        std::vector<double> peaks;
        for (std::size_t k = 1; k + 1 < m.size(); ++k)
            if (m[k] > m[k - 1] && m[k] >= m[k + 1]) peaks.push_back(m[k]);
        std::sort(peaks.rbegin(), peaks.rend());
        worst = std::min(worst, peaks.size() < 2 ? 0.0 : peaks[1] / peaks[0]);
    }
    return {"bimodal marginals", worst >= level, "second/first peak " + fmt(worst)};
}

inline Check accounting_check(const ControlTrace& t, std::size_t configurations) {
    const std::size_t m = t.windows.size(), a = t.accepts();
    const std::size_t expected = t.mode == "exhaustive" ? m * configurations : a + configurations * (m - a);
    return {"evaluation accounting", t.evaluations() == expected,
            std::to_string(t.evaluations()) + " vs " + std::to_string(expected)};
}

// ---------------------------------------------------------------------------
// Modes.

struct RunOutput {
    fs::path dir;
    json summary;
    std::vector<Check> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
};

namespace detail {

inline RunOptions progress(const RunConfig& cfg, std::ostream* log, std::size_t total) {
    RunOptions o;
    o.snapshot_every = cfg.snapshot_every;
    if (log) {
        const std::size_t every = std::max<std::size_t>(1, total / 10);
        o.on_window = [log, every, total](const WindowRecord& w) {
            if ((w.m + 1) % every == 0 || w.m + 1 == total)
                *log << "  window " << (w.m + 1) << "/" << total << " J=" << std::setprecision(6) << w.cost << "\n";
        };
    }
    return o;
}

inline void control_checks(const Problem& pr, const PscResult& r, std::vector<Check>& checks) {
    const auto& id = pr.config.case_id;
    const auto& t = r.trace;
    if (t.mode == "uncontrolled") {
        if (const auto* b = std::get_if<BimodalRegions>(&pr.cost)) checks.push_back(unimodal_check(r.final_density, *b, 0.1));
        if (std::holds_alternative<MarginalTargets>(pr.cost)) checks.push_back(bimodal_marginals(r.final_density, 0.1));
        return;
    }
    if (t.mode == "exhaustive" || t.mode == "accelerated") checks.push_back(accounting_check(t, pr.plan.configurations()));
    if (id == "I") checks.push_back(bimodal_check(r.final_density, std::get<BimodalRegions>(pr.cost), 0.1));
    if (id == "II") {
        checks.push_back(holds_level(t, 1.95, 0.2));
        checks.push_back(argmax_near(r.final_density, pr.target, 2.0));
    }
    if (id == "III") checks.push_back({"final J > 0.9", t.final_cost() > 0.9, "J " + fmt(t.final_cost())});
}

inline void summarize(const Problem& pr, RunOutput& out) {
    out.summary["case"] = pr.config.case_id;
    out.summary["mode"] = pr.config.mode;
    out.summary["kappa"] = pr.plan.saturation;
    out.summary["target"] = pr.target;
    out.summary["configurations"] = pr.plan.configurations();
}

inline std::vector<double> ssa_start(const Problem& pr) {
    if (!pr.config.ssa.initial.empty()) return pr.config.ssa.initial;
    if (!pr.config.initial.center.empty()) return pr.config.initial.center;
    throw ConfigError("ssa.initial", "needs a starting state");
}

}  // namespace detail

/// Exhaustive runs recorded as training samples. Run 0 uses the reference initial density;
/// later runs start from random Gaussians, and point targets are jittered as well.
inline void collect_dataset(const Problem& pr, std::size_t runs, std::size_t windows, Dataset& data,
                            std::ostream* log = nullptr, std::size_t first = 0) {
    const auto& cfg = pr.config;
    const auto collect_plan = SwitchingPlan::make(cfg.params, pr.domain, cfg.window_steps, windows, cfg.alpha, cfg.kappa);
    const PscEngine ce(pr.domain, cfg.params, cfg.step, collect_plan, EngineOptions{cfg.threads});
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t run = 0; run < runs; ++run) {
        DensityGrid p0 = pr.initial;
        CostFunctional cost = pr.cost;
        std::vector<double> tgt = pr.feature_target();
        if (run > 0) {
            std::vector<double> c(pr.domain.dims()), s(pr.domain.dims());
            for (std::size_t i = 0; i < c.size(); ++i) {
                c[i] = (0.1 + 0.8 * unit(rng)) * pr.domain.upper(i);
                s[i] = (0.03 + 0.07 * unit(rng)) * pr.domain.upper(i);
            }
            p0 = truncated_gaussian(pr.domain, c, s);
            if (auto* pt = std::get_if<PointTarget>(&cost)) {
                for (std::size_t i = 0; i < tgt.size(); ++i)
                    tgt[i] = std::clamp(tgt[i] + (unit(rng) - 0.5) * 0.2 * pr.domain.upper(i), 0.0, pr.domain.upper(i));
                tgt = snap_to_cell(pr.domain, tgt).center;
                pt->target = tgt;
            }
        }
        if (run < first) continue;
        const auto ref = TargetReference::make(pr.domain, tgt, cfg.accelerator.reference_width);
        if (log) *log << "  collecting run " << run << "\n";
        collect_samples(ce, cost, p0, cfg.step, ref, run, data);
    }
}

/// Executes cfg.mode and writes all artifacts under `dir`.
inline RunOutput execute(const RunConfig& cfg, const fs::path& dir, std::ostream* log = nullptr) {
    Problem pr = setup(cfg);
    const PscEngine& engine = *pr.engine;
    ArtifactWriter out(dir);
    RunOutput res;
    res.dir = dir;
    detail::summarize(pr, res);
    json cj = to_json(cfg);
    out.json_file("config.json", cj);
    const std::size_t nr = pr.plan.configurations();
    if (log) *log << "case " << cfg.case_id << " mode " << cfg.mode << " -> " << dir.string() << "\n";

    auto record = [&](const PscResult& r, const std::string& prefix) {
        write_trace(out, r.trace, nr, prefix);
        out.density(prefix + "final_density.bin", r.final_density);
        res.checks.push_back(drift_check(r.trace.stats));
        return trace_metrics(r.trace, nr);
    };

    if (cfg.mode == "exhaustive" || cfg.mode == "uncontrolled") {
        const auto opts = detail::progress(cfg, log, cfg.windows);
        const PscResult r = cfg.mode == "exhaustive"
                                ? run_psc(engine, pr.cost, pr.initial, cfg.step, opts)
                                : run_profile(engine, pr.cost, pr.initial, cfg.step, std::vector<std::size_t>(cfg.windows, 0),
                                              opts, "uncontrolled");
        res.summary["trace"] = record(r, "");
        detail::control_checks(pr, r, res.checks);
    } else if (cfg.mode == "accelerated") {
        const Mlp net = Mlp::load(cfg.accelerator.model);
        if (net.inputs() != feature_count(pr.plan.inputs(), pr.domain.dims()) || net.outputs() != pr.plan.inputs())
            throw ConfigError("accelerator.model", "network shape does not match this problem");
        const auto ref = TargetReference::make(pr.domain, pr.feature_target(), cfg.accelerator.reference_width);
        AcceleratedOptions ao;
        ao.run = detail::progress(cfg, log, cfg.windows);
        const auto r = run_accelerated(engine, pr.cost, pr.initial, cfg.step, mlp_proposer(net, ref), ao);
        res.summary["trace"] = record(r.psc, "");
        detail::control_checks(pr, r.psc, res.checks);
        res.checks.push_back({"accepts > 0", r.psc.trace.accepts() > 0, std::to_string(r.psc.trace.accepts())});
    } else if (cfg.mode == "replay") {
        std::vector<std::size_t> rows;
        if (!cfg.replay_trace.empty()) {
            rows = read_trace_rows(cfg.replay_trace);
        } else {
            const auto r = run_psc(engine, pr.cost, pr.initial, cfg.step, detail::progress(cfg, log, cfg.windows));
            res.summary["trace"] = record(r, "");
            rows = r.trace.rows();
        }
        std::vector<DensityGrid> init{pr.initial};
        std::vector<std::string> labels{"initial"};
        detail::StationaryCache cache;
        for (std::size_t i = 0; i < cfg.replay_initial.size(); ++i) {
            init.push_back(make_density(cfg.replay_initial[i], engine, cache));
            labels.push_back("replay" + std::to_string(i));
        }
        ReplayOptions ro;
        ro.fine_steps = cfg.replay_fine_steps;
        const auto rep = replay_profile(engine, init, labels, rows, ro);
        std::ostringstream os;
        rep.write_csv(os);
        out.text("contraction.csv", os.str());
        const json cs = rep.summary();
        out.json_file("contraction.json", cs);
        res.summary["contraction"] = cs;
        res.checks.push_back({"no distance increase", rep.violations() == 0, std::to_string(rep.violations()) + " violations"});
        for (const auto& p : rep.pairs)
            res.checks.push_back({"decay fit " + labels[p.a] + "/" + labels[p.b], p.fit.rate > 0.0 && p.fit.r2 > 0.9,
                                  "phi " + fmt(p.fit.rate) + " r2 " + fmt(p.fit.r2)});
    } else if (cfg.mode == "ssa") {
        std::vector<SsaSegment> profile;
        std::vector<std::size_t> rows;
        if (!cfg.replay_trace.empty()) {
            rows = read_trace_rows(cfg.replay_trace);
            profile = profile_segments(pr.plan, rows, cfg.step.dt);
        } else {
            const auto steps = static_cast<std::size_t>(std::llround(cfg.ssa.horizon / cfg.step.dt));
            profile = {{static_cast<double>(steps) * cfg.step.dt, pr.plan.input(cfg.ssa.row)}};
            const std::size_t full = steps / pr.plan.window_steps;
            rows.assign(full, cfg.ssa.row);
        }
        SsaConfig sc;
        sc.trajectories = cfg.ssa.trajectories;
        sc.initial = detail::ssa_start(pr);
        sc.seed = cfg.seed;
        sc.threads = cfg.threads;
        const auto s = ssa_simulate(cfg.params, profile, pr.domain, sc);
        out.density("ssa_histogram.bin", s.histogram);
        // PIDE on the same profile from the delta start, for comparison.
        DensityGrid q = grid_delta(pr.domain, sc.initial);
        for (auto r : rows) q = engine.window(r, q);
        double left = s.histogram.time - q.time;
        const auto extra = static_cast<std::size_t>(std::llround(std::max(0.0, left) / cfg.step.dt));
        if (extra) q = engine.propagator(rows.empty() ? cfg.ssa.row : rows.back()).propagate(q, extra);
        out.density("pide_density.bin", q);
        const double l1 = l1_distance(s.histogram, q);
        json sj{{"trajectories", sc.trajectories}, {"horizon", s.histogram.time}, {"events", s.events},
                {"proposals", s.proposals}, {"clamped", s.clamped}, {"l1_vs_pide", l1}};
        out.json_file("ssa.json", sj);
        res.summary["ssa"] = sj;
        res.checks.push_back({"clamped fraction < 1%", s.clamped * 100 < sc.trajectories, std::to_string(s.clamped)});
    } else if (cfg.mode == "train-nn") {
        Dataset data;
        if (!cfg.accelerator.dataset.empty() && fs::exists(cfg.accelerator.dataset)) {
            std::ifstream is(cfg.accelerator.dataset);
            data = Dataset::read_csv(is);
        } else {
            collect_dataset(pr, cfg.accelerator.dataset_runs, cfg.accelerator.dataset_windows, data, log);
        }
        std::ostringstream ds;
        data.write_csv(ds);
        out.text("dataset.csv", ds.str());
        TrainOptions to;
        to.folds = cfg.accelerator.folds;
        to.holdout = cfg.accelerator.holdout;
        to.max_epochs = cfg.accelerator.max_epochs;
        to.seed = cfg.seed;
        to.threads = cfg.threads;
        TrainReport rep;
        const Mlp net = train(data, to, rep);
        std::ostringstream ms, rs;
        net.save(ms);
        out.text("model.bin", ms.str());
        if (!cfg.accelerator.model.empty()) net.save(cfg.accelerator.model);
        rep.write_text(rs);
        out.text("train_report.txt", rs.str());
        json tj{{"parameters", rep.parameters}, {"samples", rep.samples}, {"holdout_samples", rep.holdout_samples},
                {"cv_exact_match", rep.cv_mean.exact_match}, {"cv_bit_accuracy", rep.cv_mean.bit_accuracy},
                {"holdout_exact_match", rep.holdout.exact_match}, {"holdout_bit_accuracy", rep.holdout.bit_accuracy},
                {"label_histogram", rep.label_histogram}, {"warnings", rep.warnings}};
        out.json_file("train.json", tj);
        res.summary["train"] = tj;
        bool ordered = rep.holdout.bit_accuracy >= rep.holdout.exact_match;
        for (const auto& f : rep.folds) ordered = ordered && f.test.bit_accuracy >= f.test.exact_match;
        res.checks.push_back({"bit accuracy >= exact match", ordered, "holdout BA " + fmt(rep.holdout.bit_accuracy)});
    }

    json checks = json::array();
    for (const auto& c : res.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    res.summary["checks"] = checks;
    out.json_file("summary.json", res.summary);
    out.write_manifest(cfg);
    return res;
}

/// Process exit status for an exception escaping a mode.
enum ExitCode { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitNumerical = 3, kExitAssertion = 4 };

inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainMismatch*>(&e)) return kExitConfig;
    if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
    return kExitOther;
}

// ---------------------------------------------------------------------------
// Plot data.

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_table(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("run_dir", "missing artifact " + path.string());
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(is, line);) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        rows.push_back(std::move(f));
    }
    return rows;
}

inline void write_heatmap(const fs::path& path, const DensityGrid& p) {
    const double top = *std::max_element(p.values.begin(), p.values.end());
    std::ofstream os(path);
    os << "x1,x2,p,p_norm\n" << std::setprecision(12);
    for (std::size_t c = 0; c < p.size(); ++c) {
        const auto x = cell_center(p.domain, c);
        os << x[0] << ',' << x[1] << ',' << p[c] << ',' << (top > 0 ? p[c] / top : 0.0) << '\n';
    }
}

inline void write_marginals(const fs::path& path, const DensityGrid& p) {
    std::ofstream os(path);
    os << "axis,x,marginal,marginal_norm\n" << std::setprecision(12);
    for (std::size_t i = 0; i < p.domain.dims(); ++i) {
        const auto m = p.domain.dims() == 1 ? p : marginal(p, i);
        const auto mn = normalize_by_max(m);
        for (std::size_t k = 0; k < m.size(); ++k)
            os << i << ',' << p.domain.center(i, k) << ',' << m[k] << ',' << mn[k] << '\n';
    }
}

}  // namespace detail

/// Per-plot CSVs under <run>/plots from a completed run directory.
inline std::vector<fs::path> emit_plot_data(const fs::path& run) {
    const auto table = detail::read_csv_table(run / "trace.csv");
    if (table.empty()) throw ConfigError("run_dir", "empty trace.csv");
    const auto& head = table.front();
    auto col = [&](const std::string& name) {
        const auto it = std::find(head.begin(), head.end(), name);
        if (it == head.end()) throw ConfigError("trace.csv", "missing column " + name);
        return static_cast<std::size_t>(it - head.begin());
    };
    std::vector<std::size_t> bit_cols;
    std::vector<std::string> bit_names;
    for (std::size_t k = 0; k < head.size(); ++k)
        if (head[k].size() > 1 && head[k][0] == 's' && std::isdigit(static_cast<unsigned char>(head[k][1]))) {
            bit_cols.push_back(k);
            bit_names.push_back(head[k]);
        }
    const std::size_t ct = col("t_m"), cj = col("J");
    const fs::path dir = run / "plots";
    fs::create_directories(dir);
    std::vector<fs::path> written;

    {
        std::ofstream os(dir / "input_signal.csv");
        os << "t";
        for (const auto& n : bit_names) os << ',' << n;
        os << '\n';
        for (std::size_t r = 1; r < table.size(); ++r) {
            os << table[r][ct];
            for (auto k : bit_cols) os << ',' << table[r][k];
            os << '\n';
        }
        written.push_back(dir / "input_signal.csv");
    }
    {
        std::ofstream os(dir / "cost.csv");
        os << "t,J\n";
        for (std::size_t r = 1; r < table.size(); ++r) os << table[r][ct] << ',' << table[r][cj] << '\n';
        written.push_back(dir / "cost.csv");
    }
    {
        std::ofstream os(dir / "activation.csv");
        os << "inducer,frequency,mean_on_windows\n" << std::setprecision(12);
        const std::size_t m = table.size() - 1;
        for (std::size_t b = 0; b < bit_cols.size(); ++b) {
            std::size_t on = 0, runs = 0;
            bool prev = false;
            for (std::size_t r = 1; r < table.size(); ++r) {
                const bool v = table[r][bit_cols[b]] == "1";
                on += v ? 1 : 0;
                if (v && !prev) ++runs;
                prev = v;
            }
            os << bit_names[b] << ',' << (m ? static_cast<double>(on) / static_cast<double>(m) : 0.0) << ','
               << (runs ? static_cast<double>(on) / static_cast<double>(runs) : 0.0) << '\n';
        }
        written.push_back(dir / "activation.csv");
    }
    std::vector<fs::path> snaps;
    if (fs::exists(run / "snapshots"))
        for (const auto& e : fs::directory_iterator(run / "snapshots"))
            if (e.path().extension() == ".bin") snaps.push_back(e.path());
    std::sort(snaps.begin(), snaps.end());
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const auto p = load_binary(snaps[k].string());
        const std::string stem = snaps[k].stem().string();
        const fs::path mp = dir / ("marginals_" + stem + ".csv");
        detail::write_marginals(mp, p);
        written.push_back(mp);
        // Heatmaps for the first and last snapshot only; the tables are large.
        if (p.domain.dims() == 2 && (k == 0 || k + 1 == snaps.size())) {
            const fs::path hp = dir / ("heatmap_" + stem + ".csv");
            detail::write_heatmap(hp, p);
            written.push_back(hp);
        }
    }
    if (fs::exists(run / "contraction.csv")) {
        fs::copy_file(run / "contraction.csv", dir / "pairwise_distance.csv", fs::copy_options::overwrite_existing);
        written.push_back(dir / "pairwise_distance.csv");
    }
    return written;
}

}  // namespace psc
