#pragma once

// Run configuration: JSON schema, per-case defaults and validation.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psc/controller.hpp"
#include "psc/errors.hpp"
#include "psc/grid.hpp"
#include "psc/grn.hpp"
#include "psc/pide.hpp"

namespace psc {

using nlohmann::json;

/// Initial-condition shape. "stationary" relaxes uniform_box(lo, hi) (or the uniform
/// density when lo/hi are empty) for relax_steps fine steps without input.
struct ShapeSpec {
    std::string shape = "gaussian";  // gaussian | box | delta | uniform | stationary
    std::vector<double> center, sigma, lo, hi, point;
    std::size_t relax_steps = 0;

    bool operator==(const ShapeSpec&) const = default;
};

struct CostSpec {
    std::string type = "point_target";  // bimodal_regions | marginal_targets | point_target
    Box omega1, omega2, omega_c;
    double penalty = 2.0;
    // explicit | marginal_minima | stationary_mean (the last two use the uncontrolled stationary density)
    std::string target_rule = "explicit";
    std::vector<double> target;
    std::size_t stationary_steps = 0;  // relaxation length for the target rules
    std::vector<double> stationary_lo, stationary_hi;

    bool operator==(const CostSpec&) const = default;
};

struct SsaSpec {
    std::size_t trajectories = 100000;
    double horizon = 30.0;
    std::size_t row = 0;
    std::vector<double> initial;

    bool operator==(const SsaSpec&) const = default;
};

struct AcceleratorSpec {
    std::string model;          // network file, read or written depending on mode
    std::string dataset;        // optional CSV to train from instead of generating
    double reference_width = 2.0;
    std::size_t dataset_runs = 5;
    std::size_t dataset_windows = 400;
    std::size_t folds = 5;
    std::size_t max_epochs = 150;
    double holdout = 0.15;

    bool operator==(const AcceleratorSpec&) const = default;
};

struct RunConfig {
    std::string case_id = "custom";
    std::string mode = "exhaustive";  // exhaustive | accelerated | uncontrolled | replay | ssa | train-nn
    std::vector<double> upper;
    std::vector<std::size_t> cells;
    GrnParams params;
    StepConfig step;
    std::size_t window_steps = 1;
    std::size_t windows = 0;
    double alpha = 0.01;
    std::vector<double> kappa;  // empty: solve from alpha
    CostSpec cost;
    ShapeSpec initial;
    std::vector<ShapeSpec> replay_initial;  // extra initial densities for replay
    std::string replay_trace;               // trace CSV; empty: run the exhaustive reference first
    bool replay_fine_steps = false;
    SsaSpec ssa;
    AcceleratorSpec accelerator;
    std::string output = "psc_out";
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t snapshot_every = 10;
    bool full_scale = false;

    DomainSpec domain() const { return DomainSpec(upper, cells); }
    bool operator==(const RunConfig&) const = default;
};

inline const std::set<std::string>& known_modes() {
    static const std::set<std::string> m{"exhaustive", "accelerated", "uncontrolled", "replay", "ssa", "train-nn"};
    return m;
}

// ---------------------------------------------------------------------------
// JSON mapping.

namespace detail {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected an object");
    }
    ~Reader() = default;

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const json& raw(const std::string& key) const {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(at(key), "missing required field");
        return j_.at(key);
    }

    template <class T>
    T req(const std::string& key) const {
        const json& v = raw(key);
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(at(key), "wrong type");
        }
    }
    template <class T>
    T opt(const std::string& key, T fallback) const {
        seen_.insert(key);
        if (!has(key)) return fallback;
        return req<T>(key);
    }

    void mark(const std::string& key) const { seen_.insert(key); }

    /// Rejects keys that were never read (typos).
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown field");
    }

private:
    const json& j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

inline json box_to_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

inline Box box_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    Box b{r.req<std::vector<double>>("lo"), r.req<std::vector<double>>("hi")};
    r.finish();
    return b;
}

inline json shape_to_json(const ShapeSpec& s) {
    json j{{"shape", s.shape}};
    if (!s.center.empty()) j["center"] = s.center;
    if (!s.sigma.empty()) j["sigma"] = s.sigma;
    if (!s.lo.empty()) j["lo"] = s.lo;
    if (!s.hi.empty()) j["hi"] = s.hi;
    if (!s.point.empty()) j["point"] = s.point;
    if (s.relax_steps) j["relax_steps"] = s.relax_steps;
    return j;
}

inline ShapeSpec shape_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    ShapeSpec s;
    s.shape = r.req<std::string>("shape");
    s.center = r.opt<std::vector<double>>("center", {});
    s.sigma = r.opt<std::vector<double>>("sigma", {});
    s.lo = r.opt<std::vector<double>>("lo", {});
    s.hi = r.opt<std::vector<double>>("hi", {});
    s.point = r.opt<std::vector<double>>("point", {});
    s.relax_steps = r.opt<std::size_t>("relax_steps", 0);
    r.finish();
    static const std::set<std::string> shapes{"gaussian", "box", "delta", "uniform", "stationary"};
    if (!shapes.count(s.shape)) throw ConfigError(path + ".shape", "unknown shape '" + s.shape + "'");
    return s;
}

inline json gene_to_json(const GeneParams& g) {
    json j{{"k_m", g.burst_frequency}, {"k_x", g.translation_rate}, {"gamma_m", g.mrna_decay},
           {"gamma_x", g.protein_decay}, {"leakage", g.leakage}};
    j["regulator"] = g.regulator ? json(*g.regulator) : json(nullptr);
    j["K"] = g.hill_constant;
    j["H"] = g.hill_coefficient;
    j["inducer"] = g.inducer ? json{{"theta", g.inducer->theta}, {"mu", g.inducer->mu}} : json(nullptr);
    return j;
}

inline GeneParams gene_from_json(const json& j, const std::string& path) {
    Reader r(j, path);
    GeneParams g;
    g.burst_frequency = r.req<double>("k_m");
    g.translation_rate = r.req<double>("k_x");
    g.mrna_decay = r.req<double>("gamma_m");
    g.protein_decay = r.req<double>("gamma_x");
    g.leakage = r.req<double>("leakage");
    if (r.has("regulator")) g.regulator = r.req<std::size_t>("regulator");
    else r.mark("regulator");
    g.hill_constant = r.opt<double>("K", 1.0);
    g.hill_coefficient = r.opt<double>("H", 1.0);
    if (r.has("inducer")) {
        Reader ri(r.raw("inducer"), r.at("inducer"));
        g.inducer = InducerParams{ri.req<double>("theta"), ri.req<double>("mu")};
        ri.finish();
    } else {
        r.mark("inducer");
    }
    r.finish();
    return g;
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    json j;
    j["case"] = c.case_id;
    j["mode"] = c.mode;
    j["domain"] = {{"upper", c.upper}, {"cells", c.cells}};
    j["genes"] = json::array();
    for (const auto& g : c.params.genes) j["genes"].push_back(detail::gene_to_json(g));
    j["step"] = {{"dt", c.step.dt},
                 {"renormalize", c.step.renormalize},
                 {"mass_tolerance", c.step.mass_tolerance},
                 {"clamp_tolerance", c.step.clamp_tolerance}};
    j["plan"] = {{"w", c.window_steps}, {"M", c.windows}, {"alpha", c.alpha}, {"kappa", c.kappa}};
    json cost{{"type", c.cost.type}};
    if (c.cost.type == "bimodal_regions") {
        cost["omega1"] = detail::box_to_json(c.cost.omega1);
        cost["omega2"] = detail::box_to_json(c.cost.omega2);
        cost["omega_c"] = detail::box_to_json(c.cost.omega_c);
        cost["penalty"] = c.cost.penalty;
    } else {
        cost["target_rule"] = c.cost.target_rule;
        cost["target"] = c.cost.target;
        cost["stationary_steps"] = c.cost.stationary_steps;
        cost["stationary_lo"] = c.cost.stationary_lo;
        cost["stationary_hi"] = c.cost.stationary_hi;
    }
    j["cost"] = cost;
    j["initial"] = detail::shape_to_json(c.initial);
    json rp{{"trace", c.replay_trace}, {"fine_steps", c.replay_fine_steps}, {"initial", json::array()}};
    for (const auto& s : c.replay_initial) rp["initial"].push_back(detail::shape_to_json(s));
    j["replay"] = rp;
    j["ssa"] = {{"trajectories", c.ssa.trajectories}, {"horizon", c.ssa.horizon}, {"row", c.ssa.row}, {"initial", c.ssa.initial}};
    const auto& a = c.accelerator;
    j["accelerator"] = {{"model", a.model},
                        {"dataset", a.dataset},
                        {"reference_width", a.reference_width},
                        {"dataset_runs", a.dataset_runs},
                        {"dataset_windows", a.dataset_windows},
                        {"folds", a.folds},
                        {"max_epochs", a.max_epochs},
                        {"holdout", a.holdout}};
    j["output"] = c.output;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["snapshot_every"] = c.snapshot_every;
    j["full_scale"] = c.full_scale;
    return j;
}

inline void validate(const RunConfig& c);

inline RunConfig from_json(const json& j) {
    detail::Reader r(j, "");
    RunConfig c;
    c.case_id = r.opt<std::string>("case", "custom");
    c.mode = r.opt<std::string>("mode", "exhaustive");
    {
        detail::Reader d(r.raw("domain"), "domain");
        c.upper = d.req<std::vector<double>>("upper");
        c.cells = d.req<std::vector<std::size_t>>("cells");
        d.finish();
    }
    const json& genes = r.raw("genes");
    if (!genes.is_array()) throw ConfigError("genes", "expected an array");
    for (std::size_t i = 0; i < genes.size(); ++i)
        c.params.genes.push_back(detail::gene_from_json(genes[i], "genes[" + std::to_string(i) + "]"));
    if (r.has("step")) {
        detail::Reader s(r.raw("step"), "step");
        c.step.dt = s.opt<double>("dt", c.step.dt);
        c.step.renormalize = s.opt<bool>("renormalize", c.step.renormalize);
        c.step.mass_tolerance = s.opt<double>("mass_tolerance", c.step.mass_tolerance);
        c.step.clamp_tolerance = s.opt<double>("clamp_tolerance", c.step.clamp_tolerance);
        s.finish();
    } else {
        r.mark("step");
    }
    {
        detail::Reader p(r.raw("plan"), "plan");
        c.window_steps = p.req<std::size_t>("w");
        c.windows = p.req<std::size_t>("M");
        c.alpha = p.opt<double>("alpha", c.alpha);
        c.kappa = p.opt<std::vector<double>>("kappa", {});
        p.finish();
    }
    {
        detail::Reader k(r.raw("cost"), "cost");
        c.cost.type = k.req<std::string>("type");
        if (c.cost.type == "bimodal_regions") {
            c.cost.omega1 = detail::box_from_json(k.raw("omega1"), "cost.omega1");
            c.cost.omega2 = detail::box_from_json(k.raw("omega2"), "cost.omega2");
            c.cost.omega_c = detail::box_from_json(k.raw("omega_c"), "cost.omega_c");
            c.cost.penalty = k.opt<double>("penalty", 2.0);
        } else if (c.cost.type == "marginal_targets" || c.cost.type == "point_target") {
            c.cost.target_rule = k.opt<std::string>("target_rule", "explicit");
            c.cost.target = k.opt<std::vector<double>>("target", {});
            c.cost.stationary_steps = k.opt<std::size_t>("stationary_steps", 0);
            c.cost.stationary_lo = k.opt<std::vector<double>>("stationary_lo", {});
            c.cost.stationary_hi = k.opt<std::vector<double>>("stationary_hi", {});
        } else {
            throw ConfigError("cost.type", "unknown cost functional '" + c.cost.type + "'");
        }
        k.finish();
    }
    c.initial = detail::shape_from_json(r.raw("initial"), "initial");
    if (r.has("replay")) {
        detail::Reader p(r.raw("replay"), "replay");
        c.replay_trace = p.opt<std::string>("trace", "");
        c.replay_fine_steps = p.opt<bool>("fine_steps", false);
        if (p.has("initial")) {
            const json& arr = p.raw("initial");
            if (!arr.is_array()) throw ConfigError("replay.initial", "expected an array");
            for (std::size_t i = 0; i < arr.size(); ++i)
                c.replay_initial.push_back(detail::shape_from_json(arr[i], "replay.initial[" + std::to_string(i) + "]"));
        } else {
            p.mark("initial");
        }
        p.finish();
    } else {
        r.mark("replay");
    }
    if (r.has("ssa")) {
        detail::Reader s(r.raw("ssa"), "ssa");
        c.ssa.trajectories = s.opt<std::size_t>("trajectories", c.ssa.trajectories);
        c.ssa.horizon = s.opt<double>("horizon", c.ssa.horizon);
        c.ssa.row = s.opt<std::size_t>("row", c.ssa.row);
        c.ssa.initial = s.opt<std::vector<double>>("initial", {});
        s.finish();
    } else {
        r.mark("ssa");
    }
    if (r.has("accelerator")) {
        detail::Reader a(r.raw("accelerator"), "accelerator");
        auto& s = c.accelerator;
        s.model = a.opt<std::string>("model", s.model);
        s.dataset = a.opt<std::string>("dataset", s.dataset);
        s.reference_width = a.opt<double>("reference_width", s.reference_width);
        s.dataset_runs = a.opt<std::size_t>("dataset_runs", s.dataset_runs);
        s.dataset_windows = a.opt<std::size_t>("dataset_windows", s.dataset_windows);
        s.folds = a.opt<std::size_t>("folds", s.folds);
        s.max_epochs = a.opt<std::size_t>("max_epochs", s.max_epochs);
        s.holdout = a.opt<double>("holdout", s.holdout);
        a.finish();
    } else {
        r.mark("accelerator");
    }
    c.output = r.opt<std::string>("output", c.output);
    c.seed = r.opt<std::uint64_t>("seed", c.seed);
    c.threads = r.opt<std::size_t>("threads", c.threads);
    c.snapshot_every = r.opt<std::size_t>("snapshot_every", c.snapshot_every);
    c.full_scale = r.opt<bool>("full_scale", false);
    r.finish();
    validate(c);
    return c;
}

// ---------------------------------------------------------------------------
// Validation.

namespace detail {

inline void validate_shape(const ShapeSpec& s, const std::vector<double>& upper, const std::string& path) {
    const std::size_t n = upper.size();
    auto dim = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != n) throw ConfigError(path + "." + name, "needs " + std::to_string(n) + " entries");
    };
    if (s.shape == "gaussian") {
        dim(s.center, "center");
        dim(s.sigma, "sigma");
        for (double v : s.sigma)
            if (!(v > 0.0)) throw ConfigError(path + ".sigma", "must be positive");
    } else if (s.shape == "box") {
        dim(s.lo, "lo");
        dim(s.hi, "hi");
    } else if (s.shape == "delta") {
        dim(s.point, "point");
        for (std::size_t i = 0; i < n; ++i)
            if (!(s.point[i] >= 0.0 && s.point[i] <= upper[i])) throw ConfigError(path + ".point", "outside the domain");
    } else if (s.shape == "stationary") {
        if (s.relax_steps == 0) throw ConfigError(path + ".relax_steps", "must be positive");
        if (!s.lo.empty() || !s.hi.empty()) {
            dim(s.lo, "lo");
            dim(s.hi, "hi");
        }
    }
}

}  // namespace detail

inline void validate(const RunConfig& c) {
    if (!known_modes().count(c.mode)) throw ConfigError("mode", "unknown mode '" + c.mode + "'");
    if (c.upper.size() != c.cells.size()) throw ConfigError("domain.cells", "one cell count per axis");
    const auto d = c.domain();
    c.params.validate();
    if (c.params.size() != d.dims()) throw ConfigError("genes", "gene count must equal the domain dimension");
    c.step.validate(c.params);
    if (c.window_steps < 1) throw ConfigError("plan.w", "must be at least 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("plan.alpha", "must lie in (0, 1)");
    const auto plan = SwitchingPlan::make(c.params, d, c.window_steps, c.windows, c.alpha, c.kappa);
    if (c.cost.type == "bimodal_regions") {
        validate_cost(BimodalRegions{c.cost.omega1, c.cost.omega2, c.cost.omega_c, c.cost.penalty}, d);
    } else {
        if (c.cost.target_rule == "explicit") {
            if (c.cost.target.size() != d.dims()) throw ConfigError("cost.target", "needs one entry per axis");
            snap_to_cell(d, c.cost.target);
        } else if (c.cost.target_rule == "marginal_minima" || c.cost.target_rule == "stationary_mean") {
            if (c.cost.stationary_steps == 0) throw ConfigError("cost.stationary_steps", "must be positive for derived targets");
            if (c.cost.target_rule == "marginal_minima" && c.cost.type != "marginal_targets")
                throw ConfigError("cost.target_rule", "marginal_minima applies to marginal_targets");
        } else {
            throw ConfigError("cost.target_rule", "unknown rule '" + c.cost.target_rule + "'");
        }
    }
    detail::validate_shape(c.initial, c.upper, "initial");
    for (std::size_t i = 0; i < c.replay_initial.size(); ++i)
        detail::validate_shape(c.replay_initial[i], c.upper, "replay.initial[" + std::to_string(i) + "]");
    if (c.mode == "replay" && c.replay_initial.empty())
        throw ConfigError("replay.initial", "replay needs at least one extra initial density");
    if (c.ssa.row >= plan.configurations()) throw ConfigError("ssa.row", "row index out of range");
    if (!c.ssa.initial.empty() && c.ssa.initial.size() != d.dims()) throw ConfigError("ssa.initial", "one value per gene");
    if (!(c.ssa.horizon >= 0.0)) throw ConfigError("ssa.horizon", "must be non-negative");
    if (c.ssa.trajectories == 0) throw ConfigError("ssa.trajectories", "must be positive");
    if (c.accelerator.folds < 2) throw ConfigError("accelerator.folds", "need at least two folds");
    if (!(c.accelerator.holdout > 0.0 && c.accelerator.holdout < 1.0))
        throw ConfigError("accelerator.holdout", "must lie in (0, 1)");
    if (!(c.accelerator.reference_width > 0.0)) throw ConfigError("accelerator.reference_width", "must be positive");
    if (c.mode == "accelerated" && c.accelerator.model.empty())
        throw ConfigError("accelerator.model", "accelerated mode needs a trained network file");
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config", "cannot open " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("parse error: ") + e.what());
    }
    return from_json(j);
}

/// Sets a dotted leaf ("plan.M", "genes.1.gamma_x") to a JSON literal, or a bare string.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("set", "expected key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    std::string ptr;
    std::stringstream ks(key);
    for (std::string part; std::getline(ks, part, '.');) ptr += "/" + part;
    try {
        j[json::json_pointer(ptr)] = value;
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("cannot override: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Case defaults.

inline RunConfig case_config(int which, bool full_scale = false) {
    RunConfig c;
    c.full_scale = full_scale;
    switch (which) {
        case 1: {
            c.case_id = "I";
            c.upper = {300, 300};
            c.cells = {300, 300};
            c.params.genes = {GeneParams{11, 100, 8.4, 1, 0.1, 1, 32, 4, std::nullopt},
                              GeneParams{9, 80, 8.4, 1, 0.1, 0, 30, 4, InducerParams{0.1, 2}}};
            c.window_steps = 10;
            c.windows = 600;
            c.cost.type = "bimodal_regions";
            c.cost.omega1 = Box{{90, 0}, {150, 30}};
            c.cost.omega2 = Box{{0, 55}, {30, 105}};
            c.cost.omega_c = Box{{35, 60}, {90, 150}};
            c.initial = ShapeSpec{"gaussian", {10, 90}, {10, 10}, {}, {}, {}, 0};
            c.replay_initial = {ShapeSpec{"gaussian", {120, 10}, {10, 10}, {}, {}, {}, 0},
                                ShapeSpec{"box", {}, {}, {100, 100}, {200, 200}, {}, 0}};
            c.ssa.initial = {10, 90};
            break;
        }
        case 2: {
            c.case_id = "II";
            c.upper = {300, 300};
            c.cells = {300, 300};
            const GeneParams s{10, 100, 10, 1, 0.1, 1, 40, 4, InducerParams{0.1, 2}};
            c.params.genes = {s, s};
            c.params.genes[1].regulator = 0;
            c.window_steps = 20;
            c.windows = 200;
            c.cost.type = "marginal_targets";
            c.cost.target_rule = "marginal_minima";
            c.cost.stationary_steps = 8000;
            c.initial = ShapeSpec{"stationary", {}, {}, {}, {}, {}, 8000};
            c.replay_initial = {ShapeSpec{"gaussian", {20, 150}, {10, 10}, {}, {}, {}, 0},
                                ShapeSpec{"gaussian", {150, 20}, {10, 10}, {}, {}, {}, 0}};
            c.ssa.initial = {40, 40};
            break;
        }
        case 3: {
            c.case_id = "III";
            const std::size_t n = full_scale ? 250 : 64;
            c.upper = {1000, 1000, 1000};
            c.cells = {n, n, n};
            const double km[3] = {125, 100, 115}, kx[3] = {90, 110, 100}, h[3] = {8, 9, 7}, th[3] = {0.08, 0.06, 0.11};
            for (std::size_t i = 0; i < 3; ++i)
                c.params.genes.push_back(GeneParams{km[i], kx[i], 17.6822, 1, 0.15, (i + 1) % 3, 200, h[i], InducerParams{th[i], 2}});
            c.window_steps = 1;
            c.windows = full_scale ? 1600 : 600;
            c.cost.type = "point_target";
            c.cost.target_rule = "stationary_mean";
            c.cost.stationary_steps = 5000;
            c.cost.stationary_lo = {0, 0, 0};
            c.cost.stationary_hi = {500, 500, 500};
            c.initial = ShapeSpec{"stationary", {}, {}, {0, 0, 0}, {500, 500, 500}, {}, 5000};
            c.replay_initial = {ShapeSpec{"gaussian", {600, 200, 200}, {50, 50, 50}, {}, {}, {}, 0},
                                ShapeSpec{"gaussian", {200, 200, 600}, {50, 50, 50}, {}, {}, {}, 0}};
            c.ssa.initial = {300, 300, 300};
            c.snapshot_every = full_scale ? 100 : 10;
            break;
        }
        default:
            throw ConfigError("case", "unknown case " + std::to_string(which));
    }
    c.output = "psc_out/case" + c.case_id;
    validate(c);
    return c;
}

inline int parse_case(const std::string& s) {
    if (s == "1" || s == "I" || s == "i") return 1;
    if (s == "2" || s == "II" || s == "ii") return 2;
    if (s == "3" || s == "III" || s == "iii") return 3;
    throw ConfigError("case", "unknown case '" + s + "'");
}

}  // namespace psc
