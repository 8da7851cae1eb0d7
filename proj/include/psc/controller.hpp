#pragma once

// Predictive-switching control: binary input configurations, saturation
// levels, cost functionals on the predicted density and the greedy
// one-window-ahead selection loop.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "psc/errors.hpp"
#include "psc/grid.hpp"
#include "psc/grn.hpp"
#include "psc/parallel.hpp"
#include "psc/pide.hpp"

namespace psc {

using Bits = std::vector<int>;

/// Rows enumerate {0,1}^n in counting order; row r holds the bits of r, most significant first.
inline std::vector<Bits> build_config_matrix(std::size_t n) {
    if (n > 16) throw ConfigError("n", "too many inputs for exhaustive enumeration");
    std::vector<Bits> s(std::size_t{1} << n, Bits(n, 0));
    for (std::size_t r = 0; r < s.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) s[r][j] = static_cast<int>((r >> (n - 1 - j)) & 1u);
    return s;
}

inline std::size_t row_index(const Bits& bits) {
    std::size_t r = 0;
    for (int b : bits) r = (r << 1) | static_cast<std::size_t>(b != 0);
    return r;
}

struct Saturation {
    double kappa = 0.0;
    bool already_suppressed = false;  // F_target >= 1: no input needed
};

/// Inducer level at which repression at x_max reaches 1 - alpha.
inline Saturation compute_saturation(double alpha, double hill_constant, double hill_coefficient, double x_max,
                                     double theta, double mu) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
    if (!(hill_constant > 0.0) || !(hill_coefficient > 0.0) || !(x_max > 0.0) || !(theta > 0.0) || !(mu > 0.0))
        throw ConfigError("saturation", "K, H, x_max, theta and mu must be positive");
    const double log_f = std::log(alpha / (1.0 - alpha)) + hill_coefficient * std::log(hill_constant / x_max);
    if (log_f >= 0.0) return {0.0, true};
    // (1/F - 1)^(1/mu) with 1/F - 1 = expm1(-log F).
    return {theta * std::exp(std::log(std::expm1(-log_f)) / mu), false};
}

/// Actuation schedule. Only genes carrying an inducer are switched; the
/// matrix has one column per such gene.
struct SwitchingPlan {
    std::size_t window_steps = 1;        // w
    std::size_t windows = 0;             // M
    std::size_t genes = 0;
    std::vector<std::size_t> controlled; // gene index of each column
    std::vector<double> saturation;      // kappa per column
    std::vector<Bits> matrix;            // S

    static SwitchingPlan make(const GrnParams& params, const DomainSpec& domain, std::size_t w, std::size_t m,
                              double alpha, const std::vector<double>& kappa_override = {}) {
        params.validate();
        if (w < 1) throw ConfigError("plan.w", "must be at least 1");
        SwitchingPlan plan;
        plan.window_steps = w;
        plan.windows = m;
        plan.genes = params.size();
        for (std::size_t i = 0; i < params.size(); ++i)
            if (params.genes[i].inducer) plan.controlled.push_back(i);
        if (plan.controlled.empty()) throw ConfigError("genes", "no gene carries an inducer");
        if (!kappa_override.empty()) {
            if (kappa_override.size() != plan.controlled.size())
                throw ConfigError("plan.kappa", "need one saturation level per inducer");
            plan.saturation = kappa_override;
        } else {
            for (std::size_t i : plan.controlled) {
                const auto& g = params.genes[i];
                if (!g.regulator) throw ConfigError("genes[" + std::to_string(i) + "].regulator", "induced gene needs a regulator");
                const auto s = compute_saturation(alpha, g.hill_constant, g.hill_coefficient, domain.upper(*g.regulator),
                                                  g.inducer->theta, g.inducer->mu);
                plan.saturation.push_back(s.kappa);
            }
        }
        for (std::size_t j = 0; j < plan.saturation.size(); ++j)
            if (!(plan.saturation[j] > 0.0))
                throw ConfigError("plan.kappa[" + std::to_string(j) + "]", "saturation level must be positive");
        plan.matrix = build_config_matrix(plan.controlled.size());
        return plan;
    }

    std::size_t configurations() const noexcept { return matrix.size(); }
    std::size_t inputs() const noexcept { return controlled.size(); }

    /// u = kappa (.) S_r, expanded to one slot per gene.
    InducerVector input(std::size_t row) const {
        std::vector<double> u(genes, 0.0);
        const auto& bits = matrix.at(row);
        for (std::size_t j = 0; j < controlled.size(); ++j) u[controlled[j]] = bits[j] ? saturation[j] : 0.0;
        return InducerVector(std::move(u));
    }
};

// ---------------------------------------------------------------------------
// Cost functionals (all maximised).

struct Box {
    std::vector<double> lo, hi;

    bool operator==(const Box&) const = default;

    bool contains(std::span<const double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    /// Cells whose centres lie in the box.
    std::vector<char> cell_mask(const DomainSpec& d) const {
        std::array<std::vector<char>, kMaxDims> axis;
        for (std::size_t i = 0; i < d.dims(); ++i) {
            axis[i].resize(d.cells(i));
            for (std::size_t k = 0; k < d.cells(i); ++k) axis[i][k] = d.center(i, k) >= lo[i] && d.center(i, k) <= hi[i];
        }
        std::vector<char> m(d.size());
        for (std::size_t c = 0; c < d.size(); ++c) {
            const Index3 idx = d.unflat(c);
            char in = 1;
            for (std::size_t i = 0; i < d.dims(); ++i) in = in && axis[i][idx[i]];
            m[c] = in;
        }
        return m;
    }
};

/// J = int_{O1 u O2} p~ - penalty * int_{Oc} p~, p~ = p / max p.
struct BimodalRegions {
    Box first, second, center;
    double penalty = 2.0;
};

/// J = sum_i M~_i(x_i*), M~_i the max-normalised marginal.
struct MarginalTargets {
    std::vector<double> targets;
};

/// J = p(x*) / max p.
struct PointTarget {
    std::vector<double> target;
};

using CostFunctional = std::variant<BimodalRegions, MarginalTargets, PointTarget>;

inline const char* cost_name(const CostFunctional& j) {
    static constexpr const char* names[] = {"bimodal_regions", "marginal_targets", "point_target"};
    return names[j.index()];
}

inline void validate_cost(const CostFunctional& j, const DomainSpec& d) {
    auto check_box = [&](const Box& b, const char* name) {
        if (b.lo.size() != d.dims() || b.hi.size() != d.dims())
            throw ConfigError(std::string("cost.") + name, "box has wrong dimension");
        for (std::size_t i = 0; i < d.dims(); ++i)
            if (!(b.lo[i] >= 0.0 && b.hi[i] <= d.upper(i) && b.lo[i] < b.hi[i]))
                throw ConfigError(std::string("cost.") + name, "box must be non-empty and inside the domain");
    };
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, BimodalRegions>) {
                check_box(c.first, "omega1");
                check_box(c.second, "omega2");
                check_box(c.center, "omega_c");
            } else if constexpr (std::is_same_v<T, MarginalTargets>) {
                if (c.targets.size() != d.dims()) throw ConfigError("cost.targets", "need one target per axis");
                snap_to_cell(d, c.targets);
            } else {
                snap_to_cell(d, c.target);
            }
        },
        j);
}

inline double evaluate_cost(const CostFunctional& j, const DensityGrid& p) {
    return std::visit(
        [&](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, BimodalRegions>) {
                validate_cost(j, p.domain);
                const auto& d = p.domain;
                const double peak = *std::max_element(p.values.begin(), p.values.end());
                if (!(peak > 0.0)) throw NumericalError("cost of an all-zero density");
                const auto m1 = c.first.cell_mask(d), m2 = c.second.cell_mask(d), mc = c.center.cell_mask(d);
                double in = 0.0, mid = 0.0;
                for (std::size_t cell = 0; cell < p.size(); ++cell) {
                    if (m1[cell] || m2[cell]) in += p[cell];
                    if (mc[cell]) mid += p[cell];
                }
                return (in - c.penalty * mid) / peak * d.cell_volume();
            } else if constexpr (std::is_same_v<T, MarginalTargets>) {
                const auto snapped = snap_to_cell(p.domain, c.targets);
                double s = 0.0;
                for (std::size_t i = 0; i < p.domain.dims(); ++i) {
                    const auto m = normalize_by_max(p.domain.dims() == 1 ? p : marginal(p, i));
                    s += m[snapped.index[i]];
                }
                return s;
            } else {
                const auto snapped = snap_to_cell(p.domain, c.target);
                const double peak = *std::max_element(p.values.begin(), p.values.end());
                if (!(peak > 0.0)) throw NumericalError("cost of an all-zero density");
                return p[snapped.cell] / peak;
            }
        },
        j);
}

// ---------------------------------------------------------------------------
// Candidate engine: one fixed-mode propagator per configuration row.

struct EngineOptions {
    std::size_t threads = 1;
};

class PscEngine {
public:
    PscEngine(const DomainSpec& domain, const GrnParams& params, const StepConfig& cfg, const SwitchingPlan& plan,
              EngineOptions opts = {})
        : plan_(plan), opts_(opts) {
        props_.reserve(plan.configurations());
        for (std::size_t r = 0; r < plan.configurations(); ++r) props_.emplace_back(domain, params, plan.input(r), cfg);
    }

    const SwitchingPlan& plan() const noexcept { return plan_; }
    std::size_t threads() const noexcept { return opts_.threads; }
    const DomainSpec& domain() const noexcept { return props_.front().domain(); }

    const FixedModePropagator& propagator(std::size_t row) const { return props_.at(row); }

    /// Propagate one window under configuration `row`.
    DensityGrid window(std::size_t row, const DensityGrid& p, RunStats* stats = nullptr) const {
        return props_.at(row).propagate(p, plan_.window_steps, stats);
    }

private:
    SwitchingPlan plan_;
    EngineOptions opts_;
    std::vector<FixedModePropagator> props_;
};

/// Outcome of evaluating candidates over one window.
struct WindowResult {
    std::size_t row = 0;
    DensityGrid density;
    double cost = 0.0;
    std::vector<double> candidates;  // NaN for configurations not propagated
    std::size_t evaluations = 0;
    RunStats stats;
};

/// Lowest row index among the maximal finite costs.
inline std::size_t select_best(const std::vector<double>& costs) {
    std::size_t best = costs.size();
    for (std::size_t r = 0; r < costs.size(); ++r) {
        if (std::isnan(costs[r])) continue;
        if (best == costs.size() || costs[r] > costs[best]) best = r;
    }
    if (best == costs.size()) throw NumericalError("no candidate configuration was evaluated");
    return best;
}

/// Propagates the listed rows concurrently; the others are left untouched.
inline void evaluate_rows(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p,
                          const std::vector<std::size_t>& rows, std::vector<DensityGrid>& densities,
                          std::vector<double>& costs, std::vector<RunStats>& stats) {
    parallel_for(rows.size(), engine.threads(), [&](std::size_t k) {
        const std::size_t r = rows[k];
        RunStats s;
        densities[r] = engine.window(r, p, &s);
        costs[r] = evaluate_cost(j, densities[r]);
        stats[r] = s;
    });
}

/// One exhaustive window: every configuration is propagated and scored; the stored
/// density of the winner is returned without re-integration.
inline WindowResult psc_window(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p) {
    const std::size_t nr = engine.plan().configurations();
    std::vector<DensityGrid> dens(nr);
    std::vector<double> costs(nr, std::numeric_limits<double>::quiet_NaN());
    std::vector<RunStats> stats(nr);
    std::vector<std::size_t> rows(nr);
    for (std::size_t r = 0; r < nr; ++r) rows[r] = r;
    evaluate_rows(engine, j, p, rows, dens, costs, stats);
    WindowResult w;
    w.row = select_best(costs);
    w.cost = costs[w.row];
    w.density = std::move(dens[w.row]);
    w.candidates = std::move(costs);
    w.evaluations = nr;
    for (const auto& s : stats) w.stats.merge(s);
    return w;
}

// ---------------------------------------------------------------------------
// Trace.

struct WindowRecord {
    std::size_t m = 0;
    double t = 0.0;          // window start
    std::size_t row = 0;
    Bits bits;
    double cost = 0.0;       // J at window end
    std::vector<double> candidates;
    std::size_t evaluations = 0;  // cumulative PIDE evaluations
    double wall_seconds = 0.0;    // cumulative
    bool accepted = false;        // accelerated mode: proposal kept
    std::optional<std::size_t> proposal;
};

struct Snapshot {
    std::size_t window = 0;  // density at the end of window `window - 1`; 0 = initial
    DensityGrid density;
};

struct ControlTrace {
    std::string mode = "exhaustive";
    std::vector<std::size_t> controlled;
    std::vector<double> saturation;
    std::size_t window_steps = 1;
    double dt = 0.0;
    std::string cost_kind;
    double initial_cost = 0.0;
    std::vector<WindowRecord> windows;
    std::vector<Snapshot> snapshots;
    RunStats stats;

    std::size_t evaluations() const noexcept { return windows.empty() ? 0 : windows.back().evaluations; }
    std::size_t accepts() const noexcept {
        std::size_t a = 0;
        for (const auto& w : windows) a += w.accepted ? 1 : 0;
        return a;
    }
    double elapsed() const noexcept { return windows.empty() ? 0.0 : windows.back().wall_seconds; }
    double final_cost() const noexcept { return windows.empty() ? initial_cost : windows.back().cost; }
    std::vector<std::size_t> rows() const {
        std::vector<std::size_t> r;
        for (const auto& w : windows) r.push_back(w.row);
        return r;
    }

    /// One row per window. Wall time is optional so traces can be compared byte-for-byte.
    void write_csv(std::ostream& os, bool with_wall = true) const {
        const std::size_t nc = controlled.size();
        const std::size_t nr = std::size_t{1} << nc;
        os << "m,t_m,row";
        for (std::size_t j = 0; j < nc; ++j) os << ",s" << controlled[j];
        os << ",J";
        for (std::size_t r = 0; r < nr; ++r) os << ",J_r" << r;
        os << ",evaluations,accepted";
        if (with_wall) os << ",wall_s";
        os << '\n';
        os << std::setprecision(17);
        for (const auto& w : windows) {
            os << w.m << ',' << w.t << ',' << w.row;
            for (int b : w.bits) os << ',' << b;
            os << ',' << w.cost;
            for (std::size_t r = 0; r < nr; ++r) {
                os << ',';
                if (r < w.candidates.size() && !std::isnan(w.candidates[r])) os << w.candidates[r];
            }
            os << ',' << w.evaluations << ',' << (w.accepted ? 1 : 0);
            if (with_wall) os << ',' << w.wall_seconds;
            os << '\n';
        }
    }
};

struct RunOptions {
    std::size_t snapshot_every = 10;  // 0 disables intermediate snapshots; final always kept
    std::function<void(const WindowRecord&)> on_window;
};

namespace detail {

inline ControlTrace start_trace(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p0,
                                const StepConfig& cfg, std::string mode) {
    ControlTrace t;
    t.mode = std::move(mode);
    t.controlled = engine.plan().controlled;
    t.saturation = engine.plan().saturation;
    t.window_steps = engine.plan().window_steps;
    t.dt = cfg.dt;
    t.cost_kind = cost_name(j);
    t.initial_cost = evaluate_cost(j, p0);
    t.snapshots.push_back({0, p0});
    return t;
}

inline void maybe_snapshot(ControlTrace& t, const RunOptions& o, std::size_t m, std::size_t total, const DensityGrid& p) {
    const std::size_t done = m + 1;
    if (done == total || (o.snapshot_every > 0 && done % o.snapshot_every == 0)) t.snapshots.push_back({done, p});
}

}  // namespace detail

struct PscResult {
    ControlTrace trace;
    DensityGrid final_density;
};

/// M chained exhaustive windows. The density entering window m+1 is the stored winner of window m.
inline PscResult run_psc(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p0, const StepConfig& cfg,
                         const RunOptions& opts = {}) {
    const auto& plan = engine.plan();
    PscResult res;
    res.trace = detail::start_trace(engine, j, p0, cfg, "exhaustive");
    DensityGrid p = p0;
    const auto start = std::chrono::steady_clock::now();
    std::size_t evals = 0;
    for (std::size_t m = 0; m < plan.windows; ++m) {
        WindowRecord rec;
        rec.m = m;
        rec.t = p.time;
        auto w = psc_window(engine, j, p);
        evals += w.evaluations;
        rec.row = w.row;
        rec.bits = plan.matrix[w.row];
        rec.cost = w.cost;
        rec.candidates = std::move(w.candidates);
        rec.evaluations = evals;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.trace.stats.merge(w.stats);
        p = std::move(w.density);
        detail::maybe_snapshot(res.trace, opts, m, plan.windows, p);
        if (opts.on_window) opts.on_window(rec);
        res.trace.windows.push_back(std::move(rec));
    }
    res.final_density = std::move(p);
    return res;
}

/// Applies a recorded row sequence without any search (uncontrolled runs use all-zero rows).
inline PscResult run_profile(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p0,
                             const StepConfig& cfg, const std::vector<std::size_t>& rows, const RunOptions& opts = {},
                             std::string mode = "profile") {
    const auto& plan = engine.plan();
    PscResult res;
    res.trace = detail::start_trace(engine, j, p0, cfg, std::move(mode));
    DensityGrid p = p0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t m = 0; m < rows.size(); ++m) {
        if (rows[m] >= plan.configurations()) throw ConfigError("profile", "row index out of range");
        WindowRecord rec;
        rec.m = m;
        rec.t = p.time;
        RunStats s;
        p = engine.window(rows[m], p, &s);
        res.trace.stats.merge(s);
        rec.row = rows[m];
        rec.bits = plan.matrix[rows[m]];
        rec.cost = evaluate_cost(j, p);
        rec.evaluations = m + 1;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        detail::maybe_snapshot(res.trace, opts, m, rows.size(), p);
        if (opts.on_window) opts.on_window(rec);
        res.trace.windows.push_back(std::move(rec));
    }
    res.final_density = std::move(p);
    return res;
}

}  // namespace psc
