#pragma once

// Empirical contraction checks under a shared switching profile, log-linear
// decay fits, and a thinning-based stochastic simulator used as an
// independent oracle for the density solver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psc/controller.hpp"
#include "psc/errors.hpp"
#include "psc/grid.hpp"
#include "psc/grn.hpp"
#include "psc/parallel.hpp"

namespace psc {

inline constexpr double kDistanceFloor = 1e-14;

struct DecayFit {
    double prefactor = 1.0;  // K
    double rate = 0.0;       // phi
    double r2 = 1.0;
    std::size_t points = 0;
    bool lower_bound = false;  // the series reached the floor before its end
};

/// Least squares of ln d against t. Points at or below the floor end the series.
inline DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& d, double floor = kDistanceFloor) {
    if (t.size() != d.size()) throw ConfigError("series", "time and distance lengths differ");
    DecayFit f;
    std::size_t n = 0;
    while (n < d.size() && d[n] > floor) ++n;
    f.lower_bound = n < d.size();
    if (n < 2) throw NumericalError("decay series reached the distance floor before two points");
    f.points = n;
    double mt = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mt += t[k];
        my += std::log(d[k]);
    }
    mt /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double a = t[k] - mt, b = std::log(d[k]) - my;
        stt += a * a;
        sty += a * b;
        syy += b * b;
    }
    if (!(stt > 0.0)) throw ConfigError("series", "times must not all coincide");
    const double slope = sty / stt;
    f.rate = -slope;
    f.prefactor = std::exp(my - slope * mt);
    if (syy <= 1e-300) {
        f.rate = 0.0;
        f.r2 = 1.0;
    } else {
        f.r2 = (sty * sty) / (stt * syy);
    }
    return f;
}

struct PairSeries {
    std::size_t a = 0, b = 0;
    std::vector<double> distance;  // at every recorded time
    DecayFit fit;                  // on d / d(0), tail half
    std::size_t violations = 0;    // recorded increases beyond the tolerance
    double max_increase = 0.0;
    double fine_max_increase = 0.0;  // per fine step, when recorded
    std::size_t fine_violations = 0;
};

struct ContractionReport {
    std::vector<std::string> labels;
    std::vector<double> times;      // window boundaries
    std::vector<std::size_t> rows;  // applied configuration per window
    std::vector<PairSeries> pairs;
    double tolerance = 1e-8;

    std::size_t violations() const noexcept {
        std::size_t v = 0;
        for (const auto& p : pairs) v += p.violations + p.fine_violations;
        return v;
    }

    void write_csv(std::ostream& os) const {
        os << "t,pair,a,b,distance\n" << std::setprecision(17);
        for (std::size_t k = 0; k < pairs.size(); ++k)
            for (std::size_t i = 0; i < times.size(); ++i)
                os << times[i] << ',' << k << ',' << labels[pairs[k].a] << ',' << labels[pairs[k].b] << ','
                   << pairs[k].distance[i] << '\n';
    }

    nlohmann::json summary() const {
        nlohmann::json j;
        j["labels"] = labels;
        j["tolerance"] = tolerance;
        j["windows"] = rows.size();
        j["violations"] = violations();
        for (const auto& p : pairs) {
            nlohmann::json q;
            q["a"] = labels[p.a];
            q["b"] = labels[p.b];
            q["phi"] = p.fit.rate;
            q["K"] = p.fit.prefactor;
            q["r2"] = p.fit.r2;
            q["fit_points"] = p.fit.points;
            q["rate_is_lower_bound"] = p.fit.lower_bound;
            q["initial_distance"] = p.distance.front();
            q["final_distance"] = p.distance.back();
            q["violations"] = p.violations;
            q["max_increase"] = p.max_increase;
            q["fine_violations"] = p.fine_violations;
            q["fine_max_increase"] = p.fine_max_increase;
            j["pairs"].push_back(q);
        }
        return j;
    }
};

struct ReplayOptions {
    bool fine_steps = false;  // also check every fine step
    double tolerance = 1e-8;
    double tail_fraction = 0.5;
};

/// Propagates every initial density under the same recorded row sequence and tracks
/// all pairwise L1 distances.
inline ContractionReport replay_profile(const PscEngine& engine, const std::vector<DensityGrid>& initial,
                                        const std::vector<std::string>& labels, const std::vector<std::size_t>& rows,
                                        const ReplayOptions& opt = {}) {
    if (initial.size() < 2) throw ConfigError("replay.initial", "need at least two initial densities");
    if (labels.size() != initial.size()) throw ConfigError("replay.labels", "one label per initial density");
    for (const auto& p : initial)
        if (!(p.domain == engine.domain())) throw DomainMismatch("initial density does not match the trace domain");
    for (auto r : rows)
        if (r >= engine.plan().configurations()) throw ConfigError("replay.profile", "row index out of range");

    ContractionReport rep;
    rep.labels = labels;
    rep.rows = rows;
    rep.tolerance = opt.tolerance;
    std::vector<DensityGrid> cur = initial;
    for (std::size_t a = 0; a < cur.size(); ++a)
        for (std::size_t b = a + 1; b < cur.size(); ++b) {
            PairSeries s;
            s.a = a;
            s.b = b;
            s.distance.push_back(l1_distance(cur[a], cur[b]));
            rep.pairs.push_back(s);
        }
    rep.times.push_back(cur.front().time);
    const std::size_t w = engine.plan().window_steps;
    std::vector<double> last(rep.pairs.size());
    for (std::size_t k = 0; k < rep.pairs.size(); ++k) last[k] = rep.pairs[k].distance.front();

    for (std::size_t m = 0; m < rows.size(); ++m) {
        const auto& prop = engine.propagator(rows[m]);
        if (opt.fine_steps) {
            for (std::size_t s = 0; s < w; ++s) {
                parallel_for(cur.size(), engine.threads(), [&](std::size_t i) { cur[i] = prop.step(cur[i]); });
                for (std::size_t k = 0; k < rep.pairs.size(); ++k) {
                    auto& ps = rep.pairs[k];
                    const double now = l1_distance(cur[ps.a], cur[ps.b]);
                    const double inc = now - last[k];
                    ps.fine_max_increase = std::max(ps.fine_max_increase, inc);
                    if (inc > opt.tolerance) ++ps.fine_violations;
                    last[k] = now;
                }
            }
        } else {
            parallel_for(cur.size(), engine.threads(), [&](std::size_t i) { cur[i] = prop.propagate(cur[i], w); });
        }
        rep.times.push_back(cur.front().time);
        for (std::size_t k = 0; k < rep.pairs.size(); ++k) {
            auto& ps = rep.pairs[k];
            const double now = l1_distance(cur[ps.a], cur[ps.b]);
            const double inc = now - ps.distance.back();
            ps.max_increase = std::max(ps.max_increase, inc);
            if (inc > opt.tolerance) ++ps.violations;
            ps.distance.push_back(now);
            last[k] = now;
        }
    }

    for (auto& ps : rep.pairs) {
        const double d0 = ps.distance.front();
        if (!(d0 > kDistanceFloor)) {
            ps.fit = DecayFit{};
            continue;
        }
        const auto first = static_cast<std::size_t>(std::floor((1.0 - opt.tail_fraction) * static_cast<double>(rep.times.size())));
        std::vector<double> t, d;
        for (std::size_t i = first; i < rep.times.size(); ++i) {
            t.push_back(rep.times[i]);
            d.push_back(ps.distance[i] / d0);
        }
        if (t.size() >= 2 && d.front() > kDistanceFloor) ps.fit = fit_decay_rate(t, d);
        else ps.fit.lower_bound = true;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Stochastic simulation of the jump-drift process.

struct SsaSegment {
    double duration = 0.0;
    InducerVector input;
};

struct SsaConfig {
    std::size_t trajectories = 100000;
    std::vector<double> initial;  // starting state, one value per gene
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

struct SsaResult {
    DensityGrid histogram;
    std::size_t clamped = 0;  // samples beyond x_max counted in the last cell
    std::size_t events = 0;   // accepted bursts
    std::size_t proposals = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// xoshiro256** seeded through splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        for (auto& s : s_) s = seed = splitmix64(seed);
    }
    std::uint64_t next() {
        const std::uint64_t r = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return r;
    }
    /// Uniform on (0, 1].
    double uniform() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }
    double exponential(double mean) { return -mean * std::log(uniform()); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace detail

/// Thinning with bound Lambda = sum k_m: candidate events at rate Lambda, gene i picked with
/// probability k_m^i / Lambda and accepted with c_i(x); exact decay between events.
inline SsaResult ssa_simulate(const GrnParams& params, const std::vector<SsaSegment>& profile, const DomainSpec& domain,
                              const SsaConfig& cfg) {
    params.validate();
    const std::size_t n = params.size();
    if (domain.dims() != n) throw ConfigError("genes", "gene count must equal the domain dimension");
    if (cfg.initial.size() != n) throw ConfigError("ssa.initial", "one initial value per gene");
    if (cfg.trajectories == 0) throw ConfigError("ssa.trajectories", "must be positive");
    for (const auto& s : profile) {
        if (!(s.duration >= 0.0)) throw ConfigError("ssa.profile", "segment durations must be non-negative");
        if (s.input.size() != n) throw ConfigError("ssa.profile", "inducer vector needs one entry per gene");
    }
    double lambda = 0.0;
    std::vector<double> km(n), b(n), gamma(n);
    for (std::size_t i = 0; i < n; ++i) {
        km[i] = params.genes[i].burst_frequency;
        b[i] = params.genes[i].burst_size();
        gamma[i] = params.genes[i].protein_decay;
        lambda += km[i];
    }

    // Fixed blocks keep the merge order independent of the worker count.
    constexpr std::size_t kBlocks = 64;
    const std::size_t blocks = std::min(kBlocks, cfg.trajectories);
    std::vector<std::vector<std::uint32_t>> counts(blocks, std::vector<std::uint32_t>(domain.size(), 0));
    std::vector<std::size_t> clamped(blocks, 0), events(blocks, 0), proposals(blocks, 0);

    parallel_for(blocks, cfg.threads, [&](std::size_t blk) {
        const std::size_t lo = blk * cfg.trajectories / blocks, hi = (blk + 1) * cfg.trajectories / blocks;
        std::vector<double> x(n);
        for (std::size_t traj = lo; traj < hi; ++traj) {
            detail::Rng rng(detail::splitmix64(cfg.seed) ^ detail::splitmix64(traj + 0x632be59bd9b4e019ULL));
            x = cfg.initial;
            for (const auto& seg : profile) {
                double left = seg.duration;
                while (true) {
                    const double tau = lambda > 0.0 ? rng.exponential(1.0 / lambda) : std::numeric_limits<double>::infinity();
                    if (tau >= left) {
                        for (std::size_t i = 0; i < n; ++i) x[i] *= std::exp(-gamma[i] * left);
                        break;
                    }
                    left -= tau;
                    for (std::size_t i = 0; i < n; ++i) x[i] *= std::exp(-gamma[i] * tau);
                    ++proposals[blk];
                    double pick = rng.uniform() * lambda;
                    std::size_t gene = 0;
                    while (gene + 1 < n && pick > km[gene]) pick -= km[gene++];
                    if (rng.uniform() <= regulatory_probability(x, seg.input, gene, params)) {
                        x[gene] += rng.exponential(b[gene]);
                        ++events[blk];
                    }
                }
            }
            Index3 idx{};
            bool outside = false;
            for (std::size_t i = 0; i < n; ++i) {
                auto k = static_cast<std::size_t>(x[i] / domain.spacing(i));
                if (k >= domain.cells(i)) {
                    k = domain.cells(i) - 1;
                    outside = true;
                }
                idx[i] = k;
            }
            clamped[blk] += outside ? 1 : 0;
            ++counts[blk][domain.flat(idx)];
        }
    });

    SsaResult r;
    r.histogram = DensityGrid(domain);
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        for (std::size_t c = 0; c < domain.size(); ++c) r.histogram[c] += counts[blk][c];
        r.clamped += clamped[blk];
        r.events += events[blk];
        r.proposals += proposals[blk];
    }
    const double norm = 1.0 / (static_cast<double>(cfg.trajectories) * domain.cell_volume());
    for (double& v : r.histogram.values) v *= norm;
    double horizon = 0.0;
    for (const auto& s : profile) horizon += s.duration;
    r.histogram.time = horizon;
    return r;
}

/// Profile segments for a recorded row sequence.
inline std::vector<SsaSegment> profile_segments(const SwitchingPlan& plan, const std::vector<std::size_t>& rows, double dt) {
    std::vector<SsaSegment> out;
    for (auto r : rows) {
        const double dur = dt * static_cast<double>(plan.window_steps);
        if (!out.empty() && out.back().input == plan.input(r)) out.back().duration += dur;
        else out.push_back({dur, plan.input(r)});
    }
    return out;
}

}  // namespace psc
