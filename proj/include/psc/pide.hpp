#pragma once

// Semi-Lagrangian solver for the bursting PIDE under a fixed inducer input.
//
// One fine step is Lie-split:
//   1. transport along the exact characteristics x -> exp(-gamma dt) x. Each
//      target cell receives the cell-averaged density over its foot cell
//      [exp(gamma dt) x_lo, exp(gamma dt) x_hi], which carries the Jacobian
//      exp(sum gamma dt) implicitly and moves mass exactly between cells;
//   2. explicit Euler for the burst gain omega *_i (c_i p) and loss c_i p,
//      sub-stepped so the loss never exceeds the cell content.
// The discrete burst kernel is geometric in the cell offset with ratio
// exp(-dx/b) and weights chosen so that it sums to one and keeps the mean
// burst size b exactly; the convolution is a one-pass recursion per line.
// Bursts that would overshoot x_max are kept in the last cell (the folded
// mass is reported). Both stages are linear, positive and mass-preserving,
// so the step is an L1 contraction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "psc/errors.hpp"
#include "psc/grid.hpp"
#include "psc/grn.hpp"

namespace psc {

struct StepConfig {
    double dt = 0.005;            // fine step, dimensionless time
    bool renormalize = true;      // rescale to the input mass after every step
    double mass_tolerance = 1e-6; // allowed relative pre-renormalisation drift per step; <= 0 disables
    double clamp_tolerance = 1e-8;

    void validate(const GrnParams& params) const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("step.dt", "must be positive");
        double gmax = 0.0;
        for (const auto& g : params.genes) gmax = std::max(gmax, g.protein_decay);
        if (!(dt * gmax < 1.0))
            throw ConfigError("step.dt", "stability guard violated: dt * max gamma_x = " + std::to_string(dt * gmax) +
                                             " must be < 1");
    }

    bool operator==(const StepConfig&) const = default;
};

struct StepStats {
    double mass_in = 0.0;
    double mass_raw = 0.0;   // before clamping and renormalisation
    double mass_out = 0.0;
    double clamped = 0.0;    // mass removed by clamping negative cells
    double gain = 0.0;       // integrated burst gain over the step
    double loss = 0.0;       // integrated burst loss over the step
    double boundary = 0.0;   // burst mass that reached x_max and was kept in the last cell
    std::size_t substeps = 0;

    double drift() const noexcept { return mass_raw - mass_in; }
};

struct RunStats {
    std::size_t steps = 0;
    double max_relative_drift = 0.0;
    double total_drift = 0.0;
    double max_clamped = 0.0;
    double max_gain_loss_mismatch = 0.0;  // relative
    double boundary_mass = 0.0;           // cumulative mass folded back at x_max

    void absorb(const StepStats& s) {
        ++steps;
        const double rel = s.mass_in > 0.0 ? std::abs(s.drift()) / s.mass_in : 0.0;
        max_relative_drift = std::max(max_relative_drift, rel);
        total_drift += s.drift();
        max_clamped = std::max(max_clamped, s.clamped);
        boundary_mass += s.boundary;
        if (s.loss > 0.0) max_gain_loss_mismatch = std::max(max_gain_loss_mismatch, std::abs(s.gain - s.loss) / s.loss);
    }
    void merge(const RunStats& o) {
        steps += o.steps;
        max_relative_drift = std::max(max_relative_drift, o.max_relative_drift);
        total_drift += o.total_drift;
        max_clamped = std::max(max_clamped, o.max_clamped);
        max_gain_loss_mismatch = std::max(max_gain_loss_mismatch, o.max_gain_loss_mismatch);
        boundary_mass += o.boundary_mass;
    }
};

/// Discrete burst kernel along one axis: W_0 = retained, W_d = first * ratio^(d-1) for d >= 1.
struct BurstKernel {
    double ratio = 0.0;
    double first = 0.0;
    double retained = 1.0;

    static BurstKernel make(double spacing, double mean_burst) {
        const double h = spacing / mean_burst;
        const double one_minus_r = -std::expm1(-h);
        BurstKernel k;
        k.ratio = std::exp(-h);
        k.first = one_minus_r * one_minus_r / h;
        k.retained = 1.0 - one_minus_r / h;
        return k;
    }

    double weight(std::size_t d) const {
        return d == 0 ? retained : first * std::pow(ratio, static_cast<double>(d - 1));
    }
};

/// The fixed-mode propagator: all tables depend only on (domain, params, u, dt),
/// so one instance serves every fine step of an actuation window.
class FixedModePropagator {
public:
    FixedModePropagator(const DomainSpec& domain, const GrnParams& params, const InducerVector& u,
                        const StepConfig& cfg)
        : domain_(domain), params_(params), cfg_(cfg) {
        params.validate();
        cfg.validate(params);
        if (params.size() != domain.dims()) throw ConfigError("genes", "gene count must equal the domain dimension");
        if (u.size() != params.size()) throw ConfigError("u", "inducer vector must have one entry per gene");
        field_ = RegulationField::build(domain, params, u);
        const std::size_t n = params.size();

        remap_.resize(n);
        for (std::size_t ax = 0; ax < n; ++ax)
            remap_[ax] = AxisRemap::make(domain.cells(ax), std::exp(params.genes[ax].protein_decay * cfg.dt));

        kernels_.resize(n);
        double worst_loss_rate = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            kernels_[i] = BurstKernel::make(domain.spacing(i), params.genes[i].burst_size());
            worst_loss_rate += params.genes[i].burst_frequency * (1.0 - kernels_[i].retained);
        }
        substeps_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.dt * worst_loss_rate)));
        sub_dt_ = cfg.dt / static_cast<double>(substeps_);

        loss_factor_.assign(domain.size(), 1.0);
        for (std::size_t c = 0; c < domain.size(); ++c) {
            const Index3 idx = domain.unflat(c);
            double rate = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                rate += params.genes[i].burst_frequency * (1.0 - kernels_[i].retained) * field_.at(i, params, idx);
            loss_factor_[c] = std::max(0.0, 1.0 - sub_dt_ * rate);
        }
    }

    const DomainSpec& domain() const noexcept { return domain_; }
    std::size_t substeps() const noexcept { return substeps_; }
    const RegulationField& field() const noexcept { return field_; }

    DensityGrid step(const DensityGrid& p, StepStats* stats = nullptr) const {
        require_domain(p);
        StepStats s;
        s.mass_in = total_mass(p);
        s.substeps = substeps_;

        std::vector<double> a = p.values;
        std::vector<double> b(a.size());
        for (std::size_t ax = 0; ax < domain_.dims(); ++ax) {
            apply_remap(ax, a, b);
            a.swap(b);
        }

        std::vector<double> g(a.size());
        std::vector<double> line_state;
        const double dv = domain_.cell_volume();
        for (std::size_t sub = 0; sub < substeps_; ++sub) {
            for (std::size_t c = 0; c < a.size(); ++c) b[c] = a[c] * loss_factor_[c];
            for (std::size_t i = 0; i < domain_.dims(); ++i) {
                const double km = params_.genes[i].burst_frequency;
                if (km == 0.0) continue;
                fill_source(i, a, g);
                double gsum = 0.0;
                for (double v : g) gsum += v;
                const double coef = sub_dt_ * km;
                double folded = 0.0;
                const double recursive = accumulate_gain(i, g, b, coef, line_state, folded);
                s.boundary += coef * folded * dv;
                s.loss += coef * gsum * dv;
                s.gain += coef * (kernels_[i].retained * gsum + recursive) * dv;
            }
            a.swap(b);
        }

        DensityGrid out;
        out.domain = domain_;
        out.time = p.time + cfg_.dt;
        out.values = std::move(a);
        s.mass_raw = total_mass(out);
        if (!std::isfinite(s.mass_raw))
            throw NumericalError("non-finite density after step at t=" + std::to_string(p.time));
        double negative = 0.0;
        for (double& v : out.values)
            if (v < 0.0) {
                negative -= v;
                v = 0.0;
            }
        s.clamped = negative * dv;
        if (s.clamped > cfg_.clamp_tolerance * std::max(s.mass_in, 1e-300))
            throw NumericalError("positivity deficit " + std::to_string(s.clamped) + " exceeds tolerance at t=" +
                                 std::to_string(p.time));
        if (cfg_.mass_tolerance > 0.0 && std::abs(s.drift()) > cfg_.mass_tolerance * s.mass_in)
            throw NumericalError("mass drift " + std::to_string(s.drift()) + " exceeds tolerance at t=" +
                                 std::to_string(p.time) + " (domain too small for the burst tail?)");
        if (cfg_.renormalize && s.mass_in > 0.0) {
            const double m = total_mass(out);
            if (m > 0.0) {
                const double f = s.mass_in / m;
                for (double& v : out.values) v *= f;
            }
        }
        s.mass_out = total_mass(out);
        if (stats) *stats = s;
        return out;
    }

    DensityGrid propagate(DensityGrid p, std::size_t steps, RunStats* run = nullptr) const {
        for (std::size_t k = 0; k < steps; ++k) {
            StepStats s;
            p = step(p, &s);
            if (run) run->absorb(s);
        }
        return p;
    }

private:
    // Sparse row operator for the transport remap along one axis, in cell units.
    struct AxisRemap {
        std::vector<std::uint32_t> row_begin;
        std::vector<std::uint32_t> source;
        std::vector<double> weight;

        static AxisRemap make(std::size_t cells, double stretch) {
            AxisRemap r;
            const double n = static_cast<double>(cells);
            r.row_begin.push_back(0);
            for (std::size_t k = 0; k < cells; ++k) {
                const double lo = stretch * static_cast<double>(k);
                const double hi = stretch * static_cast<double>(k + 1);
                if (lo < n) {
                    for (auto j = static_cast<std::size_t>(lo); j < cells && static_cast<double>(j) < hi; ++j) {
                        const double overlap = std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
                        if (overlap > 0.0) {
                            r.source.push_back(static_cast<std::uint32_t>(j));
                            r.weight.push_back(overlap);
                        }
                    }
                }
                r.row_begin.push_back(static_cast<std::uint32_t>(r.source.size()));
            }
            // Every source cell is covered by the preimages; make each column sum exactly one.
            std::vector<double> column(cells, 0.0);
            for (std::size_t e = 0; e < r.source.size(); ++e) column[r.source[e]] += r.weight[e];
            for (std::size_t e = 0; e < r.source.size(); ++e) r.weight[e] /= column[r.source[e]];
            return r;
        }
    };

    void require_domain(const DensityGrid& p) const {
        if (!(p.domain == domain_) || p.values.size() != domain_.size())
            throw DomainMismatch("density does not match the propagator domain");
    }

    void apply_remap(std::size_t axis, const std::vector<double>& in, std::vector<double>& out) const {
        const std::size_t n = domain_.cells(axis);
        const std::size_t inner = domain_.stride(axis);
        const std::size_t outer = domain_.size() / (n * inner);
        const auto& r = remap_[axis];
        if (inner == 1) {
            for (std::size_t o = 0; o < outer; ++o) {
                const double* src = in.data() + o * n;
                double* dst = out.data() + o * n;
                for (std::size_t k = 0; k < n; ++k) {
                    double acc = 0.0;
                    for (std::uint32_t e = r.row_begin[k]; e < r.row_begin[k + 1]; ++e) acc += r.weight[e] * src[r.source[e]];
                    dst[k] = acc;
                }
            }
            return;
        }
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t base = o * n * inner;
            for (std::size_t k = 0; k < n; ++k) {
                double* dst = out.data() + base + k * inner;
                for (std::uint32_t e = r.row_begin[k]; e < r.row_begin[k + 1]; ++e) {
                    const double w = r.weight[e];
                    const double* src = in.data() + base + static_cast<std::size_t>(r.source[e]) * inner;
                    for (std::size_t t = 0; t < inner; ++t) dst[t] += w * src[t];
                }
            }
        }
    }

    // g = c_i * q over the full grid.
    void fill_source(std::size_t gene, const std::vector<double>& q, std::vector<double>& g) const {
        const auto& row = field_.activity[gene];
        if (row.empty()) {
            std::copy(q.begin(), q.end(), g.begin());
            return;
        }
        const std::size_t axis = *params_.genes[gene].regulator;
        const std::size_t n = domain_.cells(axis);
        const std::size_t inner = domain_.stride(axis);
        const std::size_t outer = domain_.size() / (n * inner);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t base = (o * n + k) * inner;
                const double c = row[k];
                for (std::size_t t = 0; t < inner; ++t) g[base + t] = c * q[base + t];
            }
    }

    // out += coef * sum_{d>=1} W_d g[k-d] along `axis`; returns the un-scaled sum of that term
    // and adds the part folded back at x_max to `boundary`.
    double accumulate_gain(std::size_t axis, const std::vector<double>& g, std::vector<double>& out, double coef,
                           std::vector<double>& state, double& boundary) const {
        const auto& kern = kernels_[axis];
        const std::size_t n = domain_.cells(axis);
        const std::size_t inner = domain_.stride(axis);
        const std::size_t outer = domain_.size() / (n * inner);
        state.assign(inner, 0.0);
        double total = 0.0;
        for (std::size_t o = 0; o < outer; ++o) {
            std::fill(state.begin(), state.end(), 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t base = (o * n + k) * inner;
                for (std::size_t t = 0; t < inner; ++t) {
                    const double sv = state[t];
                    out[base + t] += coef * sv;
                    total += sv;
                    state[t] = kern.ratio * sv + kern.first * g[base + t];
                }
            }
            // Bursts that would overshoot x_max are deposited in the last cell.
            const std::size_t last = (o * n + n - 1) * inner;
            const double fold = 1.0 / (1.0 - kern.ratio);
            for (std::size_t t = 0; t < inner; ++t) {
                const double tail = state[t] * fold;
                out[last + t] += coef * tail;
                total += tail;
                boundary += tail;
            }
        }
        return total;
    }

    DomainSpec domain_;
    GrnParams params_;
    StepConfig cfg_;
    RegulationField field_;
    std::vector<AxisRemap> remap_;
    std::vector<BurstKernel> kernels_;
    std::vector<double> loss_factor_;
    std::size_t substeps_ = 1;
    double sub_dt_ = 0.0;
};

inline DensityGrid step(const DensityGrid& p, const InducerVector& u, const StepConfig& cfg, const GrnParams& params,
                        StepStats* stats = nullptr) {
    return FixedModePropagator(p.domain, params, u, cfg).step(p, stats);
}

inline DensityGrid propagate(const DensityGrid& p, const InducerVector& u, std::size_t steps, const StepConfig& cfg,
                             const GrnParams& params, RunStats* run = nullptr) {
    return FixedModePropagator(p.domain, params, u, cfg).propagate(p, steps, run);
}

}  // namespace psc
