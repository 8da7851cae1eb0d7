#pragma once

// Kinetic and regulatory model of an n-gene bursting network: inducer
// scaling, modulated Hill repression, leaky promoter activity and the
// exponential burst-size law.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psc/errors.hpp"
#include "psc/grid.hpp"

namespace psc {

struct InducerParams {
    double theta = 0.1;  // half-saturation concentration
    double mu = 2.0;     // Hill coefficient

    bool operator==(const InducerParams&) const = default;
};

struct GeneParams {
    double burst_frequency = 0.0;    // k_m
    double translation_rate = 0.0;   // k_x
    double mrna_decay = 1.0;         // gamma_m
    double protein_decay = 1.0;      // gamma_x
    double leakage = 0.0;            // epsilon = k_eps / k_m
    std::optional<std::size_t> regulator;  // repressing protein index; none = constitutive
    double hill_constant = 1.0;      // K
    double hill_coefficient = 1.0;   // H
    std::optional<InducerParams> inducer;  // none: F == 1

    double burst_size() const noexcept { return translation_rate / mrna_decay; }

    bool operator==(const GeneParams&) const = default;
};

struct GrnParams {
    std::vector<GeneParams> genes;

    std::size_t size() const noexcept { return genes.size(); }

    /// True when every gene has strictly positive leakage (needed for geometric contraction).
    bool strict_leakage() const noexcept {
        for (const auto& g : genes)
            if (!(g.leakage > 0.0)) return false;
        return true;
    }

    void validate() const {
        if (genes.empty()) throw ConfigError("genes", "network has no genes");
        for (std::size_t i = 0; i < genes.size(); ++i) {
            const auto& g = genes[i];
            const std::string at = "genes[" + std::to_string(i) + "].";
            auto positive = [&](double v, const char* name) {
                if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(at + name, "must be positive and finite");
            };
            if (!(g.burst_frequency >= 0.0) || !std::isfinite(g.burst_frequency))
                throw ConfigError(at + "k_m", "must be non-negative and finite");
            positive(g.protein_decay, "gamma_x");
            positive(g.mrna_decay, "gamma_m");
            positive(g.translation_rate, "k_x");
            if (!(g.leakage >= 0.0 && g.leakage <= 1.0)) throw ConfigError(at + "leakage", "must lie in [0, 1]");
            if (g.regulator) {
                if (*g.regulator >= genes.size()) throw ConfigError(at + "regulator", "index out of range");
                positive(g.hill_constant, "K");
                positive(g.hill_coefficient, "H");
            }
            if (g.inducer) {
                positive(g.inducer->theta, "inducer.theta");
                positive(g.inducer->mu, "inducer.mu");
            }
        }
    }

    bool operator==(const GrnParams&) const = default;
};

/// External inducer concentrations, one slot per gene (zero where a gene has no inducer).
struct InducerVector {
    std::vector<double> levels;

    InducerVector() = default;
    explicit InducerVector(std::vector<double> l) : levels(std::move(l)) {
        for (double v : levels)
            if (!(v >= 0.0)) throw ConfigError("u", "inducer concentrations must be non-negative");
    }
    static InducerVector zeros(std::size_t n) { return InducerVector(std::vector<double>(n, 0.0)); }

    double operator[](std::size_t i) const { return levels[i]; }
    std::size_t size() const noexcept { return levels.size(); }

    bool operator==(const InducerVector&) const = default;
};

/// F(I) = [1 + (I/theta)^mu]^-1.
inline double inducer_scaling(double concentration, double theta, double mu) {
    if (!(concentration >= 0.0)) throw ConfigError("u", "inducer concentration must be non-negative");
    if (!(theta > 0.0) || !(mu > 0.0)) throw ConfigError("inducer", "theta and mu must be positive");
    if (concentration == 0.0) return 1.0;
    // 1 / (1 + e^t) evaluated without overflow.
    const double t = mu * std::log(concentration / theta);
    return t > 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
}

/// K^H / (K^H + x^H F), evaluated in the log domain so large H and x stay accurate.
inline double modulated_repression(double x, double hill_constant, double hill_coefficient, double scaling) {
    if (x <= 0.0 || scaling <= 0.0) return 1.0;
    const double t = hill_coefficient * std::log(x / hill_constant) + std::log(scaling);
    return t > 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
}

inline double leaky_activity(double repression, double leakage) noexcept {
    return repression + leakage * (1.0 - repression);
}

inline double gene_scaling(const GeneParams& g, const InducerVector& u, std::size_t gene) {
    if (!g.inducer || u.size() <= gene) return 1.0;
    return inducer_scaling(u[gene], g.inducer->theta, g.inducer->mu);
}

/// Promoter activity c_{i,u}(x) in [eps_i, 1]; x is a state point of dimension n.
inline double regulatory_probability(std::span<const double> x, const InducerVector& u, std::size_t gene,
                                     const GrnParams& params) {
    const auto& g = params.genes.at(gene);
    if (!g.regulator) return 1.0;
    const double rho = modulated_repression(x[*g.regulator], g.hill_constant, g.hill_coefficient,
                                            gene_scaling(g, u, gene));
    return leaky_activity(rho, g.leakage);
}

/// Exponential burst-size density omega(s) = exp(-s/b) / b.
inline double burst_density(double s, double mean_burst) {
    if (!(mean_burst > 0.0)) throw ConfigError("b", "mean burst size must be positive");
    if (s < 0.0) return 0.0;
    return std::exp(-s / mean_burst) / mean_burst;
}

/// Activity of each gene tabulated over the cells of its regulator axis.
/// Genes without a regulator get an empty table (activity identically 1).
struct RegulationField {
    std::vector<std::vector<double>> activity;

    static RegulationField build(const DomainSpec& d, const GrnParams& params, const InducerVector& u) {
        if (params.size() != d.dims()) throw ConfigError("genes", "gene count must equal the domain dimension");
        RegulationField f;
        f.activity.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& g = params.genes[i];
            if (!g.regulator) continue;
            const std::size_t axis = *g.regulator;
            const double scale = gene_scaling(g, u, i);
            auto& row = f.activity[i];
            row.resize(d.cells(axis));
            for (std::size_t k = 0; k < row.size(); ++k)
                row[k] = leaky_activity(
                    modulated_repression(d.center(axis, k), g.hill_constant, g.hill_coefficient, scale), g.leakage);
        }
        return f;
    }

    double at(std::size_t gene, const GrnParams& params, const Index3& idx) const {
        const auto& row = activity[gene];
        return row.empty() ? 1.0 : row[idx[*params.genes[gene].regulator]];
    }
};

}  // namespace psc
