#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "psc/grn.hpp"

using namespace psc;

namespace {

// Case I toggle switch: gene 0 repressed by x1 (K=32), gene 1 repressed by x0 (K=30) with inducer I_2.
GrnParams toggle_case1() {
    GrnParams p;
    GeneParams g1{11, 100, 8.4, 1, 0.1, 1, 32, 4, std::nullopt};
    GeneParams g2{9, 80, 8.4, 1, 0.1, 0, 30, 4, InducerParams{0.1, 2}};
    p.genes = {g1, g2};
    return p;
}

}  // namespace

TEST(InducerScaling, ZeroInputIsIdentity) {
    EXPECT_EQ(inducer_scaling(0.0, 0.1, 2.0), 1.0);
    EXPECT_EQ(inducer_scaling(0.0, 7.0, 0.5), 1.0);
}

TEST(InducerScaling, HalfSaturationForAnyExponent) {
    for (double mu : {0.5, 1.0, 2.0, 7.0}) EXPECT_NEAR(inducer_scaling(0.3, 0.3, mu), 0.5, 1e-15);
}

TEST(InducerScaling, CaseOneSaturatedInput) {
    // Direct evaluation: 1 / (1 + (99.5 / 0.1)^2) = 1 / 990026.
    const double expected = 1.0 / (1.0 + std::pow(99.5 / 0.1, 2.0));
    EXPECT_NEAR(expected, 1.0101e-6, 1e-10);
    EXPECT_NEAR(inducer_scaling(99.5, 0.1, 2.0), expected, 1e-18);
}

TEST(InducerScaling, RejectsNegativeInputAndIsMonotone) {
    EXPECT_THROW(inducer_scaling(-1e-3, 0.1, 2.0), ConfigError);
    double prev = 2.0;
    for (double I = 0.0; I < 50.0; I += 0.37) {
        const double f = inducer_scaling(I, 0.8, 1.7);
        EXPECT_LE(f, prev);
        EXPECT_GT(f, 0.0);
        prev = f;
    }
}

TEST(ModulatedRepression, LimitsAndHalfSaturation) {
    EXPECT_EQ(modulated_repression(0.0, 30.0, 4.0, 1.0), 1.0);
    EXPECT_NEAR(modulated_repression(30.0, 30.0, 4.0, 1.0), 0.5, 1e-15);
    EXPECT_LT(modulated_repression(31.0, 30.0, 4.0, 1.0), modulated_repression(29.0, 30.0, 4.0, 1.0));
    EXPECT_GT(modulated_repression(60.0, 30.0, 4.0, 1e-3), modulated_repression(60.0, 30.0, 4.0, 1e-1));
}

TEST(ModulatedRepression, CaseOneSaturationTarget) {
    const double F = inducer_scaling(99.5, 0.1, 2.0);
    EXPECT_NEAR(modulated_repression(300.0, 30.0, 4.0, F), 0.99, 1e-5);
}

TEST(ModulatedRepression, LogDomainMatchesDirectFormula) {
    // H = 9 with x up to 1000: x^H ~ 1e27 is still representable, so compare with the direct quotient.
    for (double x : {1.0, 150.0, 200.0, 640.0, 1000.0})
        for (double F : {1.0, 1e-3, 5e-9}) {
            const double kh = std::pow(200.0, 9.0);
            const double direct = kh / (kh + std::pow(x, 9.0) * F);
            EXPECT_NEAR(modulated_repression(x, 200.0, 9.0, F), direct, 1e-14);
        }
}

TEST(RegulatoryProbability, LeakageBounds) {
    auto p = toggle_case1();
    const auto u0 = InducerVector::zeros(2);
    const std::vector<double> origin{0.0, 0.0};
    EXPECT_EQ(regulatory_probability(origin, u0, 0, p), 1.0);  // rho = 1 -> c = 1
    const std::vector<double> huge{1e6, 1e6};
    EXPECT_NEAR(regulatory_probability(huge, u0, 0, p), 0.1, 1e-12);  // rho -> 0 -> c = eps
}

TEST(RegulatoryProbability, CaseOneGeneTwoUnderSaturatedInducer) {
    auto p = toggle_case1();
    const InducerVector u({0.0, 99.5});
    const std::vector<double> x{300.0, 0.0};
    const double rho = modulated_repression(300.0, 30.0, 4.0, inducer_scaling(99.5, 0.1, 2.0));
    EXPECT_NEAR(regulatory_probability(x, u, 1, p), rho + 0.1 * (1.0 - rho), 1e-15);
    EXPECT_NEAR(regulatory_probability(x, u, 1, p), 0.991, 1e-5);
}

TEST(RegulatoryProbability, GridSweepBoundsAndInducerMonotonicity) {
    auto p = toggle_case1();
    p.genes[0].inducer = InducerParams{0.2, 1.5};
    DomainSpec d({300.0, 300.0}, {60, 60});
    const std::vector<InducerVector> inputs{InducerVector({0, 0}), InducerVector({0, 5}), InducerVector({3, 5}),
                                            InducerVector({3, 99.5}), InducerVector({40, 99.5})};
    for (std::size_t c = 0; c < d.size(); ++c) {
        const auto x = cell_center(d, c);
        for (std::size_t gene = 0; gene < 2; ++gene) {
            double prev = 0.0;
            std::size_t k = 0;
            for (const auto& u : inputs) {
                const double v = regulatory_probability(x, u, gene, p);
                EXPECT_GE(v, p.genes[gene].leakage);
                EXPECT_LE(v, 1.0);
                if (k++ > 0) {
                    EXPECT_GE(v, prev - 1e-15);  // inputs are componentwise increasing
                }
                prev = v;
            }
        }
    }
}

TEST(RegulationField, TabulatesRegulatorAxis) {
    auto p = toggle_case1();
    DomainSpec d({300.0, 300.0}, {30, 30});
    const InducerVector u({0.0, 99.5});
    const auto f = RegulationField::build(d, p, u);
    for (std::size_t c = 0; c < d.size(); c += 7) {
        const auto idx = d.unflat(c);
        const auto x = cell_center(d, c);
        for (std::size_t gene = 0; gene < 2; ++gene)
            EXPECT_DOUBLE_EQ(f.at(gene, p, idx), regulatory_probability(x, u, gene, p));
    }
}

TEST(BurstDensity, ValueAtZeroAndQuadratureMass) {
    const double b = 100.0 / 8.4;
    EXPECT_NEAR(b, 11.905, 5e-4);
    EXPECT_DOUBLE_EQ(burst_density(0.0, b), 1.0 / b);
    const double ds = b / 1000.0;
    double mass = 0.0, mean = 0.0;
    for (double s = 0.5 * ds; s < 40.0 * b; s += ds) {
        mass += burst_density(s, b) * ds;
        mean += s * burst_density(s, b) * ds;
    }
    EXPECT_NEAR(mass, 1.0, 1e-6);
    EXPECT_NEAR(mean, b, 1e-4 * b);
    EXPECT_THROW(burst_density(1.0, 0.0), ConfigError);
}

TEST(GrnParams, ValidationNamesFields) {
    auto p = toggle_case1();
    EXPECT_NO_THROW(p.validate());
    p.genes[1].protein_decay = 0.0;
    try {
        p.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "genes[1].gamma_x");
    }
    p = toggle_case1();
    p.genes[0].leakage = 1.5;
    EXPECT_THROW(p.validate(), ConfigError);
    p = toggle_case1();
    p.genes[0].regulator = 5;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_TRUE(toggle_case1().strict_leakage());
}
