#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "psc/controller.hpp"

using namespace psc;

namespace {

GrnParams toggle() {
    GrnParams p;
    GeneParams g{10, 100, 10, 1, 0.1, 1, 40, 4, InducerParams{0.1, 2}};
    p.genes = {g, g};
    p.genes[1].regulator = 0;
    return p;
}

// Coarse toggle grid: 40 x 40 cells over [0, 300]^2.
struct Small {
    DomainSpec d{{300, 300}, {40, 40}};
    GrnParams params = toggle();
    StepConfig cfg;
    SwitchingPlan plan = SwitchingPlan::make(params, d, 5, 6, 0.01);
    CostFunctional j = MarginalTargets{{52.5, 52.5}};
};

DensityGrid blob(const DomainSpec& d, double x, double y) {
    const std::vector<double> c{x, y}, s{20, 20};
    return truncated_gaussian(d, c, s);
}

}  // namespace

TEST(ConfigMatrix, RowsAreBinaryCountsMsbFirst) {
    for (std::size_t n = 1; n <= 3; ++n) {
        const auto s = build_config_matrix(n);
        ASSERT_EQ(s.size(), std::size_t{1} << n);
        std::vector<std::size_t> col(n, 0);
        for (std::size_t r = 0; r < s.size(); ++r) {
            ASSERT_EQ(s[r].size(), n);
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_EQ(s[r][j], static_cast<int>((r >> (n - 1 - j)) & 1u));
                col[j] += s[r][j];
            }
            EXPECT_EQ(row_index(s[r]), r);
        }
        for (auto c : col) EXPECT_EQ(c, std::size_t{1} << (n - 1));
    }
}

TEST(ConfigMatrix, RowsAreDistinct) {
    const auto s = build_config_matrix(3);
    for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t b = a + 1; b < s.size(); ++b) EXPECT_NE(s[a], s[b]);
}

TEST(Saturation, CaseValues) {
    EXPECT_NEAR(compute_saturation(0.01, 30, 4, 300, 0.1, 2).kappa, 99.5, 0.5);
    EXPECT_NEAR(compute_saturation(0.01, 40, 4, 300, 0.1, 2).kappa, 56.0, 0.5);
    EXPECT_NEAR(compute_saturation(0.01, 200, 8, 1000, 0.08, 2).kappa, 497.5, 0.5);
    EXPECT_NEAR(compute_saturation(0.01, 200, 9, 1000, 0.06, 2).kappa, 834.3, 0.5);
    EXPECT_NEAR(compute_saturation(0.01, 200, 7, 1000, 0.11, 2).kappa, 305.9, 0.5);
}

TEST(Saturation, ReachesTargetRepression) {
    struct C { double alpha, K, H, x, theta, mu; };
    for (const C c : {C{0.01, 30, 4, 300, 0.1, 2}, C{0.05, 40, 4, 300, 0.1, 2}, C{0.01, 200, 9, 1000, 0.06, 2},
                      C{0.2, 10, 2, 50, 1.0, 1.5}}) {
        const auto s = compute_saturation(c.alpha, c.K, c.H, c.x, c.theta, c.mu);
        ASSERT_FALSE(s.already_suppressed);
        const double rho = modulated_repression(c.x, c.K, c.H, inducer_scaling(s.kappa, c.theta, c.mu));
        EXPECT_NEAR(rho, 1.0 - c.alpha, 1e-9);
    }
}

TEST(Saturation, AlreadySuppressedAndErrors) {
    // K far above x_max: repression at x_max already exceeds 1 - alpha.
    EXPECT_TRUE(compute_saturation(0.01, 1e4, 4, 300, 0.1, 2).already_suppressed);
    EXPECT_THROW(compute_saturation(0.0, 30, 4, 300, 0.1, 2), ConfigError);
    EXPECT_THROW(compute_saturation(1.0, 30, 4, 300, 0.1, 2), ConfigError);
    EXPECT_THROW(compute_saturation(0.01, -1, 4, 300, 0.1, 2), ConfigError);
}

TEST(SwitchingPlan, ControlledGenesOnly) {
    GrnParams p = toggle();
    p.genes[0].inducer.reset();
    const DomainSpec d({300, 300}, {10, 10});
    const auto plan = SwitchingPlan::make(p, d, 3, 4, 0.01);
    EXPECT_EQ(plan.inputs(), 1u);
    EXPECT_EQ(plan.configurations(), 2u);
    EXPECT_EQ(plan.input(0).levels, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(plan.input(1).levels, (std::vector<double>{0.0, plan.saturation[0]}));
}

TEST(SwitchingPlan, Errors) {
    const DomainSpec d({300, 300}, {10, 10});
    GrnParams none = toggle();
    for (auto& g : none.genes) g.inducer.reset();
    EXPECT_THROW(SwitchingPlan::make(none, d, 1, 1, 0.01), ConfigError);
    EXPECT_THROW(SwitchingPlan::make(toggle(), d, 0, 1, 0.01), ConfigError);
    EXPECT_THROW(SwitchingPlan::make(toggle(), d, 1, 1, 0.01, {1.0}), ConfigError);
    EXPECT_THROW(SwitchingPlan::make(toggle(), d, 1, 1, 0.01, {1.0, 0.0}), ConfigError);
}

TEST(Cost, PointTargetAtDeltaIsOne) {
    const DomainSpec d({300, 300}, {30, 30});
    const std::vector<double> x{105, 45};
    EXPECT_DOUBLE_EQ(evaluate_cost(PointTarget{x}, grid_delta(d, x)), 1.0);
    EXPECT_DOUBLE_EQ(evaluate_cost(PointTarget{{15, 15}}, grid_delta(d, x)), 0.0);
}

TEST(Cost, MarginalTargetsAtProductDeltaIsTwo) {
    const DomainSpec d({300, 300}, {30, 30});
    const std::vector<double> x{105, 45};
    EXPECT_DOUBLE_EQ(evaluate_cost(MarginalTargets{x}, grid_delta(d, x)), 2.0);
    // Uniform: both normalised marginals are flat at 1.
    EXPECT_NEAR(evaluate_cost(MarginalTargets{x}, uniform_density(d)), 2.0, 1e-12);
}

TEST(Cost, BimodalRegionsMatchesQuadrature) {
    const DomainSpec d({300, 300}, {60, 60});
    const auto p = blob(d, 150, 150);
    const BimodalRegions r{Box{{200, 0}, {300, 100}}, Box{{0, 200}, {100, 300}}, Box{{100, 100}, {200, 200}}, 2.0};
    // Independent midpoint sum over cell centres using the closed-form Gaussian.
    double in = 0.0, mid = 0.0, top = 0.0;
    for (std::size_t a = 0; a < 60; ++a)
        for (std::size_t b = 0; b < 60; ++b) {
            const double x = 2.5 + 5.0 * a, y = 2.5 + 5.0 * b;
            const double v = std::exp(-((x - 150) * (x - 150) + (y - 150) * (y - 150)) / (2 * 400.0));
            top = std::max(top, v);
            if ((x > 200 && y < 100) || (x < 100 && y > 200)) in += v;
            if (x > 100 && x < 200 && y > 100 && y < 200) mid += v;
        }
    const double expect = (in - 2.0 * mid) / top * 25.0;
    EXPECT_LT(expect, 0.0);
    EXPECT_NEAR(evaluate_cost(r, p), expect, 1e-9 * std::abs(expect));
}

TEST(Cost, ValidationErrors) {
    const DomainSpec d({300, 300}, {30, 30});
    EXPECT_THROW(validate_cost(PointTarget{{400, 10}}, d), ConfigError);
    EXPECT_THROW(validate_cost(MarginalTargets{{10}}, d), ConfigError);
    EXPECT_THROW(validate_cost(BimodalRegions{Box{{0, 0}, {10, 10}}, Box{{0, 0}, {10, 10}}, Box{{5, 5}, {5, 6}}, 2.0}, d),
                 ConfigError);
    DensityGrid zero(d);
    EXPECT_THROW(evaluate_cost(PointTarget{{10, 10}}, zero), NumericalError);
}

TEST(SelectBest, LowestIndexAmongTiesSkippingNaN) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_EQ(select_best({0.5, 0.9, 0.9, 0.1}), 1u);
    EXPECT_EQ(select_best({nan, 0.2, nan, 0.2}), 1u);
    EXPECT_EQ(select_best({nan, nan, 3.0}), 2u);
    EXPECT_THROW(select_best({nan, nan}), NumericalError);
}

TEST(PscWindow, PicksTheBestCandidateAndReusesItsDensity) {
    Small s;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    const auto p = blob(s.d, 150, 40);
    const auto w = psc_window(engine, s.j, p);
    ASSERT_EQ(w.candidates.size(), 4u);
    for (std::size_t r = 0; r < 4; ++r) {
        const auto q = engine.window(r, p);
        EXPECT_EQ(w.candidates[r], evaluate_cost(s.j, q));
        EXPECT_LE(w.candidates[r], w.cost);
        if (r == w.row) {
            EXPECT_EQ(q.values, w.density.values);
        }
    }
    EXPECT_EQ(w.evaluations, 4u);
}

TEST(RunPsc, CountsEveryCandidate) {
    Small s;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    const auto res = run_psc(engine, s.j, blob(s.d, 150, 40), s.cfg);
    ASSERT_EQ(res.trace.windows.size(), 6u);
    for (std::size_t m = 0; m < 6; ++m) {
        EXPECT_EQ(res.trace.windows[m].evaluations, 4 * (m + 1));
        EXPECT_NEAR(res.trace.windows[m].t, static_cast<double>(5 * m) * s.cfg.dt, 1e-12);
    }
    EXPECT_EQ(res.trace.evaluations(), 6u * 4u);
    EXPECT_EQ(res.trace.accepts(), 0u);
    EXPECT_NEAR(total_mass(res.final_density), 1.0, 1e-10);
    EXPECT_NEAR(res.final_density.time, 30 * s.cfg.dt, 1e-12);
}

TEST(RunPsc, GreedyChainMatchesManualReplay) {
    Small s;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    const auto p0 = blob(s.d, 150, 40);
    const auto res = run_psc(engine, s.j, p0, s.cfg);
    DensityGrid p = p0;
    for (const auto& w : res.trace.windows) {
        std::vector<double> c;
        std::vector<DensityGrid> q;
        for (std::size_t r = 0; r < 4; ++r) {
            q.push_back(engine.window(r, p));
            c.push_back(evaluate_cost(s.j, q.back()));
        }
        const auto best = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
        ASSERT_EQ(w.row, best);
        EXPECT_EQ(w.bits, s.plan.matrix[best]);
        p = q[best];
    }
    EXPECT_EQ(p.values, res.final_density.values);
}

TEST(RunPsc, ZeroWindows) {
    Small s;
    s.plan.windows = 0;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    const auto p0 = blob(s.d, 150, 40);
    const auto res = run_psc(engine, s.j, p0, s.cfg);
    EXPECT_TRUE(res.trace.windows.empty());
    EXPECT_EQ(res.trace.evaluations(), 0u);
    EXPECT_EQ(res.final_density.values, p0.values);
    EXPECT_EQ(res.trace.final_cost(), res.trace.initial_cost);
}

TEST(RunPsc, DeterministicAcrossThreadCounts) {
    Small s;
    const auto p0 = blob(s.d, 150, 40);
    const PscEngine one(s.d, s.params, s.cfg, s.plan, EngineOptions{1});
    const PscEngine four(s.d, s.params, s.cfg, s.plan, EngineOptions{4});
    const auto a = run_psc(one, s.j, p0, s.cfg), b = run_psc(four, s.j, p0, s.cfg), c = run_psc(one, s.j, p0, s.cfg);
    std::ostringstream ta, tb, tc;
    a.trace.write_csv(ta, false);
    b.trace.write_csv(tb, false);
    c.trace.write_csv(tc, false);
    EXPECT_EQ(ta.str(), tb.str());
    EXPECT_EQ(ta.str(), tc.str());
    EXPECT_EQ(a.final_density.values, b.final_density.values);
}

TEST(RunPsc, SnapshotsEveryKWindowsPlusFinal) {
    Small s;
    s.plan.windows = 7;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    RunOptions o;
    o.snapshot_every = 3;
    const auto res = run_psc(engine, s.j, blob(s.d, 150, 40), s.cfg, o);
    std::vector<std::size_t> w;
    for (const auto& sn : res.trace.snapshots) w.push_back(sn.window);
    EXPECT_EQ(w, (std::vector<std::size_t>{0, 3, 6, 7}));
    EXPECT_EQ(res.trace.snapshots.back().density.values, res.final_density.values);
}

TEST(RunProfile, ReproducesAnExhaustiveTrace) {
    Small s;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    const auto p0 = blob(s.d, 150, 40);
    const auto ex = run_psc(engine, s.j, p0, s.cfg);
    const auto re = run_profile(engine, s.j, p0, s.cfg, ex.trace.rows());
    EXPECT_EQ(re.final_density.values, ex.final_density.values);
    for (std::size_t m = 0; m < ex.trace.windows.size(); ++m) EXPECT_EQ(re.trace.windows[m].cost, ex.trace.windows[m].cost);
    EXPECT_THROW(run_profile(engine, s.j, p0, s.cfg, {9}), ConfigError);
}

TEST(Trace, CsvShape) {
    Small s;
    const PscEngine engine(s.d, s.params, s.cfg, s.plan);
    const auto res = run_psc(engine, s.j, blob(s.d, 150, 40), s.cfg);
    std::ostringstream os;
    res.trace.write_csv(os, false);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "m,t_m,row,s0,s1,J,J_r0,J_r1,J_r2,J_r3,evaluations,accepted");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 6u);
}
