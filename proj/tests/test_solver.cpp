#include "cosserat/solver.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace cosserat;
using namespace testing_support;

namespace {

ScenarioSpec small_shear(int n = 4, double T = 0.1)
{
    ScenarioSpec s = ScenarioSpec::shear_defaults();
    s.resolution = {n, n, n};
    s.T = T;
    s.lbfgs.eps0 = 1e-9;
    return s;
}

ScenarioSpec small_bending(int n = 4, double T = 0.1)
{
    ScenarioSpec s = ScenarioSpec::bending_defaults();
    s.resolution = {n, n, n};
    s.T = T;
    return s;
}

} // namespace

TEST(BoundaryData, ShearMap)
{
    const auto b = shear_bc({0.3, 0.5, 0.7}, 0.25);
    EXPECT_EQ(b.phi, (Vec3{0.3 + 0.125, 0.5, 0.7}));
    EXPECT_EQ(b.dphi(0, 1), 0.25);
    EXPECT_EQ(b.q, Quaternion::identity());
}

TEST(BoundaryData, BendingMap)
{
    const double l1 = 5.0, beta = 0.1;
    const double pi = std::numbers::pi;
    // Zero displacement at x1 = 0, 2 L1 beta / pi at x1 = L1.
    EXPECT_NEAR(bending_map({0.0, 0.2, 0.3}, l1, beta)[1], 0.2, 1e-15);
    EXPECT_NEAR(bending_map({l1, 0.2, 0.3}, l1, beta)[1], 0.2 + 2 * l1 * beta / pi, 1e-14);
    EXPECT_EQ(bending_map({1.0, 0.2, 0.3}, l1, beta)[0], 1.0);
    EXPECT_EQ(bending_map({1.0, 0.2, 0.3}, l1, beta)[2], 0.3);
    // Gradient against a central difference in x1.
    for (double x1 : {0.0, 1.3, 2.5, 4.9}) {
        const double d = 1e-6;
        const double fd = (bending_map({x1 + d, 0, 0}, l1, beta)[1] - bending_map({x1 - d, 0, 0}, l1, beta)[1]) / (2 * d);
        EXPECT_NEAR(bending_gradient({x1, 0, 0}, l1, beta)(1, 0), fd, 1e-9);
    }
    EXPECT_NEAR(bending_slip({l1, 0, 0}, l1, beta), beta, 1e-15);
    EXPECT_EQ(bending_slip({0, 0, 0}, l1, beta), 0.0);
}

TEST(BoundaryData, BendingRotationStaysInPlane)
{
    MaterialParams p = ScenarioSpec::bending_defaults().material;
    for (double x1 : {0.0, 1.0, 2.5, 4.0, 5.0}) {
        const Vec3 x{x1, 0.5, 1.0};
        const double gamma = bending_slip(x, 5.0, 0.1);
        const auto b = bending_bc(x, 5.0, 0.1, gamma, p);
        EXPECT_NEAR(b.q.q1, 0.0, 1e-14);
        EXPECT_NEAR(b.q.q2, 0.0, 1e-14);
        EXPECT_NEAR(modulus(b.q), 1.0, 1e-14);
        EXPECT_GE(b.q.q0, 0.0);
        // q_D is the rotation factor of Dg_D Fp^-1.
        const auto pd = polar_decompose(b.dphi * fp_inverse(gamma, p.slip, p.normal));
        EXPECT_LT(max_abs_diff(rotation(b.q), pd.rotation), 1e-13);
    }
}

TEST(Scenario, StepsAndValidation)
{
    ScenarioSpec s = ScenarioSpec::shear_defaults();
    EXPECT_EQ(s.step_count(), 10);
    EXPECT_DOUBLE_EQ(s.beta(1.0), 0.25);
    s.T = 0.05;
    EXPECT_THROW(s.validate(), ConfigurationError);
    s = ScenarioSpec::shear_defaults();
    s.parameterization = Parameterization::euler;
    EXPECT_THROW(s.validate(), ConfigurationError);
    s.material.curvature = CurvatureVariant::euler;
    EXPECT_NO_THROW(s.validate());
    EXPECT_THROW(run_simulation(small_shear(4, 0.01)), ConfigurationError);
}

TEST(InitialState, CauchyBornExtension)
{
    const ScenarioSpec s = small_bending();
    const Grid3 g(s.lengths, s.resolution);
    const FieldState st = initial_state(s, g, 0.1);
    EXPECT_EQ(cauchy_born_deviation(s, g, st, 0.1), 0.0);
    for (double v : st.gamma) EXPECT_EQ(v, 0.0);

    ScenarioSpec p = s;
    p.perturbation = 0.01;
    p.seed = 7;
    const FieldState a = initial_state(p, g, 0.1), b = initial_state(p, g, 0.1);
    EXPECT_EQ(pack(a, DofLayout(g, p.parameterization)), pack(b, DofLayout(g, p.parameterization)));
    EXPECT_GT(cauchy_born_deviation(p, g, a, 0.1), 0.0);
}

TEST(TimeStep, PreservesDirichletData)
{
    for (auto param : {Parameterization::quaternion, Parameterization::euler}) {
        ScenarioSpec s = small_bending(3);
        s.parameterization = param;
        if (param == Parameterization::euler) s.material.curvature = CurvatureVariant::euler;
        s.lbfgs.eps0 = 1e-6;
        const Grid3 g(s.lengths, s.resolution);
        FieldState st = initial_state(s, g, s.time_of(1));
        const auto out = run_time_step(s, g, st, PlasticHistory::zero(g.node_count()), 1);
        FieldState expected = out.state;
        apply_boundary(s, g, 0.1, expected);
        for (std::int64_t n = 0; n < g.node_count(); ++n) {
            if (!g.is_boundary(g.node(n))) continue;
            EXPECT_EQ(out.state.phi[n], expected.phi[n]);
            if (param == Parameterization::quaternion)
                EXPECT_EQ(out.state.q[n], expected.q[n]);
            else
                EXPECT_EQ(out.state.alpha[n], expected.alpha[n]);
        }
    }
}

TEST(TimeStep, PlasticDeformationIsVolumePreserving)
{
    const MaterialParams p;
    for (int t = 0; t < 100; ++t) {
        const double gamma = uniform(-3, 3);
        EXPECT_NEAR(det(fp(gamma, p.slip, p.normal)), 1.0, 1e-14);
    }
    const auto r = run_simulation(small_shear(3, 0.2));
    ASSERT_TRUE(r.completed) << r.failure;
    for (double gamma : r.state.gamma) EXPECT_NEAR(det(fp(gamma, {1, 0, 0}, {0, 1, 0})), 1.0, 1e-14);
}

TEST(TimeStep, HardeningIsMonotone)
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        ScenarioSpec s = small_shear(3, 0.3);
        s.material.rho = 50.0 * uniform(0.5, 1.5);
        s.material.sigma_y = 20.0 * uniform(0.5, 1.5);
        s.perturbation = 0.02;
        s.seed = seed;
        s.lbfgs.eps0 = 1e-7;
        std::vector<double> previous(27, 0.0);
        int steps = 0;
        const auto r = run_simulation(s, [&](const StepOutcome& o) {
            for (std::size_t n = 0; n < previous.size(); ++n) {
                EXPECT_LE(o.history.kappa0[n], previous[n]);
                EXPECT_LE(o.history.kappa0[n], 0.0);
            }
            previous = o.history.kappa0;
            ++steps;
        });
        ASSERT_TRUE(r.completed) << r.failure;
        EXPECT_EQ(steps, 3);
    }
}

TEST(Predictor, StationaryStateTakesNoIterations)
{
    // Shear at its exact solution: every rotation entry is stationary.
    ScenarioSpec s = small_shear(4);
    const Grid3 g(s.lengths, s.resolution);
    FieldState st = initial_state(s, g, 0.1);
    for (double& v : st.gamma) v = s.beta(0.1);
    const EnergyModel m(g, s.material, PlasticHistory::zero(g.node_count()), s.parameterization);
    const auto r = predictor(st, m, s.lbfgs);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.stop, StopReason::converged);
}

TEST(Predictor, LeavesPhiAndGammaUntouched)
{
    ScenarioSpec s = small_bending(4);
    s.perturbation = 0.01;
    s.seed = 3;
    s.lbfgs.eps0 = 1e-6;
    const Grid3 g(s.lengths, s.resolution);
    FieldState st = initial_state(s, g, 0.1);
    const FieldState before = st;
    const EnergyModel m(g, s.material, PlasticHistory::zero(g.node_count()), s.parameterization);
    const double e0 = m.energy(st);
    const auto r = predictor(st, m, s.lbfgs);
    EXPECT_GT(r.iterations, 0);
    EXPECT_LE(r.energy, e0);
    EXPECT_EQ(st.phi, before.phi);
    EXPECT_EQ(st.gamma, before.gamma);
    EXPECT_NE(st.q, before.q);
}

TEST(Shear, RecoversHomogeneousSlip)
{
    const ScenarioSpec s = small_shear(4, 0.2);
    std::vector<StepOutcome> steps;
    const auto r = run_simulation(s, [&](const StepOutcome& o) { steps.push_back(o); });
    ASSERT_TRUE(r.completed) << r.failure;
    ASSERT_EQ(steps.size(), 2u);
    for (const auto& o : steps) {
        const double beta = s.beta(o.report.t);
        EXPECT_TRUE(o.report.converged());
        EXPECT_LT(o.report.energy, 1e-9);
        EXPECT_LT(cauchy_born_deviation(s, r.grid, o.state, o.report.t), 1e-6);
        for (double gamma : o.state.gamma) EXPECT_NEAR(gamma, beta, 1e-5);
    }
    // kappa = -|gamma| after the first step.
    for (std::size_t n = 0; n < steps[0].history.kappa0.size(); ++n)
        EXPECT_DOUBLE_EQ(steps[0].history.kappa0[n], -std::abs(steps[0].state.gamma[n]));
}

TEST(Bending, SingleAndTwoPassAgree)
{
    ScenarioSpec two = small_bending(4);
    two.lbfgs.eps0 = 1e-10;
    ScenarioSpec one = two;
    one.preconditioning = Preconditioning::off;
    const auto a = run_simulation(two), b = run_simulation(one);
    ASSERT_TRUE(a.completed) << a.failure;
    ASSERT_TRUE(b.completed) << b.failure;
    EXPECT_GT(a.reports[0].pred_iters, 0);
    EXPECT_EQ(b.reports[0].pred_iters, 0);
    EXPECT_NEAR(a.reports[0].energy, b.reports[0].energy, 10 * two.lbfgs.eps0);
}

TEST(Bending, SolveModeFallsBackAndConverges)
{
    ScenarioSpec s = small_bending(4);
    s.band_mode = BandMode::solve;
    s.lbfgs.eps0 = 1e-8;
    const auto r = run_simulation(s);
    ASSERT_TRUE(r.completed) << r.failure;
    EXPECT_TRUE(r.reports[0].converged());
}

TEST(Simulation, ReportsEveryStep)
{
    const auto r = run_simulation(small_shear(3, 0.3));
    ASSERT_TRUE(r.completed);
    ASSERT_EQ(r.reports.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(r.reports[i].step, i + 1);
        EXPECT_NEAR(r.reports[i].t, 0.1 * (i + 1), 1e-15);
        EXPECT_GE(r.reports[i].wall_ms, 0.0);
    }
    std::ostringstream os;
    write_report_header(os);
    write_report_row(os, r.reports[0]);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,t,pred_iters,corr_iters,energy,gradnorm,constraint_violation,wall_ms");
}

TEST(Simulation, ThreadCountDoesNotChangeResults)
{
    ScenarioSpec s = small_bending(4);
    s.lbfgs.eps0 = 1e-8;
    const auto a = run_simulation(s);
    s.threads = 3;
    const auto b = run_simulation(s);
    ASSERT_TRUE(a.completed && b.completed);
    EXPECT_EQ(a.reports[0].energy, b.reports[0].energy);
    EXPECT_EQ(a.reports[0].corr_iters, b.reports[0].corr_iters);
    EXPECT_EQ(a.state.q, b.state.q);
}
