#include "cosserat/grid.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cosserat;
using namespace testing_support;

TEST(Grid, SpacingAndCounts)
{
    const Grid3 g = build_grid({1, 1, 1}, {10, 10, 10});
    EXPECT_DOUBLE_EQ(g.spacing()[0], 0.1);
    EXPECT_NEAR(g.cell_volume(), 1e-3, 1e-18);
    EXPECT_EQ(g.node_count(), 1331);
    EXPECT_EQ(g.boundary_node_count(), 1331 - 729);

    const Grid3 b = build_grid({5, 1, 2}, {10, 10, 10});
    EXPECT_DOUBLE_EQ(b.spacing()[0], 0.5);
    EXPECT_DOUBLE_EQ(b.spacing()[1], 0.1);
    EXPECT_DOUBLE_EQ(b.spacing()[2], 0.2);
    EXPECT_EQ(b.position(2, 3, 4), (Vec3{1.0, 0.30000000000000004, 0.8}));

    EXPECT_THROW(build_grid({1, 1, 1}, {1, 10, 10}), ConfigurationError);
    EXPECT_THROW(build_grid({0, 1, 1}, {10, 10, 10}), ConfigurationError);
}

TEST(Grid, IndexRoundTrip)
{
    const Grid3 g({1, 2, 3}, {3, 4, 5});
    for (std::int64_t n = 0; n < g.node_count(); ++n) EXPECT_EQ(g.index(g.node(n)), n);
    EXPECT_EQ(g.index(1, 0, 0), 1);
    EXPECT_EQ(g.index(0, 1, 0), 4);
    EXPECT_EQ(g.index(0, 0, 1), 20);
}

TEST(NewtonCotes, Weights)
{
    const Grid3 g({1, 1, 1}, {4, 4, 4});
    EXPECT_EQ(newton_cotes_weight(2, 2, 2, g), 8);
    EXPECT_EQ(newton_cotes_weight(0, 0, 0, g), 1);
    EXPECT_EQ(newton_cotes_weight(4, 0, 4, g), 1);
    EXPECT_EQ(newton_cotes_weight(0, 2, 2, g), 4);
    EXPECT_EQ(newton_cotes_weight(0, 4, 2, g), 2);
    EXPECT_THROW(newton_cotes_weight(5, 0, 0, g), IndexError);
    EXPECT_THROW(newton_cotes_weight(0, -1, 0, g), IndexError);
}

TEST(NewtonCotes, IntegratesConstantsAndTrilinearFields)
{
    for (const Index3 d : {Index3{2, 2, 2}, Index3{10, 10, 10}, Index3{3, 7, 5}}) {
        const Grid3 g({5, 1, 2}, d);
        double vol = 0.0, lin = 0.0;
        for (std::int64_t n = 0; n < g.node_count(); ++n) {
            const Index3 ijk = g.node(n);
            const Vec3 x = g.position(ijk);
            vol += quadrature_weight(g, ijk);
            lin += quadrature_weight(g, ijk) * x[0] * x[1] * x[2];
        }
        EXPECT_NEAR(vol, 10.0, 1e-12);
        EXPECT_NEAR(lin, 25.0 / 2 * 1.0 / 2 * 4.0 / 2, 1e-11);
    }
}

TEST(CentralDiff, Polynomials)
{
    EXPECT_DOUBLE_EQ(central_diff(3.0, 3.0, 0.1), 0.0);
    EXPECT_NEAR(central_diff(2.0 * 0.4, 2.0 * 0.6, 0.1), 2.0, 1e-14);
    EXPECT_NEAR(central_diff(0.4 * 0.4, 0.6 * 0.6, 0.1), 1.0, 1e-14);
}

TEST(AxisStencil, InteriorAndEnds)
{
    const AxisStencil mid = axis_stencil(3, 6, 0.5);
    EXPECT_EQ(mid.index, (std::array<int, 2>{4, 2}));
    EXPECT_DOUBLE_EQ(mid.coeff[0], 1.0);
    const AxisStencil lo = axis_stencil(0, 6, 0.5);
    EXPECT_EQ(lo.index, (std::array<int, 2>{1, 0}));
    EXPECT_DOUBLE_EQ(lo.coeff[0], 2.0);
    const AxisStencil hi = axis_stencil(6, 6, 0.5);
    EXPECT_EQ(hi.index, (std::array<int, 2>{6, 5}));
}

TEST(GridDerivative, ExactForLinearFields)
{
    const Grid3 g({2, 1, 3}, {4, 5, 6});
    auto f = [&](std::int64_t n) {
        const Vec3 x = g.position(g.node(n));
        return 1.5 * x[0] - 2.0 * x[1] + 0.25 * x[2] + 7.0;
    };
    const std::array<double, 3> grad{1.5, -2.0, 0.25};
    for (std::int64_t n = 0; n < g.node_count(); ++n)
        for (int l = 0; l < 3; ++l) EXPECT_NEAR(grid_derivative(g, g.node(n), l, f), grad[l], 1e-12);
}

TEST(DofLayout, CountsMatchClosedForm)
{
    for (const Index3 d : {Index3{2, 2, 2}, Index3{4, 3, 5}, Index3{10, 10, 10}}) {
        const Grid3 g({1, 1, 1}, d);
        const std::int64_t n = g.node_count(), b = g.boundary_node_count();
        EXPECT_EQ(DofLayout(g, Parameterization::quaternion).free_count(), 8 * n - 7 * b);
        EXPECT_EQ(DofLayout(g, Parameterization::euler).free_count(), 7 * n - 6 * b);
        EXPECT_EQ(DofLayout(g, Parameterization::quaternion, DofSubset::rotation_only).free_count(), 4 * (n - b));
        EXPECT_EQ(free_dof_count(d, Parameterization::quaternion), 8 * n - 7 * b);
    }
}

TEST(DofLayout, TableOneCounts)
{
    EXPECT_EQ(free_dof_count({32, 32, 32}, Parameterization::euler), 214683);
    EXPECT_EQ(free_dof_count({64, 64, 64}, Parameterization::euler), 1774907);
    EXPECT_EQ(free_dof_count({32, 32, 32}, Parameterization::quaternion), 244474);
    EXPECT_EQ(free_dof_count({64, 64, 64}, Parameterization::quaternion), 2024954);
    EXPECT_EQ(DofLayout(Grid3({1, 1, 1}, {32, 32, 32}), Parameterization::euler).free_count(), 214683);
}

TEST(DofLayout, BoundarySlotsAreFixedAndGammaFree)
{
    const Grid3 g({1, 1, 1}, {3, 3, 3});
    const DofLayout l(g, Parameterization::quaternion);
    const std::int64_t corner = g.index(0, 0, 0), inner = g.index(1, 1, 1);
    for (int s = 0; s < 7; ++s) EXPECT_EQ(l.free_index(corner, s), -1);
    EXPECT_GE(l.free_index(corner, l.gamma_slot()), 0);
    for (int s = 0; s < 8; ++s) EXPECT_GE(l.free_index(inner, s), 0);
}

namespace {

FieldState random_state(const Grid3& g, Parameterization p)
{
    FieldState s = FieldState::sized(g.node_count(), p);
    for (std::int64_t n = 0; n < g.node_count(); ++n) {
        s.phi[n] = random_vec3();
        s.gamma[n] = uniform();
        if (p == Parameterization::quaternion)
            s.q[n] = random_quaternion();
        else
            s.alpha[n] = {uniform(), uniform(), uniform()};
    }
    return s;
}

} // namespace

TEST(Pack, RoundTripRestoresDirichletData)
{
    for (auto p : {Parameterization::quaternion, Parameterization::euler}) {
        const Grid3 g({1, 2, 1}, {3, 4, 3});
        const DofLayout l(g, p);
        const FieldState a = random_state(g, p);
        const FieldState base = random_state(g, p);
        const auto v = pack(a, l);
        ASSERT_EQ(static_cast<std::int64_t>(v.size()), l.free_count());
        const FieldState b = unpack(v, l, base);
        EXPECT_EQ(pack(b, l), v);
        const int spn = l.slots_per_node();
        for (std::int64_t n = 0; n < g.node_count(); ++n)
            for (int s = 0; s < spn; ++s) {
                const double expect = l.free_index(n, s) >= 0 ? slot_value(a, p, n, s) : slot_value(base, p, n, s);
                EXPECT_EQ(slot_value(b, p, n, s), expect);
            }
        EXPECT_THROW(unpack(std::vector<double>(v.size() + 1), l, base), StructuralError);
    }
}

TEST(FieldDump, OneLinePerNode)
{
    const Grid3 g({1, 1, 1}, {2, 2, 2});
    FieldState s = FieldState::sized(g.node_count(), Parameterization::quaternion);
    for (auto& q : s.q) q = Quaternion::identity();
    std::vector<double> kappa(g.node_count(), -0.5);
    std::ostringstream os;
    write_field_dump(os, g, s, kappa);
    std::istringstream in(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        double v;
        int cols = 0;
        while (ls >> v) ++cols;
        EXPECT_EQ(cols, 15);
        ++lines;
    }
    EXPECT_EQ(lines, 27);
}
