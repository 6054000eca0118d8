#include <gtest/gtest.h>

#include <microdarcy/errors.hpp>
#include <microdarcy/femcore.hpp>
#include <microdarcy/quadrature.hpp>

#include <cmath>
#include <memory>
#include <random>

using namespace microdarcy;

namespace {

const unsigned cell_v = constraint::periodic | constraint::zero_normal_on_obstacle;

const CellMesh &cell() {
    static const CellMesh m = build_unit_cell_mesh(6, ObstacleSpec{});
    return m;
}

Vec random(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Vec x(n);
    for (auto &v : x) v = d(rng);
    return x;
}

double factorial(int n) { return std::tgamma(n + 1.0); }

} // namespace

TEST(Quadrature, TetRuleExactToDegreeFive) {
    const TetRule &r = tet_rule();
    for (int a = 0; a <= 5; ++a)
        for (int b = 0; a + b <= 5; ++b)
            for (int c = 0; a + b + c <= 5; ++c) {
                const int d = 5 - a - b - c;
                double q = 0;
                for (size_t k = 0; k < r.points.size(); ++k) {
                    const auto &L = r.points[k];
                    q += r.weights[k] * std::pow(L[0], a) * std::pow(L[1], b) * std::pow(L[2], c) * std::pow(L[3], d);
                }
                const double exact = factorial(a) * factorial(b) * factorial(c) * factorial(d) * 6 / factorial(8);
                EXPECT_NEAR(q, exact, 1e-15);
            }
}

TEST(Quadrature, TriRuleExactToDegreeFour) {
    const TriRule &r = tri_rule();
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; a + b <= 4; ++b) {
            const int c = 4 - a - b;
            double q = 0;
            for (size_t k = 0; k < r.points.size(); ++k) {
                const auto &L = r.points[k];
                q += r.weights[k] * std::pow(L[0], a) * std::pow(L[1], b) * std::pow(L[2], c);
            }
            EXPECT_NEAR(q, factorial(a) * factorial(b) * factorial(c) * 2 / factorial(6), 1e-15);
        }
}

TEST(Space, ExpandAndRestrictAreTransposes) {
    Space V(cell(), Family::vectorP2, cell_v);
    const Vec x = random(V.n_dofs(), 1);
    const Vec y = random(V.n_nodes() * 3, 2);
    EXPECT_NEAR(V.expand(x).dot(y), x.dot(V.restrict_raw(y)), 1e-10 * x.norm() * y.norm());
    const SpMat P = V.prolongation();
    EXPECT_LE((Vec(P * x) - V.expand(x)).norm(), 1e-14 * x.norm());
}

TEST(Space, NormalConstraintHolds) {
    Space V(cell(), Family::vectorP2, cell_v);
    const Vec raw = V.expand(random(V.n_dofs(), 3));
    int n = 0;
    for (int node = 0; node < V.n_nodes(); ++node)
        if (V.normal_constrained(node)) {
            EXPECT_NEAR(V.constraint_normal(node).dot(raw.segment<3>(3 * node)), 0, 1e-13);
            ++n;
        }
    EXPECT_GT(n, 0);
}

TEST(Space, PeriodicImagesShareValues) {
    Space V(cell(), Family::vectorP2, cell_v);
    const Vec raw = V.expand(random(V.n_dofs(), 4));
    for (int node = 0; node < V.n_nodes(); ++node)
        ASSERT_EQ(raw.segment<3>(3 * node), raw.segment<3>(3 * V.master(node)));
}

TEST(Space, IncompatibleConstraints) {
    EXPECT_THROW(Space(cell(), Family::vectorP2, constraint::zero_mean), IncompatibleConstraints);
    EXPECT_THROW(Space(cell(), Family::scalarP1, constraint::zero_normal_on_obstacle), IncompatibleConstraints);
    EXPECT_THROW(Space(cell(), Family::vectorP2, constraint::periodic | constraint::zero_exterior_trace),
                 IncompatibleConstraints);
    EXPECT_THROW(Space(cell(), Family::vectorP2, constraint::zero_exterior_trace), IncompatibleConstraints);
    TetMesh box = build_box_mesh(4);
    EXPECT_THROW(Space(box, Family::vectorP2, 0, std::make_shared<P2Topology>(cell())), MeshMismatch);
}

TEST(Space, BasisIntegralsSumToVolume) {
    Space V(cell(), Family::vectorP2, constraint::periodic);
    const Eigen::MatrixXd I = V.basis_integrals();
    const Vec ones = V.interpolate([](const Vec3 &) { return Vec3(1, 1, 1); });
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(I.col(c).dot(ones), cell().fluid_volume, 1e-12);
    const Vec load = assemble_constant_load(V, Vec3(2, -1, 0.5));
    EXPECT_LE((load - (2 * I.col(0) - I.col(1) + 0.5 * I.col(2))).norm(), 1e-13);
}

TEST(Assembly, QuadraticInterpolationIsExact) {
    TetMesh box = build_box_mesh(3);
    Space V(box, Family::vectorP2, 0);
    auto f = [](const Vec3 &x) { return Vec3(x[0] * x[1], x[2] * x[2] - x[0], 1 + x[1]); };
    const Vec u = V.interpolate(f);
    const SpMat M = assemble_form(FormKind::mass, V, V);
    // int |f|^2 over the unit cube
    const double exact = 1.0 / 9 + (1.0 / 5 - 2.0 / 6 + 1.0 / 3) + (1 + 1 + 1.0 / 3);
    EXPECT_NEAR(u.dot(M * u), exact, 1e-12);
    const SpMat S = assemble_form(FormKind::grad_grad, V, V);
    // |Df|^2 = x1^2 + x0^2 + 4 x2^2 + 1 + 1
    EXPECT_NEAR(u.dot(S * u), 1.0 / 3 + 1.0 / 3 + 4.0 / 3 + 2, 1e-12);
}

TEST(Assembly, GradEqualsRotPlusDivForZeroTrace) {
    TetMesh box = build_box_mesh(4);
    Space V(box, Family::vectorP2, constraint::zero_exterior_trace);
    const Vec u = random(V.n_dofs(), 6), v = random(V.n_dofs(), 7);
    const SpMat S = assemble_form(FormKind::grad_grad, V, V);
    const SpMat R = assemble({{FormKind::rot_rot, 1}, {FormKind::div_div, 1}}, V, V);
    EXPECT_NEAR(u.dot(S * v), u.dot(R * v), 1e-10 * u.norm() * v.norm());
    EXPECT_NEAR(gaffney_ratio(V, u), 1.0, 1e-12);
}

TEST(Assembly, FormsAreSymmetricWhereExpected) {
    Space V(cell(), Family::vectorP2, cell_v);
    for (FormKind k : {FormKind::rot_rot, FormKind::div_div, FormKind::mass, FormKind::grad_grad, FormKind::surface_mass}) {
        const SpMat A = assemble_form(k, V, V);
        const SpMat At = A.transpose();
        EXPECT_LE((A - At).norm(), 1e-13 * A.norm());
    }
}

TEST(Assembly, IntegrationByPartsOnTheCell) {
    Space V(cell(), Family::vectorP2, cell_v);
    for (int k = 0; k < 10; ++k) {
        const Vec phi = random(V.n_dofs(), 10 + k), psi = random(V.n_dofs(), 100 + k);
        EXPECT_LE(std::abs(ibp_residual(V, phi, psi)), 1e-10);
    }
    const IbpForm F(V);
    const Vec a2 = random(V.n_dofs(), 20), b2 = random(V.n_dofs(), 21);
    EXPECT_EQ(F.residual(a2, b2), ibp_residual(V, a2, b2));
    Space W(cell(), Family::vectorP1, constraint::periodic);
    const Vec a = random(W.n_dofs(), 8), b = random(W.n_dofs(), 9);
    EXPECT_LE(std::abs(ibp_residual(W, a, b)), 1e-10);
}

TEST(Assembly, ConstantPressureIsInKernelOfDivergenceTranspose) {
    Space V(cell(), Family::vectorP2, cell_v);
    Space Q(cell(), Family::scalarP1, constraint::periodic);
    const SpMat Bt = assemble_form(FormKind::pressure_div, Q, V);
    const Vec one = Q.interpolate_scalar([](const Vec3 &) { return 1.0; });
    EXPECT_LE(Vec(Bt * one).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Assembly, LoadOfConstantMatchesConstantLoad) {
    Space V(cell(), Family::vectorP2, cell_v);
    const Vec3 c(0.3, -2, 1);
    const Vec a = assemble_load(V, [&](const Vec3 &) { return c; });
    EXPECT_LE((a - assemble_constant_load(V, c)).norm(), 1e-13 * a.norm());
}

TEST(Topology, EdgesAreUnique) {
    P2Topology t(cell());
    EXPECT_EQ(t.n_nodes(), cell().n_vertices() + int(t.edges.size()));
    for (size_t e = 0; e < t.edges.size(); ++e) EXPECT_EQ(t.edge(t.edges[e][0], t.edges[e][1]), int(e));
    EXPECT_EQ(t.edge(0, 0), -1);
}
