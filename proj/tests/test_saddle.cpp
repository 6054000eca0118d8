#include <gtest/gtest.h>

#include <microdarcy/cell.hpp>
#include <microdarcy/errors.hpp>
#include <microdarcy/saddle.hpp>

#include <random>

using namespace microdarcy;

namespace {

struct Fixture {
    CellMesh mesh = build_unit_cell_mesh(4, ObstacleSpec{});
    MixedSpaces sp = MixedSpaces::cell(mesh);
    DimensionlessParams p = DimensionlessParams::gamma_zero(0.5);
    SaddleSystem sys = assemble_micropolar(sp, p, p.Rc);
};

Fixture &fx() {
    static Fixture f;
    return f;
}

Eigen::MatrixXd random_rhs(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Eigen::MatrixXd b(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) b(i, j) = d(rng);
    return b;
}

SaddleSystem with_rhs(const Eigen::MatrixXd &rhs) {
    SaddleSystem s = fx().sys;
    s.rhs = rhs;
    return s;
}

} // namespace

TEST(Saddle, ZeroRightHandSideGivesZero) {
    const SaddleSolution s = solve_saddle(with_rhs(Eigen::MatrixXd::Zero(2 * fx().sys.n_u(), 1)));
    EXPECT_EQ(s.u.norm() + s.w.norm() + s.p.norm(), 0);
}

TEST(Saddle, ResidualAndMeanConstraint) {
    const int n = fx().sys.n_u();
    const SaddleSolution s = solve_saddle(with_rhs(random_rhs(2 * n, 2, 1)));
    ASSERT_EQ(s.residual.size(), 2u);
    for (double r : s.residual) EXPECT_LE(r, 1e-9);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(fx().sys.mean.dot(s.p.col(j)), 0, 1e-10);
}

TEST(Saddle, Linearity) {
    const int n = fx().sys.n_u();
    const Eigen::MatrixXd b = random_rhs(2 * n, 2, 2);
    Eigen::MatrixXd c(2 * n, 3);
    c << b, 3 * b.col(0) - 2 * b.col(1);
    const SaddleSolution s = solve_saddle(with_rhs(c));
    const Vec du = s.u.col(2) - 3 * s.u.col(0) + 2 * s.u.col(1);
    const Vec dw = s.w.col(2) - 3 * s.w.col(0) + 2 * s.w.col(1);
    EXPECT_LE(du.norm(), 1e-8 * s.u.col(2).norm());
    EXPECT_LE(dw.norm(), 1e-8 * s.w.col(2).norm());
}

TEST(Saddle, Deterministic) {
    const int n = fx().sys.n_u();
    const Eigen::MatrixXd b = random_rhs(2 * n, 1, 3);
    const SaddleSolution a = solve_saddle(with_rhs(b));
    const SaddleSolution c = solve_saddle(with_rhs(b));
    EXPECT_EQ(a.u, c.u);
    EXPECT_EQ(a.w, c.w);
    EXPECT_EQ(a.p, c.p);
}

TEST(Saddle, KrylovAgreesWithDirect) {
    const int n = fx().sys.n_u();
    SaddleSystem s = with_rhs(random_rhs(2 * n, 1, 4));
    const SaddleSolution d = solve_saddle(s);
    s.krylov = krylov_blocks(fx().sp, fx().p, fx().p.Rc);
    SolveOptions o;
    o.direct_limit = 0;
    const SaddleSolution k = solve_saddle(s, o);
    EXPECT_NE(d.method, k.method);
    EXPECT_LE(k.residual[0], 1e-9);
    EXPECT_LE((k.u - d.u).norm(), 1e-6 * d.u.norm());
    EXPECT_LE((k.w - d.w).norm(), 1e-6 * d.w.norm());
}

TEST(Saddle, NoBlocksFallsBackToDirect) {
    SaddleSystem s = with_rhs(random_rhs(2 * fx().sys.n_u(), 1, 5));
    SolveOptions o;
    o.direct_limit = 0;
    const SaddleSolution a = solve_saddle(s, o);
    EXPECT_EQ(a.method, solve_saddle(s).method);
    EXPECT_THROW(SaddlePreconditioner{s}, IncompatibleConstraints);
}

TEST(Saddle, ApplyMatchesAssembledMatrix) {
    const SaddleSystem &s = fx().sys;
    const Vec x = random_rhs(s.size(), 1, 6).col(0);
    const Eigen::SparseMatrix<double> M = s.matrix();
    EXPECT_LE((Vec(M * x) - s.apply(x)).norm(), 1e-12 * x.norm() * M.norm());
}

TEST(Saddle, FactorizationReuse) {
    const int n = fx().sys.n_u();
    const SaddleSystem s = with_rhs(random_rhs(2 * n, 1, 7));
    SaddleFactorization f(s);
    Vec b = Vec::Zero(s.size());
    b.head(2 * n) = s.rhs.col(0);
    const Vec x = f.solve(b);
    const SaddleSolution ref = solve_saddle(s);
    EXPECT_LE((x.head(n) - ref.u.col(0)).norm(), 1e-9 * ref.u.norm());
    EXPECT_LE((s.apply(x) - b).norm(), 1e-9 * b.norm());
}
