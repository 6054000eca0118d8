#include <gtest/gtest.h>

#include <microdarcy/analysis.hpp>
#include <microdarcy/epsweep.hpp>
#include <microdarcy/errors.hpp>

#include <json.hpp>

#include <cmath>
#include <memory>

using namespace microdarcy;

namespace {

const VectorField zero = [](const Vec3 &) { return Vec3::Zero(); };
const VectorField smooth = [](const Vec3 &x) { return Vec3(std::sin(M_PI * x[1]), 0.5 * x[0], 0); };
const VectorField torque = [](const Vec3 &x) { return Vec3(0, 0, x[0] - 0.5); };

struct Shared {
    CellMesh cell = build_unit_cell_mesh(4, ObstacleSpec{});
    DimensionlessParams p = DimensionlessParams::gamma_zero(0.25);
    WellPosednessVerdict verdict;
    std::unique_ptr<CellProblem> problem;
    std::vector<CellSolution> sols;
    EffectiveTensors tensors;
    std::shared_ptr<const MacroMesh> half;
    Shared() {
        const MixedSpaces sp = MixedSpaces::cell(cell);
        ConstantsOptions o;
        o.infsup = false;
        verdict = check_wellposedness(p, estimate_constants(sp.V, o));
        problem = std::make_unique<CellProblem>(cell, p);
        sols = problem->solve_all(verdict);
        tensors = compute_effective_tensors(*problem, sols);
        half = std::make_shared<MacroMesh>(build_macro_mesh(cell, 0.5));
    }
};

Shared &setup() {
    static Shared s;
    return s;
}

const EpsSolution &generic() {
    static const EpsSolution e = solve_eps_problem(setup().half, setup().p, smooth, torque, setup().verdict);
    return e;
}

} // namespace

TEST(EpsProblem, ZeroForcingGivesZero) {
    const EpsSolution e = solve_eps_problem(setup().half, setup().p, zero, zero, setup().verdict);
    EXPECT_EQ(e.u.norm() + e.w.norm() + e.p.norm(), 0);
    EXPECT_EQ(e.norms.u, 0);
}

TEST(EpsProblem, Invariants) {
    const EpsSolution &e = generic();
    EXPECT_LE(e.residual, 1e-9);
    EXPECT_DOUBLE_EQ(e.epsilon, 0.5);
    EXPECT_EQ(e.u.size(), e.spaces->V.n_dofs());
    EXPECT_EQ(e.p.size(), e.spaces->Q.n_dofs());
    const EpsNorms n = eps_norms(*e.spaces, e.u, e.w, e.p);
    EXPECT_DOUBLE_EQ(n.u, e.norms.u);
    EXPECT_DOUBLE_EQ(n.Dw, e.norms.Dw);
    for (double x : {n.u, n.Du, n.w, n.Dw, n.p}) EXPECT_GT(x, 0);
    // the exterior wall is no-slip
    const Vec raw = e.spaces->V.expand(e.u);
    for (int f : e.mesh->faces_with_tag(FaceTag::exterior))
        for (int i = 0; i < 3; ++i) ASSERT_EQ(raw.segment<3>(3 * e.mesh->faces[f].v[i]).norm(), 0);
}

TEST(EpsProblem, Linearity) {
    const Shared &s = setup();
    const EpsSolution a = solve_eps_problem(s.half, s.p, smooth, zero, s.verdict);
    const EpsSolution b = solve_eps_problem(s.half, s.p, zero, torque, s.verdict);
    const EpsSolution &c = generic();
    EXPECT_LE((c.u - a.u - b.u).norm(), 1e-8 * c.u.norm());
    EXPECT_LE((c.w - a.w - b.w).norm(), 1e-8 * c.w.norm());
}

TEST(EpsProblem, ViolatedVerdictBlocks) {
    WellPosednessVerdict v;
    v.satisfied = false;
    EXPECT_THROW(solve_eps_problem(setup().half, setup().p, smooth, zero, v), WellPosednessViolated);
}

TEST(CellAverage, ZeroExtensionAndNorm) {
    const Shared &s = setup();
    const TetMesh box = build_box_mesh(4);
    const DarcySolution d = solve_darcy(DarcyTensors::from(s.tensors), smooth, torque, box);
    const EpsSolution &e = generic();
    const CellAverageTable t = cell_average_compare(e, d);
    ASSERT_EQ(t.rows.size(), 8u);
    const Eigen::MatrixXd I = e.spaces->V.basis_integrals();
    double l2 = 0;
    for (const auto &r : t.rows) {
        EXPECT_NEAR(r.err_u, (r.u_eps - r.u_darcy).norm(), 1e-14);
        EXPECT_NEAR(r.err_w, (r.w_eps - r.w_darcy).norm(), 1e-14);
        l2 += std::pow(0.5, 3) * r.err_u * r.err_u;
    }
    EXPECT_NEAR(t.l2_u, std::sqrt(l2), 1e-14);
    // the cube averages add up to the mean over Omega (zero extension into the holes)
    Vec3 sum = Vec3::Zero();
    for (const auto &r : t.rows) sum += r.u_eps * std::pow(0.5, 3);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(sum[c], I.col(c).dot(e.u) / 0.5, 1e-12);
    const TetMesh odd = build_box_mesh(5);
    const DarcySolution d5 = solve_darcy(DarcyTensors::from(s.tensors), smooth, torque, odd);
    EXPECT_THROW(cell_average_compare(e, d5), MeshMismatch);
}

TEST(Unfold, IsometryAndBoundaryTrace) {
    const Shared &s = setup();
    const EpsSolution &e = generic();
    const Space &V = s.problem->spaces().V;
    const UnfoldResult zero_ref = unfold_field(e, V, [&](int) {
        return TwoScaleSample{Vec::Zero(V.n_dofs()), Vec::Zero(V.n_dofs()), Vec()};
    });
    EXPECT_NEAR(zero_ref.norm_u, e.norms.u, 1e-10 * e.norms.u);
    EXPECT_NEAR(zero_ref.norm_w, e.norms.w, 1e-10 * e.norms.w);
    EXPECT_NEAR(zero_ref.err_u, e.norms.u / e.epsilon, 1e-10 * e.norms.u);
    EXPECT_NEAR(zero_ref.err_w, e.norms.w, 1e-10 * e.norms.w);
    for (int c = 0; c < e.mesh->n_cells(); ++c) {
        const Vec T = unfold_cell(e, e.u, c, V);
        const auto Tb = unfold_boundary(e, e.u, c, V);
        EXPECT_FALSE(Tb.empty());
        for (const auto &[node, val] : Tb) ASSERT_EQ((T.segment<3>(3 * node) - val).norm(), 0);
    }
}

TEST(Unfold, DarcyReferenceIsLinearInTheData) {
    const Shared &s = setup();
    const TetMesh box = build_box_mesh(4);
    const DarcyTensors t = DarcyTensors::from(s.tensors);
    const DarcySolution d1 = solve_darcy(t, smooth, torque, box);
    const DarcySolution d2 = solve_darcy(
        t, [](const Vec3 &x) { return Vec3(-2 * smooth(x)); }, [](const Vec3 &x) { return Vec3(-2 * torque(x)); }, box);
    const auto r1 = darcy_reference(s.sols, d1, *s.half);
    const auto r2 = darcy_reference(s.sols, d2, *s.half);
    for (int c = 0; c < s.half->n_cells(); ++c) {
        const TwoScaleSample a = r1(c), b = r2(c);
        EXPECT_LE((b.u + 2 * a.u).norm(), 1e-10 * (1 + a.u.norm()));
        EXPECT_LE((b.w + 2 * a.w).norm(), 1e-10 * (1 + a.w.norm()));
    }
    // zero data, zero hat fields
    const DarcySolution d0 = solve_darcy(t, zero, zero, box);
    EXPECT_EQ(darcy_reference(s.sols, d0, *s.half)(3).u.norm(), 0);
}

TEST(Apriori, ScalingsAndSamples) {
    EpsSolution a, b;
    a.epsilon = 0.5;
    a.norms = {1, 2, 3, 4, 5};
    b.epsilon = 0.25;
    b.norms = {0.5, 2, 3, 16, 20};
    const ConvergenceReport r = apriori_check({b, a});
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].epsilon, 0.5);
    EXPECT_DOUBLE_EQ(r.rows[0].u_scaled, 2);
    EXPECT_DOUBLE_EQ(r.rows[1].u_scaled, 2);
    EXPECT_DOUBLE_EQ(r.rows[1].Dw_scaled, 4);
    EXPECT_DOUBLE_EQ(r.rows[1].p_scaled, 5);
    EXPECT_TRUE(r.all_bounded());
    b.norms.Du = 7;
    EXPECT_FALSE(apriori_check({a, b}).bounded[1]);
    EXPECT_THROW(apriori_check({a}), TooFewSamples);
    EXPECT_THROW(apriori_check({a, a}), TooFewSamples);
}

TEST(Apriori, DecreaseTolerance) {
    ConvergenceReport r;
    r.rows.resize(3);
    const double errs[3] = {1.0, 1.04, 0.5};
    for (int i = 0; i < 3; ++i) {
        r.rows[i].cell_avg_err_u = errs[i];
        r.rows[i].cell_avg_err_w = 1;
        r.rows[i].unfold_err_u = 1.0 / (i + 1);
        r.rows[i].unfold_err_w = i == 2 ? 1.2 : 1;
    }
    const auto d = r.decreasing();
    EXPECT_TRUE(d[0]);
    EXPECT_TRUE(d[1]);
    EXPECT_TRUE(d[2]);
    EXPECT_FALSE(d[3]);
}

TEST(Sweep, SmallRunIsConsistentAndThreadIndependent) {
    const Shared &s = setup();
    SweepSetup cfg;
    cfg.epsilons = {1.0 / 3, 1.0 / 2};
    cfg.f = smooth;
    cfg.g = torque;
    cfg.darcy_resolution = 6;
    const SweepResult a = run_sweep(*s.problem, s.sols, s.tensors, s.verdict, cfg);
    cfg.threads = 2;
    const SweepResult b = run_sweep(*s.problem, s.sols, s.tensors, s.verdict, cfg);
    EXPECT_EQ(sweep_csv(a.report), sweep_csv(b.report));
    ASSERT_EQ(a.solutions.size(), 2u);
    EXPECT_GT(a.solutions[0].epsilon, a.solutions[1].epsilon);
    for (size_t i = 0; i < 2; ++i) {
        EXPECT_DOUBLE_EQ(a.report.rows[i].cell_avg_err_u, a.tables[i].l2_u);
        EXPECT_DOUBLE_EQ(a.report.rows[i].unfold_err_w, a.unfolds[i].err_w);
    }
    const std::string csv = sweep_csv(a.report);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "epsilon,u_scaled_norm,Du_norm,w_norm,Dw_scaled_norm,p_scaled_norm,"
              "cell_avg_err_u,cell_avg_err_w,unfold_err_u,unfold_err_w");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    const auto j = nlohmann::json::parse(sweep_json(a.report));
    EXPECT_EQ(j["rows"].size(), 2u);
    EXPECT_TRUE(j.contains("bounded") && j.contains("decreasing"));
    cfg.darcy_resolution = 4; // not a multiple of 3
    EXPECT_THROW(run_sweep(*s.problem, s.sols, s.tensors, s.verdict, cfg), MeshMismatch);
}
