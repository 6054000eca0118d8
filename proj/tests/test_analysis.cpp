#include <gtest/gtest.h>

#include <microdarcy/analysis.hpp>
#include <microdarcy/cell.hpp>
#include <microdarcy/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fields.hpp"

using namespace microdarcy;

namespace {

const unsigned cell_v = constraint::periodic | constraint::zero_normal_on_obstacle;

struct Cell {
    CellMesh mesh;
    MixedSpaces sp;
    ConstantsReport c;
    explicit Cell(int res) : mesh(build_unit_cell_mesh(res, ObstacleSpec{})), sp(MixedSpaces::cell(mesh)) {
        c = estimate_constants(sp.V);
    }
};

const Cell &cell6() {
    static const Cell c(6);
    return c;
}

ConstantsReport fake(double Cpt, double Cg) {
    ConstantsReport c;
    c.Cpt = Cpt;
    c.Cg = Cg;
    c.K = Cpt * Cg;
    return c;
}

// same mesh with vertices numbered in reverse
CellMesh reversed(const CellMesh &m) {
    CellMesh r = m;
    const int n = m.n_vertices();
    auto id = [n](int v) { return n - 1 - v; };
    for (int v = 0; v < n; ++v) {
        r.vertices[id(v)] = m.vertices[v];
        r.lattice[id(v)] = m.lattice[v];
        r.on_obstacle[id(v)] = m.on_obstacle[v];
        if (!m.periodic_master.empty()) r.periodic_master[id(v)] = id(m.periodic_master[v]);
    }
    for (auto &t : r.tets) {
        for (int &v : t) v = id(v);
        std::swap(t[0], t[1]); // keep the orientation after relabelling
    }
    for (size_t t = 0; t < r.tets.size(); ++t)
        if (r.tet_volume(int(t)) < 0) std::swap(r.tets[t][0], r.tets[t][1]);
    for (auto &f : r.faces)
        for (int &v : f.v) v = id(v);
    return r;
}

} // namespace

TEST(Nondimensionalize, Examples) {
    const DimensionlessParams p = nondimensionalize(1, 1, 0.125, 0.125, 0.5);
    EXPECT_DOUBLE_EQ(p.N2, 0.5);
    EXPECT_DOUBLE_EQ(micro_number(1, 1, 0.125, 0.125), 0.125);
    EXPECT_DOUBLE_EQ(p.Rc, 0.5);
    EXPECT_DOUBLE_EQ(nondimensionalize(3, 1, 1, 1, 1).N2, 0.25);
    EXPECT_LT(nondimensionalize(1, 1e-12, 1, 1, 1).N2, 1e-11);
    EXPECT_THROW(nondimensionalize(0, 1, 1, 1, 1), NonPositiveViscosity);
    EXPECT_THROW(nondimensionalize(1, 1, -1, 1, 1), NonPositiveViscosity);
    EXPECT_THROW(micro_number(1, 1, 1, 0), NonPositiveViscosity);
}

TEST(Verdict, ArithmeticExample) {
    DimensionlessParams p;
    p.N2 = 0.5;
    p.Rc = 1;
    p.beta = 1;
    p.alpha = 0.5; // gamma = 2 - 0.5 - 0.5 = 1
    const WellPosednessVerdict v = check_wellposedness(p, fake(2, 1), 1.0);
    EXPECT_DOUBLE_EQ(v.gamma, 1);
    EXPECT_DOUBLE_EQ(v.bound, 0.125);
    EXPECT_FALSE(v.satisfied);
    EXPECT_DOUBLE_EQ(v.margin, 0.125 - 1);
    // the default safety factor tightens the bound
    EXPECT_DOUBLE_EQ(check_wellposedness(p, fake(2, 1)).bound, 0.125 / (1.25 * 1.25));
}

TEST(Verdict, GammaZeroAlwaysSatisfied) {
    for (double N2 : {0.01, 0.5, 0.99})
        for (double Rc : {1e-3, 1.0, 1e3}) {
            const auto p = DimensionlessParams::gamma_zero(N2, Rc);
            EXPECT_NEAR(p.gamma(), 0, 1e-15);
            const WellPosednessVerdict v = check_wellposedness(p, fake(0.3, 50));
            EXPECT_TRUE(v.satisfied);
            EXPECT_DOUBLE_EQ(v.margin, v.bound);
        }
}

TEST(Verdict, MarginDecreasesWithGamma) {
    DimensionlessParams p;
    p.N2 = 0.2;
    p.beta = 1;
    double last = std::numeric_limits<double>::infinity();
    int flips = 0;
    bool prev = true;
    for (double g = 0; g < 1; g += 0.01) {
        p.alpha = 1 / (g + p.N2 * (1 + p.beta));
        const WellPosednessVerdict v = check_wellposedness(p, fake(0.5, 4));
        EXPECT_LT(v.margin, last);
        last = v.margin;
        EXPECT_FALSE(v.satisfied && !prev);
        flips += v.satisfied != prev;
        prev = v.satisfied;
    }
    EXPECT_EQ(flips, 1);
}

TEST(Verdict, RejectsSafetyBelowOne) {
    EXPECT_THROW(check_wellposedness(DimensionlessParams{}, fake(1, 1), 0.9), ConfigInvalid);
}

TEST(Verdict, CoefficientsFollowTheirIntervals) {
    DimensionlessParams p;
    p.N2 = 0.01;
    p.Rc = 100;
    p.beta = 1;
    p.alpha = 1 / (0.001 + 0.02);
    const ConstantsReport c = fake(0.5, 2);
    const WellPosednessVerdict v = check_wellposedness(p, c, 1.0);
    ASSERT_TRUE(v.satisfied);
    const double g = std::abs(v.gamma);
    const double lo = g * c.Cpt * c.Cg * c.Cg / p.Rc, hi = (1 - p.N2) / (g * c.Cpt);
    EXPECT_GT(v.c1, lo);
    EXPECT_LT(v.c1, hi);
    EXPECT_NEAR(v.c1, std::sqrt(lo * hi), 1e-12 * v.c1);
    EXPECT_DOUBLE_EQ(v.c2, 0.5 / 6);
    EXPECT_TRUE(v.coercivity_certified);
}

TEST(Constants, InequalitiesHoldForRandomFields) {
    const Cell &c = cell6();
    const Space &V = c.sp.V;
    const SpMat S = assemble_form(FormKind::grad_grad, V, V);
    const SpMat M = assemble_form(FormKind::mass, V, V);
    const SpMat Mb = assemble_form(FormKind::surface_mass, V, V);
    const double slack = 1 + 1e-6;
    for (int k = 0; k < 100; ++k) {
        const Vec v = support::random_vector(V.n_dofs(), 500 + k);
        const double m = v.dot(M * v), s = v.dot(S * v), b = v.dot(Mb * v);
        EXPECT_LE(std::sqrt(m), c.c.Cp * std::sqrt(s) * slack);
        EXPECT_LE(std::sqrt(b), c.c.Ct * std::sqrt(m + s) * slack);
        EXPECT_LE(b, c.c.Cpt * s * slack);
        EXPECT_LE(gaffney_ratio(V, v), c.c.Cg * slack);
    }
    EXPECT_LE(c.c.Cpt, c.c.Cpt_composed * slack);
    EXPECT_DOUBLE_EQ(c.c.K, c.c.Cpt * c.c.Cg);
}

TEST(Constants, InfSupPositive) {
    EXPECT_GT(cell6().c.delta_infsup, 0.1);
}

TEST(Constants, EqualOrderPairCollapses) {
    CellMesh m = build_unit_cell_mesh(4, ObstacleSpec{});
    const MixedSpaces sp = MixedSpaces::cell(m);
    const double th = discrete_infsup(sp.V, sp.Q).delta;
    Space Q2(m, Family::scalarP2, constraint::periodic | constraint::zero_mean, sp.topology);
    try {
        EXPECT_LT(discrete_infsup(sp.V, Q2).delta, 1e-3 * th);
    } catch (const DegenerateMesh &) {
        SUCCEED();
    }
}

TEST(Constants, PoincareStableUnderRefinement) {
    const Cell c8(8);
    EXPECT_LE(std::abs(c8.c.Cp - cell6().c.Cp), 0.05 * c8.c.Cp);
    EXPECT_GE(c8.c.delta_infsup / cell6().c.delta_infsup, 0.5);
}

TEST(Constants, DeterministicAndRelabelInvariant) {
    const Cell &c = cell6();
    const ConstantsReport again = estimate_constants(c.sp.V);
    EXPECT_EQ(again.Cp, c.c.Cp);
    EXPECT_EQ(again.Cg, c.c.Cg);
    EXPECT_EQ(again.mesh_fingerprint, c.c.mesh_fingerprint);
    const CellMesh r = reversed(c.mesh);
    const MixedSpaces sp = MixedSpaces::cell(r);
    const ConstantsReport rc = estimate_constants(sp.V);
    EXPECT_NEAR(rc.Cp, c.c.Cp, 1e-5 * c.c.Cp);
    EXPECT_NEAR(rc.Ct, c.c.Ct, 1e-5 * c.c.Ct);
    EXPECT_NEAR(rc.Cpt, c.c.Cpt, 1e-5 * c.c.Cpt);
    EXPECT_NEAR(rc.Cg, c.c.Cg, 1e-5 * c.c.Cg);
    EXPECT_NEAR(rc.delta_infsup, c.c.delta_infsup, 1e-5 * c.c.delta_infsup);
    EXPECT_NE(rc.mesh_fingerprint, c.c.mesh_fingerprint);
}

TEST(Constants, NeedsConstrainedVectorSpace) {
    Space V(cell6().mesh, Family::vectorP2, constraint::periodic);
    EXPECT_THROW(estimate_constants(V), IncompatibleConstraints);
}

TEST(Constants, Json) {
    const auto j = nlohmann::json::parse(constants_json(cell6().c));
    for (const char *k : {"Cp", "Ct", "Cpt", "Cg", "K", "delta_infsup", "Cpt_composed", "resolution", "mesh_fingerprint"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["resolution"], 6);
}

TEST(Coercivity, CertifiedParametersGiveNonNegativeDefect) {
    const Cell &c = cell6();
    const auto p = DimensionlessParams::gamma_zero(0.005, 1.0);
    const WellPosednessVerdict v = check_wellposedness(p, c.c);
    ASSERT_TRUE(v.coercivity_certified) << v.A << " " << v.B;
    CellProblem problem(c.mesh, p);
    for (const auto &s : support::coercivity_samples(problem, 20, 77))
        EXPECT_GE(s.defect(v.A, v.B), -1e-8 * (s.Dphi2 + s.Dpsi2));
}

TEST(Coercivity, AdmissibleFieldsAreDivergenceFree) {
    const Cell &c = cell6();
    const Vec u = support::divergence_free(c.sp, 3);
    const SpMat B = SpMat(assemble_form(FormKind::pressure_div, c.sp.Q, c.sp.V).transpose());
    EXPECT_LE(Vec(B * u).cwiseAbs().maxCoeff(), 1e-10 * u.norm());
    EXPECT_GT(u.norm(), 0);
}
