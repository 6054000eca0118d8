#include <microdarcy/analysis.hpp>
#include <microdarcy/cell.hpp>
#include <microdarcy/errors.hpp>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <cmath>

namespace microdarcy {

void DimensionlessParams::validate() const {
    if (!(N2 > 0 && N2 < 1)) throw ConfigInvalid("N2 must lie in (0,1)");
    if (!(Rc > 0)) throw ConfigInvalid("Rc must be positive");
    if (!(alpha > 0)) throw ConfigInvalid("alpha must be positive");
    if (!(beta > 0)) throw ConfigInvalid("beta must be positive");
    if (!(epsilon > 0 && epsilon <= 1)) throw ConfigInvalid("epsilon must lie in (0,1]");
}

DimensionlessParams DimensionlessParams::gamma_zero(double N2, double Rc, double beta) {
    DimensionlessParams p;
    p.N2 = N2;
    p.Rc = Rc;
    p.beta = beta;
    p.alpha = 1.0 / (N2 * (1 + beta));
    return p;
}

MixedSpaces MixedSpaces::cell(const CellMesh &mesh) {
    auto topo = std::make_shared<const P2Topology>(mesh);
    using namespace constraint;
    return {topo, Space(mesh, Family::vectorP2, periodic | zero_normal_on_obstacle, topo),
            Space(mesh, Family::scalarP1, periodic | zero_mean, topo)};
}

MixedSpaces MixedSpaces::macro(const TetMesh &mesh) {
    auto topo = std::make_shared<const P2Topology>(mesh);
    using namespace constraint;
    return {topo, Space(mesh, Family::vectorP2, zero_exterior_trace | zero_normal_on_obstacle, topo),
            Space(mesh, Family::scalarP1, zero_mean, topo)};
}

SaddleSystem assemble_micropolar(const MixedSpaces &s, const DimensionlessParams &p, double R) {
    const Space &V = s.V;
    const double N2 = p.N2;
    // the paper's normal points into the fluid; surface_cross uses the opposite one
    const double cw = 2 * (1 / p.alpha - N2);
    const double cu = 2 * N2 * (p.beta - 1);
    SaddleSystem sys;
    // div u = 0 on the continuous velocity space, so the div-div term only
    // acts on the weakly divergence free discrete fields
    sys.A = assemble({{FormKind::rot_rot, 1}, {FormKind::div_div, 1}}, V, V);
    sys.C = assemble({{FormKind::rot_rot, R}, {FormKind::div_div, R}, {FormKind::mass, 4 * N2}}, V, V);
    sys.D = assemble({{FormKind::rot_coupling, -2 * N2}, {FormKind::surface_cross, -cw}}, V, V);
    sys.E = assemble({{FormKind::rot_coupling, -2 * N2}, {FormKind::surface_cross, -cu}}, V, V);
    SpMat Bt = assemble_form(FormKind::pressure_div, s.Q, V, -1.0);
    sys.B = Bt.transpose();
    sys.mean = s.Q.basis_integrals().col(0);
    return sys;
}

std::shared_ptr<const KrylovBlocks> krylov_blocks(const MixedSpaces &s, const DimensionlessParams &p, double R) {
    const Space &V = s.V;
    Space S(V.mesh(), Family::scalarP2, V.constraints() & ~constraint::zero_normal_on_obstacle, s.topology);
    std::vector<Eigen::Triplet<double>> t;
    for (int node = 0; node < V.n_nodes(); ++node) {
        if (V.master(node) != node || V.ndof(node) == 0) continue;
        if (S.ndof(node) != 1) throw IncompatibleConstraints("scalar companion space lost a node");
        const int sd = S.dof0(node);
        const Mat3 &f = V.frame(node);
        for (int k = 0; k < V.ndof(node); ++k)
            for (int c = 0; c < 3; ++c)
                if (f(k, c) != 0) t.emplace_back(3 * sd + c, V.dof0(node) + k, f(k, c));
    }
    auto kb = std::make_shared<KrylovBlocks>();
    kb->Tu.resize(3 * S.n_dofs(), V.n_dofs());
    kb->Tu.setFromTriplets(t.begin(), t.end());
    kb->Tw = kb->Tu;
    const double visc = 1 - p.N2;
    kb->Lu = assemble({{FormKind::grad_grad, 1}, {FormKind::mass, visc}}, S, S);
    kb->Lw = assemble({{FormKind::grad_grad, R}, {FormKind::mass, 4 * p.N2}}, S, S);
    SpMat Mp = assemble_form(FormKind::mass, s.Q, s.Q);
    const Vec lumped = Mp * Vec::Ones(Mp.cols());
    kb->p_diag = lumped / visc;
    kb->p_aug = visc * lumped.cwiseInverse();
    return kb;
}

double micropolar_form(const SaddleSystem &sys, const Vec &u, const Vec &w, const Vec &phi, const Vec &psi) {
    return phi.dot(sys.A * u + sys.D * w) + psi.dot(sys.E * u + sys.C * w);
}

CellProblem::CellProblem(const CellMesh &mesh, const DimensionlessParams &params)
    : mesh_(&mesh), params_(params), spaces_(MixedSpaces::cell(mesh)) {
    params_.validate();
    system_ = assemble_micropolar(spaces_, params_, params_.Rc);
    integrals_ = spaces_.V.basis_integrals();
}

std::vector<CellSolution> CellProblem::solve_all(const WellPosednessVerdict &verdict, const SolveOptions &opts) const {
    if (!verdict.satisfied) throw WellPosednessViolated("existence condition fails for these parameters");
    const int n = spaces_.V.n_dofs();
    SaddleSystem sys = system_;
    if (sys.size() > opts.direct_limit) sys.krylov = krylov_blocks(spaces_, params_, params_.Rc);
    sys.rhs = Eigen::MatrixXd::Zero(2 * n, 6);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 2; ++k) sys.rhs.col(2 * i + k).segment(k * n, n) = integrals_.col(i);
    SaddleSolution s = solve_saddle(sys, opts);
    std::vector<CellSolution> out(6);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 2; ++k) {
            auto &c = out[2 * i + k];
            c.i = i;
            c.k = k;
            c.u = s.u.col(2 * i + k);
            c.w = s.w.col(2 * i + k);
            c.pi = s.p.col(2 * i + k);
            c.residual = s.residual[2 * i + k];
        }
    return out;
}

CellSolution CellProblem::solve(int i, int k, const WellPosednessVerdict &verdict, const SolveOptions &opts) const {
    if (!verdict.satisfied) throw WellPosednessViolated("existence condition fails for these parameters");
    if (i < 0 || i > 2 || k < 0 || k > 1) throw ConfigInvalid("cell problem index out of range");
    const int n = spaces_.V.n_dofs();
    SaddleSystem sys = system_;
    if (sys.size() > opts.direct_limit) sys.krylov = krylov_blocks(spaces_, params_, params_.Rc);
    sys.rhs = Eigen::MatrixXd::Zero(2 * n, 1);
    sys.rhs.col(0).segment(k * n, n) = integrals_.col(i);
    SaddleSolution s = solve_saddle(sys, opts);
    CellSolution c;
    c.i = i;
    c.k = k;
    c.u = s.u.col(0);
    c.w = s.w.col(0);
    c.pi = s.p.col(0);
    c.residual = s.residual[0];
    return c;
}

double CellProblem::form(const CellSolution &trial, const CellSolution &test) const {
    return micropolar_form(system_, trial.u, trial.w, test.u, test.w);
}

double EffectiveTensors::asymmetry() const { return (K1 - K1.transpose()).norm() / K1.norm(); }

EffectiveTensors compute_effective_tensors(const CellProblem &problem, const std::vector<CellSolution> &solutions) {
    if (solutions.size() != 6) throw InconsistentSolutions("six cell solutions expected");
    const int n = problem.spaces().V.n_dofs();
    EffectiveTensors t;
    for (const auto &s : solutions) {
        if (s.u.size() != n || s.w.size() != n) throw InconsistentSolutions("solution does not match the cell space");
        Mat3 &K = s.k == 0 ? t.K1 : t.K2;
        Mat3 &L = s.k == 0 ? t.L1 : t.L2;
        for (int j = 0; j < 3; ++j) {
            K(s.i, j) = problem.integrals().col(j).dot(s.u);
            L(s.i, j) = problem.integrals().col(j).dot(s.w);
        }
        t.residuals[2 * s.i + s.k] = s.residual;
    }
    std::array<int, 6> seen{};
    for (const auto &s : solutions) seen[2 * s.i + s.k]++;
    for (int c : seen)
        if (c != 1) throw InconsistentSolutions("each (i,k) must appear once");
    t.porosity = problem.mesh().fluid_volume;
    t.params = problem.params();
    t.resolution = problem.mesh().resolution;
    t.radius = problem.mesh().obstacle.radius;
    if (!(t.K1.allFinite() && t.K2.allFinite() && t.L1.allFinite() && t.L2.allFinite()))
        throw InconsistentSolutions("non-finite tensor entries");
    return t;
}

Mat3 bilinear_identity_residual(const CellProblem &problem, const std::vector<CellSolution> &solutions,
                                const EffectiveTensors &tensors) {
    std::array<const CellSolution *, 3> s{};
    for (const auto &c : solutions)
        if (c.k == 0) s[c.i] = &c;
    for (auto *p : s)
        if (!p) throw InconsistentSolutions("k=1 solutions missing");
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = std::abs(tensors.K1(i, j) - problem.form(*s[j], *s[i]));
    return r;
}

TwoScaleSample two_scale_reconstruct(const std::vector<CellSolution> &solutions, const Vec3 &fp, const Vec3 &g) {
    TwoScaleSample out;
    for (const auto &s : solutions) {
        const double c = s.k == 0 ? fp[s.i] : g[s.i];
        if (out.u.size() == 0) {
            out.u = Vec::Zero(s.u.size());
            out.w = Vec::Zero(s.w.size());
            out.q = Vec::Zero(s.pi.size());
        }
        out.u += c * s.u;
        out.w += c * s.w;
        out.q += c * s.pi;
    }
    return out;
}

namespace {
nlohmann::json mat_json(const Mat3 &m) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) a.push_back({m(i, 0), m(i, 1), m(i, 2)});
    return a;
}
} // namespace

std::string tensors_json(const EffectiveTensors &t) {
    nlohmann::ordered_json j;
    j["K1"] = mat_json(t.K1);
    j["K2"] = mat_json(t.K2);
    j["L1"] = mat_json(t.L1);
    j["L2"] = mat_json(t.L2);
    j["porosity"] = t.porosity;
    j["params"] = {{"N2", t.params.N2}, {"Rc", t.params.Rc}, {"alpha", t.params.alpha},
                   {"beta", t.params.beta}, {"gamma", t.params.gamma()}};
    j["mesh"] = {{"resolution", t.resolution}, {"radius", t.radius}};
    j["residuals"] = t.residuals;
    j["K1_asymmetry"] = t.asymmetry();
    return j.dump(2);
}

} // namespace microdarcy
