#include <microdarcy/analysis.hpp>
#include <microdarcy/errors.hpp>

#include <Eigen/CholmodSupport>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <random>

namespace microdarcy {

DimensionlessParams nondimensionalize(double nu, double nu_r, double ca, double cd, double epsilon) {
    if (!(nu > 0 && nu_r > 0 && ca > 0 && cd > 0)) throw NonPositiveViscosity("viscosities must be positive");
    if (!(epsilon > 0 && epsilon <= 1)) throw ConfigInvalid("epsilon must lie in (0,1]");
    DimensionlessParams p;
    p.N2 = nu_r / (nu + nu_r);
    p.Rc = micro_number(nu, nu_r, ca, cd) / (epsilon * epsilon);
    p.epsilon = epsilon;
    return p;
}

double micro_number(double nu, double nu_r, double ca, double cd) {
    if (!(nu > 0 && nu_r > 0 && ca > 0 && cd > 0)) throw NonPositiveViscosity("viscosities must be positive");
    return (ca + cd) / (nu + nu_r);
}

namespace {

using ColMat = Eigen::SparseMatrix<double>;
using Cholmod = Eigen::CholmodSupernodalLLT<ColMat>;

struct Pencil {
    std::function<Vec(const Vec &)> X;       // numerator operator
    std::function<Vec(const Vec &)> Y;       // SPD inner product
    std::function<Vec(const Vec &)> Y_solve; // Y^-1
    Eigen::Index n = 0;
};

struct Ritz {
    double value = 0;
    double residual = 0; // relative
};

// Lanczos on Y^-1 X in the Y inner product with full reorthogonalization.
// deflate: Y-orthonormal vectors excluded from the search space.
Ritz lanczos(const Pencil &P, bool largest, double tol, int max_iter, std::uint64_t seed,
             const std::vector<Vec> &deflate = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vec q(P.n);
    for (auto &x : q) x = nd(rng);
    std::vector<Vec> Q, YQ;
    std::vector<Vec> D = deflate, YD;
    for (const auto &d : D) YD.push_back(P.Y(d));
    auto orth = [&](Vec &w) {
        for (int pass = 0; pass < 2; ++pass) {
            for (size_t i = 0; i < D.size(); ++i) w -= YD[i].dot(w) * D[i];
            for (size_t i = 0; i < Q.size(); ++i) w -= YQ[i].dot(w) * Q[i];
        }
    };
    orth(q);
    Vec yq = P.Y(q);
    double nq = std::sqrt(q.dot(yq));
    q /= nq;
    yq /= nq;
    std::vector<double> alpha, beta;
    Ritz best;
    const int m = int(std::min<Eigen::Index>(max_iter, P.n - Eigen::Index(D.size())));
    for (int j = 0; j < m; ++j) {
        Q.push_back(q);
        YQ.push_back(yq);
        Vec xq = P.X(q);
        alpha.push_back(q.dot(xq));
        Vec w = P.Y_solve(xq);
        orth(w);
        Vec yw = P.Y(w);
        const double b = std::sqrt(std::max(0.0, w.dot(yw)));
        const int k = j + 1;
        if (k % 5 == 0 || k == m || b == 0) {
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
            for (int i = 0; i < k; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
            const int idx = largest ? k - 1 : 0;
            best.value = es.eigenvalues()[idx];
            best.residual = std::abs(b * es.eigenvectors()(k - 1, idx)) / std::max(std::abs(best.value), 1e-300);
            if (best.residual <= tol || b == 0) return best;
        }
        beta.push_back(b);
        q = w / b;
        yq = yw / b;
    }
    if (!(best.residual <= tol))
        throw EigSolverFailure("Lanczos did not converge (relative residual " + std::to_string(best.residual) + ")");
    return best;
}

Pencil pencil(const SpMat &X, const SpMat &Y, const Cholmod &chol) {
    Pencil p;
    p.n = X.rows();
    p.X = [&X](const Vec &v) { return Vec(X * v); };
    p.Y = [&Y](const Vec &v) { return Vec(Y * v); };
    p.Y_solve = [&chol](const Vec &v) { return Vec(chol.solve(v)); };
    return p;
}

void factor(Cholmod &c, const SpMat &M) {
    ColMat m = M;
    c.compute(m);
    if (c.info() != Eigen::Success) throw EigSolverFailure("Cholesky factorization of a norm matrix failed");
}

double pencil_max(const SpMat &X, const SpMat &Y, double tol, std::uint64_t seed) {
    Cholmod c;
    factor(c, Y);
    return lanczos(pencil(X, Y, c), true, tol, 400, seed).value;
}

} // namespace

InfSupResult discrete_infsup(const Space &velocity, const Space &pressure, double tolerance) {
    const SpMat S = assemble_form(FormKind::grad_grad, velocity, velocity);
    const SpMat Bt = assemble_form(FormKind::pressure_div, pressure, velocity);
    const SpMat Mp = assemble_form(FormKind::mass, pressure, pressure);
    Cholmod cs, cm;
    factor(cs, S);
    factor(cm, Mp);
    Pencil p;
    p.n = Mp.rows();
    p.X = [&](const Vec &q) { return Vec(Bt.transpose() * Vec(cs.solve(Vec(Bt * q)))); };
    p.Y = [&](const Vec &q) { return Vec(Mp * q); };
    p.Y_solve = [&](const Vec &q) { return Vec(cm.solve(q)); };
    // constants are in the kernel (zero-mean pressures only)
    Vec one = Vec::Ones(p.n);
    one /= std::sqrt(one.dot(Mp * one));
    Ritz r = lanczos(p, false, tolerance, 1500, 7, {one});
    InfSupResult out;
    out.delta = std::sqrt(std::max(0.0, r.value));
    out.residual = r.residual;
    if (out.delta < 1e-10) throw DegenerateMesh("discrete inf-sup constant vanishes");
    return out;
}

ConstantsReport estimate_constants(const Space &V, const ConstantsOptions &opts) {
    if (V.n_comp() != 3 || !V.has(constraint::zero_normal_on_obstacle))
        throw IncompatibleConstraints("constants need the constrained vector space");
    const SpMat S = assemble_form(FormKind::grad_grad, V, V);
    const SpMat M = assemble_form(FormKind::mass, V, V);
    const SpMat Mb = assemble_form(FormKind::surface_mass, V, V);
    const SpMat G = assemble({{FormKind::rot_rot, 1}, {FormKind::div_div, 1}}, V, V);
    const SpMat MS = M + S;
    ConstantsReport c;
    c.Cp = std::sqrt(pencil_max(M, S, opts.tolerance, opts.seed));
    c.Ct = std::sqrt(pencil_max(Mb, MS, opts.tolerance, opts.seed + 1));
    c.Cpt = pencil_max(Mb, S, opts.tolerance, opts.seed + 2);
    c.Cg = pencil_max(S, G, opts.tolerance, opts.seed + 3);
    c.K = c.Cpt * c.Cg;
    c.Cpt_composed = c.Ct * c.Ct * std::pow(c.Cp * c.Cp + 1, 2);
    c.mesh_fingerprint = mesh_fingerprint(V.mesh());
    c.resolution = V.mesh().lattice_size;
    if (opts.infsup) {
        Space Q(V.mesh(), Family::scalarP1, (V.constraints() & constraint::periodic) | constraint::zero_mean,
                V.topology_ptr());
        c.delta_infsup = discrete_infsup(V, Q).delta;
    }
    for (double x : {c.Cp, c.Ct, c.Cpt, c.Cg})
        if (!(x > 0 && std::isfinite(x))) throw EigSolverFailure("non-positive constant estimate");
    return c;
}

WellPosednessVerdict check_wellposedness(const DimensionlessParams &p, const ConstantsReport &k, double sf) {
    if (!(sf >= 1)) throw ConfigInvalid("safety factor must be at least 1");
    WellPosednessVerdict v;
    v.gamma = p.gamma();
    v.K = k.Cpt * k.Cg;
    v.safety_factor = sf;
    v.bound = p.Rc * (1 - p.N2) / std::pow(sf * v.K, 2);
    v.margin = v.bound - v.gamma * v.gamma;
    v.satisfied = v.gamma * v.gamma < v.bound;
    const double g = std::abs(v.gamma);
    if (g == 0) {
        v.c1 = 1; // multiplies |gamma| only
    } else {
        const double lo = g * k.Cpt * k.Cg * k.Cg / p.Rc;
        const double hi = (1 - p.N2) / (g * k.Cpt);
        v.c1 = std::sqrt(lo * hi);
    }
    v.c2 = 0.5 * std::min(1.0, 1.0 / (3 * k.Cg));
    v.A = (1 - p.N2 / v.c2 - g * k.Cpt * v.c1) / k.Cg;
    v.B = (p.Rc - g * k.Cpt / v.c1 * k.Cg * k.Cg) / k.Cg;
    v.coercivity_certified = v.A > 0 && v.B > 0;
    return v;
}

std::uint64_t mesh_fingerprint(const TetMesh &mesh) {
    // FNV-1a over coordinates and connectivity
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void *p, size_t n) {
        const auto *b = static_cast<const unsigned char *>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto &v : mesh.vertices) mix(v.data(), 3 * sizeof(double));
    for (const auto &t : mesh.tets) mix(t.data(), sizeof(t));
    return h;
}

std::string constants_json(const ConstantsReport &c) {
    nlohmann::ordered_json j;
    j["Cp"] = c.Cp;
    j["Ct"] = c.Ct;
    j["Cpt"] = c.Cpt;
    j["Cg"] = c.Cg;
    j["K"] = c.K;
    j["delta_infsup"] = c.delta_infsup;
    j["Cpt_composed"] = c.Cpt_composed;
    j["resolution"] = c.resolution;
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(c.mesh_fingerprint));
    j["mesh_fingerprint"] = buf;
    return j.dump(2);
}

std::string verdict_json(const WellPosednessVerdict &v, const DimensionlessParams &p) {
    nlohmann::ordered_json j;
    j["params"] = {{"N2", p.N2}, {"Rc", p.Rc}, {"alpha", p.alpha}, {"beta", p.beta}};
    j["gamma"] = v.gamma;
    j["K"] = v.K;
    j["safety_factor"] = v.safety_factor;
    j["bound"] = v.bound;
    j["margin"] = v.margin;
    j["satisfied"] = v.satisfied;
    j["c1"] = v.c1;
    j["c2"] = v.c2;
    j["A"] = v.A;
    j["B"] = v.B;
    j["coercivity_certified"] = v.coercivity_certified;
    return j.dump(2);
}

} // namespace microdarcy
