#include <microdarcy/darcy.hpp>
#include <microdarcy/errors.hpp>
#include <microdarcy/quadrature.hpp>

#include "element.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/UmfPackSupport>
#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace microdarcy {

namespace {

using detail::TetGeom;
using ColMat = Eigen::SparseMatrix<double>;

Vec3 centroid(const TetMesh &m, int t) {
    const auto &T = m.tets[t];
    return 0.25 * (m.vertices[T[0]] + m.vertices[T[1]] + m.vertices[T[2]] + m.vertices[T[3]]);
}

Vec3 tet_gradient(const TetGeom &g, const TetMesh &m, int t, const Vec &p) {
    Vec3 d = Vec3::Zero();
    for (int a = 0; a < 4; ++a) d += p[m.tets[t][a]] * g.grad_lambda.row(a).transpose();
    return d;
}

} // namespace

int DarcySolution::locate(const Vec3 &x) const {
    const int n = mesh->lattice_size;
    if (n <= 0 || mesh->n_tets() != 6 * n * n * n) return -1;
    int c[3];
    for (int d = 0; d < 3; ++d) {
        if (x[d] < -1e-12 || x[d] > 1 + 1e-12) return -1;
        c[d] = std::clamp(int(std::floor(x[d] * n)), 0, n - 1);
    }
    const int cube = c[0] + n * (c[1] + n * c[2]);
    int best = -1;
    double best_min = -1e300;
    for (int t = 6 * cube; t < 6 * cube + 6; ++t) {
        auto L = detail::barycentric(detail::tet_geom(*mesh, t), x);
        const double lo = *std::min_element(L.begin(), L.end());
        if (lo > best_min) {
            best_min = lo;
            best = t;
        }
    }
    return best;
}

double DarcySolution::pressure(const Vec3 &x) const {
    const int t = locate(x);
    if (t < 0) throw MeshMismatch("point outside the Darcy mesh");
    auto L = detail::barycentric(detail::tet_geom(*mesh, t), x);
    double v = 0;
    for (int a = 0; a < 4; ++a) v += L[a] * p[mesh->tets[t][a]];
    return v;
}

Vec3 DarcySolution::velocity(const Vec3 &x) const {
    const int t = locate(x);
    if (t < 0) throw MeshMismatch("point outside the Darcy mesh");
    return tensors.u(f(x) - grad_p[t], g(x));
}

Vec3 DarcySolution::microrotation(const Vec3 &x) const {
    const int t = locate(x);
    if (t < 0) throw MeshMismatch("point outside the Darcy mesh");
    return tensors.w(f(x) - grad_p[t], g(x));
}

DarcySolution solve_darcy(const DarcyTensors &K, const VectorField &f, const VectorField &g, const TetMesh &box) {
    const Mat3 sym = 0.5 * (K.K1 + K.K1.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat3>(sym).eigenvalues()[0];
    if (!(lmin > 0)) throw IndefiniteTensor("symmetric part of K1 is not positive definite");
    const Mat3 Kt = K.K1.transpose();
    const int nv = box.n_vertices();
    const auto &rule = tet_rule();

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(size_t(box.n_tets()) * 24);
    Vec load = Vec::Zero(nv);
    Vec mean = Vec::Zero(nv);
    for (int t = 0; t < box.n_tets(); ++t) {
        const TetGeom G = detail::tet_geom(box, t);
        const auto &T = box.tets[t];
        // flux of the data, int (K1^T f + K2^T g) dx over the tet
        Vec3 h = Vec3::Zero();
        for (size_t q = 0; q < rule.weights.size(); ++q) {
            const Vec3 x = detail::tet_point(G, rule.points[q]);
            h += rule.weights[q] * (Kt * f(x) + K.K2.transpose() * g(x));
        }
        h *= G.volume;
        for (int a = 0; a < 4; ++a) {
            const Vec3 ga = G.grad_lambda.row(a).transpose();
            load[T[a]] += h.dot(ga);
            mean[T[a]] += G.volume / 4;
            for (int b = 0; b < 4; ++b)
                trip.emplace_back(T[a], T[b], G.volume * ga.dot(Kt * G.grad_lambda.row(b).transpose()));
        }
    }
    ColMat A(nv, nv);
    A.setFromTriplets(trip.begin(), trip.end());
    // border with the mean constraint
    for (int i = 0; i < nv; ++i) {
        trip.emplace_back(i, nv, mean[i]);
        trip.emplace_back(nv, i, mean[i]);
    }
    ColMat M(nv + 1, nv + 1);
    M.setFromTriplets(trip.begin(), trip.end());
    Eigen::UmfPackLU<ColMat> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success) throw SingularSystem("Darcy factorization failed");
    Vec b = Vec::Zero(nv + 1);
    b.head(nv) = load;
    Vec x = lu.solve(b);
    Vec r = b - M * x;
    x += lu.solve(r);

    DarcySolution s;
    s.mesh = &box;
    s.p = x.head(nv);
    s.tensors = K;
    s.f = f;
    s.g = g;
    s.mean_p = mean.dot(s.p) / mean.sum();
    const Vec res = load - A * s.p;
    s.flux_residual = res.cwiseAbs().maxCoeff();
    s.residual_sum = res.sum();
    s.grad_p.resize(box.n_tets());
    for (int t = 0; t < box.n_tets(); ++t) s.grad_p[t] = tet_gradient(detail::tet_geom(box, t), box, t, s.p);
    std::tie(s.u, s.w) = reconstruct_uw(K, box, s.p, f, g);
    return s;
}

std::pair<std::vector<Vec3>, std::vector<Vec3>> reconstruct_uw(const DarcyTensors &K, const TetMesh &mesh,
                                                               const Vec &p, const VectorField &f,
                                                               const VectorField &g) {
    if (p.size() != mesh.n_vertices()) throw MeshMismatch("pressure does not match the mesh");
    std::vector<Vec3> u(mesh.n_tets()), w(mesh.n_tets());
    for (int t = 0; t < mesh.n_tets(); ++t) {
        const Vec3 x = centroid(mesh, t);
        const Vec3 c = f(x) - tet_gradient(detail::tet_geom(mesh, t), mesh, t, p);
        const Vec3 gx = g(x);
        u[t] = K.u(c, gx);
        w[t] = K.w(c, gx);
    }
    return {u, w};
}

double pressure_l2_error(const DarcySolution &s, const std::function<double(const Vec3 &)> &exact) {
    const auto &rule = tet_rule();
    double e = 0;
    for (int t = 0; t < s.mesh->n_tets(); ++t) {
        const TetGeom G = detail::tet_geom(*s.mesh, t);
        const auto &T = s.mesh->tets[t];
        for (size_t q = 0; q < rule.weights.size(); ++q) {
            const auto &L = rule.points[q];
            double ph = 0;
            for (int a = 0; a < 4; ++a) ph += L[a] * s.p[T[a]];
            const double d = ph - exact(detail::tet_point(G, L));
            e += rule.weights[q] * G.volume * d * d;
        }
    }
    return std::sqrt(e);
}

double velocity_l2_norm(const DarcySolution &s) {
    const auto &rule = tet_rule();
    double e = 0;
    for (int t = 0; t < s.mesh->n_tets(); ++t) {
        const TetGeom G = detail::tet_geom(*s.mesh, t);
        for (size_t q = 0; q < rule.weights.size(); ++q) {
            const Vec3 x = detail::tet_point(G, rule.points[q]);
            e += rule.weights[q] * G.volume * s.tensors.u(s.f(x) - s.grad_p[t], s.g(x)).squaredNorm();
        }
    }
    return std::sqrt(e);
}

void write_darcy_vtk(const DarcySolution &s, const std::string &path) {
    std::vector<double> p(s.p.data(), s.p.data() + s.p.size());
    write_vtk(*s.mesh, path, {{"p", p}}, {}, {{"u", s.u}, {"w", s.w}});
}

std::string darcy_json(const DarcySolution &s) {
    nlohmann::ordered_json j;
    j["resolution"] = s.mesh->lattice_size;
    j["n_vertices"] = s.mesh->n_vertices();
    j["p_min"] = s.p.minCoeff();
    j["p_max"] = s.p.maxCoeff();
    j["p_mean"] = s.mean_p;
    j["flux_residual"] = s.flux_residual;
    j["residual_sum"] = s.residual_sum;
    j["u_l2"] = velocity_l2_norm(s);
    return j.dump(2);
}

} // namespace microdarcy
