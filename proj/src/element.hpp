#pragma once

// Lagrange basis on tets and triangles in barycentric coordinates.

#include <array>

#include <Eigen/Core>
#include <Eigen/LU>

#include <microdarcy/mesh.hpp>

namespace microdarcy::detail {

struct TetGeom {
    Eigen::Matrix<double, 4, 3> grad_lambda;
    double volume;
    Vec3 x0;
    Mat3 J; // columns x1-x0, x2-x0, x3-x0
};

inline TetGeom tet_geom(const TetMesh &mesh, int t) {
    const auto &T = mesh.tets[t];
    TetGeom g;
    g.x0 = mesh.vertices[T[0]];
    for (int i = 0; i < 3; ++i) g.J.col(i) = mesh.vertices[T[i + 1]] - g.x0;
    g.volume = g.J.determinant() / 6.0;
    Mat3 Jinv = g.J.inverse();
    g.grad_lambda.block<3, 3>(1, 0) = Jinv;
    g.grad_lambda.row(0) = -Jinv.colwise().sum();
    return g;
}

inline Vec3 tet_point(const TetGeom &g, const std::array<double, 4> &L) {
    return g.x0 + g.J * Eigen::Vector3d(L[1], L[2], L[3]);
}

// values of the order-1 or order-2 basis at barycentric L
template <int Order>
inline void tet_values(const std::array<double, 4> &L, double *N) {
    if constexpr (Order == 1) {
        for (int i = 0; i < 4; ++i) N[i] = L[i];
    } else {
        constexpr int ev[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        for (int i = 0; i < 4; ++i) N[i] = L[i] * (2 * L[i] - 1);
        for (int e = 0; e < 6; ++e) N[4 + e] = 4 * L[ev[e][0]] * L[ev[e][1]];
    }
}

// gradients (rows) of the basis at barycentric L
template <int Order>
inline void tet_grads(const TetGeom &g, const std::array<double, 4> &L, Eigen::Matrix<double, Order == 1 ? 4 : 10, 3> &G) {
    if constexpr (Order == 1) {
        G = g.grad_lambda;
    } else {
        constexpr int ev[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        for (int i = 0; i < 4; ++i) G.row(i) = (4 * L[i] - 1) * g.grad_lambda.row(i);
        for (int e = 0; e < 6; ++e) {
            int a = ev[e][0], b = ev[e][1];
            G.row(4 + e) = 4 * (L[a] * g.grad_lambda.row(b) + L[b] * g.grad_lambda.row(a));
        }
    }
}

inline void tri_values(int order, const std::array<double, 3> &M, double *N) {
    if (order == 1) {
        for (int i = 0; i < 3; ++i) N[i] = M[i];
    } else {
        constexpr int ev[3][2] = {{0, 1}, {1, 2}, {0, 2}};
        for (int i = 0; i < 3; ++i) N[i] = M[i] * (2 * M[i] - 1);
        for (int e = 0; e < 3; ++e) N[3 + e] = 4 * M[ev[e][0]] * M[ev[e][1]];
    }
}

// barycentric coordinates of x in tet geometry g
inline std::array<double, 4> barycentric(const TetGeom &g, const Vec3 &x) {
    Vec3 xi = g.J.partialPivLu().solve(x - g.x0);
    return {1 - xi.sum(), xi[0], xi[1], xi[2]};
}

} // namespace microdarcy::detail
