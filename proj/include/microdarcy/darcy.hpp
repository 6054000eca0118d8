#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <microdarcy/cell.hpp>
#include <microdarcy/femcore.hpp>

namespace microdarcy {

using VectorField = std::function<Vec3(const Vec3 &)>;

// Tensors enter with the cell convention K_ij = int u^{i}_j, so the limit
// velocity is u_j = sum_i K_ij (f - grad p)_i, i.e. u = K^T (f - grad p) + ...
struct DarcyTensors {
    Mat3 K1 = Mat3::Identity(), K2 = Mat3::Zero(), L1 = Mat3::Zero(), L2 = Mat3::Zero();

    static DarcyTensors from(const EffectiveTensors &t) { return {t.K1, t.K2, t.L1, t.L2}; }
    Vec3 u(const Vec3 &f_minus_grad_p, const Vec3 &g) const { return K1.transpose() * f_minus_grad_p + K2.transpose() * g; }
    Vec3 w(const Vec3 &f_minus_grad_p, const Vec3 &g) const { return L1.transpose() * f_minus_grad_p + L2.transpose() * g; }
};

struct DarcySolution {
    const TetMesh *mesh = nullptr;
    Vec p;                         // P1 nodal values, zero mean
    std::vector<Vec3> grad_p;      // per tet
    std::vector<Vec3> u, w;        // per tet, at the centroid
    double flux_residual = 0;      // max_q |int u . grad q|
    double residual_sum = 0;       // sum_q int u . grad q
    double mean_p = 0;
    DarcyTensors tensors;
    VectorField f, g;

    // index of the tet holding x (box meshes only), -1 outside
    int locate(const Vec3 &x) const;
    double pressure(const Vec3 &x) const;
    Vec3 velocity(const Vec3 &x) const;
    Vec3 microrotation(const Vec3 &x) const;
};

// P1 Neumann problem int K1^T grad p . grad q = int (K1^T f + K2^T g) . grad q
// on build_box_mesh output. throws IndefiniteTensor
DarcySolution solve_darcy(const DarcyTensors &tensors, const VectorField &f, const VectorField &g,
                          const TetMesh &box);

// per tet centroid values
std::pair<std::vector<Vec3>, std::vector<Vec3>> reconstruct_uw(const DarcyTensors &tensors, const TetMesh &mesh,
                                                               const Vec &p, const VectorField &f,
                                                               const VectorField &g);

double pressure_l2_error(const DarcySolution &s, const std::function<double(const Vec3 &)> &exact);
double velocity_l2_norm(const DarcySolution &s);

void write_darcy_vtk(const DarcySolution &s, const std::string &path);
std::string darcy_json(const DarcySolution &s);

} // namespace microdarcy
