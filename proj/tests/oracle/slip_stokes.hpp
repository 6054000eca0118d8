#pragma once

// Independent reference solver for the slip Stokes cell problem
//   int rot u.rot v + div u div v - int p div v = int e_i.v,  int q div u = 0
// with periodic u, p, u.n = 0 on the obstacle, zero mean p. Own P2 basis,
// own quadrature, normal condition by Lagrange multipliers, SparseLU.

#include <Eigen/Core>

#include <microdarcy/mesh.hpp>

namespace oracle {

// K(i,j) = int u^i_j over the fluid
Eigen::Matrix3d slip_stokes_permeability(const microdarcy::CellMesh &mesh);

} // namespace oracle
