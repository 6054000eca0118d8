#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <microdarcy/mesh.hpp>

namespace microdarcy {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Edges of a tet mesh. Tet-local P2 node order: 4 vertices, then edges
// 01 02 03 12 13 23. Face-local order: 3 vertices, then edges 01 12 02.
struct P2Topology {
    std::vector<std::array<int, 2>> edges;
    std::vector<std::array<int, 6>> tet_edges;
    std::vector<std::array<int, 3>> face_edges;
    int n_vertices = 0;

    explicit P2Topology(const TetMesh &mesh);
    int n_nodes() const { return n_vertices + int(edges.size()); }
    int edge(int a, int b) const; // -1 if absent
};

constexpr int tet_edge_vertices[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
constexpr int face_edge_vertices[3][2] = {{0, 1}, {1, 2}, {0, 2}};

enum class Family { vectorP2, vectorP1, scalarP1, scalarP2 };

namespace constraint {
enum : unsigned {
    periodic = 1u,
    zero_exterior_trace = 2u,
    zero_normal_on_obstacle = 4u,
    zero_mean = 8u,
};
}

// Finite element space with constraints folded into the dof map. Raw values
// live on raw nodes (node * n_comp + c); a raw node value is
// sum_k frame(node).row(k)[c] * x[dof0(node) + k] for k < ndof(node).
class Space {
public:
    Space(const TetMesh &mesh, Family family, unsigned constraints,
          std::shared_ptr<const P2Topology> topology = nullptr);

    const TetMesh &mesh() const { return *mesh_; }
    const P2Topology &topology() const { return *topo_; }
    std::shared_ptr<const P2Topology> topology_ptr() const { return topo_; }
    Family family() const { return family_; }
    unsigned constraints() const { return constraints_; }
    bool has(unsigned c) const { return (constraints_ & c) != 0; }
    int order() const { return (family_ == Family::vectorP2 || family_ == Family::scalarP2) ? 2 : 1; }
    int n_comp() const { return (family_ == Family::vectorP2 || family_ == Family::vectorP1) ? 3 : 1; }
    int n_dofs() const { return n_dofs_; }
    int n_nodes() const { return int(dof0_.size()); }
    int nodes_per_tet() const { return order() == 2 ? 10 : 4; }
    int nodes_per_face() const { return order() == 2 ? 6 : 3; }

    int dof0(int node) const { return dof0_[node]; }
    int ndof(int node) const { return ndof_[node]; }
    int master(int node) const { return master_[node]; }
    // rows are the retained directions (Cartesian identity when unconstrained)
    const Mat3 &frame(int node) const;
    bool normal_constrained(int node) const { return frame_id_[node] >= 0; }
    // into-obstacle unit normal used for the constraint
    Vec3 constraint_normal(int node) const;

    void tet_nodes(int t, int *out) const;
    void face_nodes(int f, int *out) const;
    Vec3 node_position(int node) const;

    Vec expand(const Vec &x) const;          // dof vector -> raw nodal values
    Vec restrict_raw(const Vec &raw) const;  // transpose of expand
    // interpolate a raw nodal field into the space (least-squares per node in the frame)
    Vec interpolate(const Vec &raw) const;
    Vec interpolate(const std::function<Vec3(const Vec3 &)> &f) const;
    Vec interpolate_scalar(const std::function<double(const Vec3 &)> &f) const;
    SpMat prolongation() const;              // (n_nodes*n_comp) x n_dofs

    // integrals of the basis (scalar) or of each component (vector: column c)
    Eigen::MatrixXd basis_integrals() const;

private:
    const TetMesh *mesh_;
    std::shared_ptr<const P2Topology> topo_;
    Family family_;
    unsigned constraints_;
    int n_dofs_ = 0;
    std::vector<int> dof0_, master_, frame_id_;
    std::vector<std::uint8_t> ndof_;
    std::vector<Mat3> frames_;
    std::vector<Vec3> normals_;
};

Space build_space(const TetMesh &mesh, Family family, unsigned constraints,
                  std::shared_ptr<const P2Topology> topology = nullptr);

enum class FormKind {
    rot_rot,       // int rot(u).rot(phi)
    div_div,       // int div(u) div(phi)
    mass,          // int u.phi
    rot_coupling,  // int rot(phi).w   (phi test, w trial)
    surface_cross, // int_{dF} (w x nu).phi, nu the stored normal out of the fluid
    pressure_div,  // int p div(phi)  (p trial, phi test)
    grad_grad,     // int Du:Dphi
    surface_mass   // int_{dF} u.phi
};

enum class FaceSet { obstacle, all };

struct FormTerm {
    FormKind kind;
    double coefficient;
};

// sum of terms as one operator, rows = test dofs, cols = trial dofs
SpMat assemble(const std::vector<FormTerm> &terms, const Space &trial, const Space &test,
               FaceSet faces = FaceSet::obstacle);
SpMat assemble_form(FormKind kind, const Space &trial, const Space &test, double coefficient = 1.0,
                    FaceSet faces = FaceSet::obstacle);

// load vector int c.phi for a constant vector c (vector spaces) or int c phi (scalar)
Vec assemble_constant_load(const Space &test, const Vec3 &c);
Vec assemble_load(const Space &test, const std::function<Vec3(const Vec3 &)> &f);

void write_coo(const SpMat &a, const std::string &path);

// int rot(phi).psi - int rot(psi).phi + oint (phi x nu).psi over every boundary face
double ibp_residual(const Space &space, const Vec &phi, const Vec &psi);

// the same with the two operators assembled once
class IbpForm {
public:
    explicit IbpForm(const Space &space);
    double residual(const Vec &phi, const Vec &psi) const;

private:
    SpMat R_, S_;
};
// ||Dv||^2 / (||div v||^2 + ||rot v||^2)
double gaffney_ratio(const Space &space, const Vec &v);

} // namespace microdarcy
