#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace microdarcy {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class FaceTag : std::uint8_t {
    periodic_x_minus,
    periodic_x_plus,
    periodic_y_minus,
    periodic_y_plus,
    periodic_z_minus,
    periodic_z_plus,
    obstacle,
    exterior
};

const char *to_string(FaceTag tag);

enum class ObstacleShape { sphere };

struct ObstacleSpec {
    ObstacleShape shape = ObstacleShape::sphere;
    Vec3 center = Vec3::Constant(0.5);
    double radius = 0.25;

    // throws ObstacleTouchesBoundary
    void validate() const;
};

struct BoundaryFace {
    // ordered so that (v1-v0)x(v2-v0) points out of the fluid
    std::array<int, 3> v;
    FaceTag tag;
    int tet;
    int obstacle = -1;  // index into TetMesh::obstacle_centers, -1 otherwise
    Vec3 normal;        // unit, out of the fluid (into F on the obstacle)
    double area;
};

// Tetrahedral mesh on an integer lattice. Every vertex remembers the lattice
// point it came from; snapped vertices keep it even though they moved.
struct TetMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> lattice;
    std::vector<std::array<int, 4>> tets;
    std::vector<BoundaryFace> faces;
    std::vector<Vec3> obstacle_centers;
    double obstacle_radius = 0;
    std::vector<std::uint8_t> on_obstacle; // per vertex
    std::vector<int> periodic_master;      // per vertex canonical periodic image, empty if not periodic
    int lattice_size = 0;                  // lattice points per axis minus one
    double h = 0;                          // lattice spacing
    double fluid_volume = 0;

    int n_vertices() const { return int(vertices.size()); }
    int n_tets() const { return int(tets.size()); }
    double tet_volume(int t) const;
    double h_max() const;
    // exact sphere normal at an obstacle vertex, pointing into the obstacle
    Vec3 sphere_normal(int vertex, int obstacle) const;
    std::vector<int> faces_with_tag(FaceTag tag) const;
};

struct CellMesh : TetMesh {
    int resolution = 0;
    ObstacleSpec obstacle;
    std::vector<int> periodic_partner; // per face, -1 for non periodic faces
};

struct MacroMesh : TetMesh {
    double epsilon = 1;
    int cells_per_axis = 1;
    int per_cell_resolution = 0;
    ObstacleSpec obstacle;
    int tets_per_cell = 0;             // tets of cell c are [c*tets_per_cell, (c+1)*tets_per_cell)
    std::vector<int> cell_vertex_map;  // [c*nv_cell + local vertex] -> macro vertex
    int cell_vertices = 0;
    std::vector<int> cell_face_of;     // per obstacle/exterior face: originating cell face

    std::array<int, 3> cell_index(int c) const;
    Vec3 cell_origin(int c) const;
    int n_cells() const { return cells_per_axis * cells_per_axis * cells_per_axis; }
};

CellMesh build_unit_cell_mesh(int resolution, const ObstacleSpec &obstacle);
MacroMesh build_macro_mesh(double epsilon, int per_cell_resolution, const ObstacleSpec &obstacle);
MacroMesh build_macro_mesh(const CellMesh &cell, double epsilon);
// unperforated unit cube, all boundary faces tagged exterior
TetMesh build_box_mesh(int resolution);

double fluid_volume(const TetMesh &mesh);

void write_vtk(const TetMesh &mesh, const std::string &path,
               const std::vector<std::pair<std::string, std::vector<double>>> &point_scalars = {},
               const std::vector<std::pair<std::string, std::vector<Vec3>>> &point_vectors = {},
               const std::vector<std::pair<std::string, std::vector<Vec3>>> &cell_vectors = {});

} // namespace microdarcy
