#include <microdarcy/errors.hpp>
#include <microdarcy/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <unordered_map>

namespace microdarcy {

const char *to_string(FaceTag tag) {
    switch (tag) {
    case FaceTag::periodic_x_minus: return "periodic_x-";
    case FaceTag::periodic_x_plus: return "periodic_x+";
    case FaceTag::periodic_y_minus: return "periodic_y-";
    case FaceTag::periodic_y_plus: return "periodic_y+";
    case FaceTag::periodic_z_minus: return "periodic_z-";
    case FaceTag::periodic_z_plus: return "periodic_z+";
    case FaceTag::obstacle: return "obstacle";
    case FaceTag::exterior: return "exterior";
    }
    return "?";
}

void ObstacleSpec::validate() const {
    if (!(radius > 0)) throw ObstacleTouchesBoundary("radius must be positive");
    for (int d = 0; d < 3; ++d)
        if (!(center[d] - radius > 0 && center[d] + radius < 1))
            throw ObstacleTouchesBoundary("closed obstacle must lie inside the open unit cell");
}

double TetMesh::tet_volume(int t) const {
    const auto &T = tets[t];
    const Vec3 &a = vertices[T[0]];
    return (vertices[T[1]] - a).cross(vertices[T[2]] - a).dot(vertices[T[3]] - a) / 6.0;
}

double TetMesh::h_max() const {
    double hm = 0;
    for (const auto &T : tets)
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                hm = std::max(hm, (vertices[T[i]] - vertices[T[j]]).norm());
    return hm;
}

Vec3 TetMesh::sphere_normal(int vertex, int obstacle) const {
    return (obstacle_centers[obstacle] - vertices[vertex]).normalized();
}

std::vector<int> TetMesh::faces_with_tag(FaceTag tag) const {
    std::vector<int> out;
    for (int f = 0; f < int(faces.size()); ++f)
        if (faces[f].tag == tag) out.push_back(f);
    return out;
}

std::array<int, 3> MacroMesh::cell_index(int c) const {
    int m = cells_per_axis;
    return {c % m, (c / m) % m, c / (m * m)};
}

Vec3 MacroMesh::cell_origin(int c) const {
    auto k = cell_index(c);
    return epsilon * Vec3(k[0], k[1], k[2]);
}

double fluid_volume(const TetMesh &mesh) {
    double v = 0;
    for (int t = 0; t < mesh.n_tets(); ++t) v += mesh.tet_volume(t);
    return v;
}

namespace {

using Face = std::array<int, 3>;

struct FaceHash {
    size_t operator()(const Face &f) const {
        size_t h = size_t(f[0]);
        h = h * 1000003u ^ size_t(f[1]);
        h = h * 1000003u ^ size_t(f[2]);
        return h;
    }
};

Face sorted_face(int a, int b, int c) {
    Face f{a, b, c};
    std::sort(f.begin(), f.end());
    return f;
}

// local vertices of tet t opposite to vertex i
constexpr int face_of_tet[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

// Structured lattice with the mirrored 6-tet cube split. Vertex (i,j,k) has
// index i + (n+1)(j + (n+1)k).
void kuhn_grid(int n, std::vector<Vec3> &V, std::vector<std::array<int, 3>> &L,
               std::vector<std::array<int, 4>> &T) {
    const double h = 1.0 / n;
    const int np = n + 1;
    V.clear(); L.clear(); T.clear();
    for (int k = 0; k <= n; ++k)
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) {
                V.emplace_back(i * h, j * h, k * h);
                L.push_back({i, j, k});
            }
    auto id = [np](int i, int j, int k) { return i + np * (j + np * k); };
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const int c[3] = {i, j, k};
                for (const auto &p : perms) {
                    int o[3] = {0, 0, 0};
                    std::array<int, 4> tet;
                    for (int s = 0; s < 4; ++s) {
                        if (s > 0) o[p[s - 1]] = 1;
                        int g[3];
                        for (int d = 0; d < 3; ++d) g[d] = c[d] + ((c[d] & 1) ? 1 - o[d] : o[d]);
                        tet[s] = id(g[0], g[1], g[2]);
                    }
                    T.push_back(tet);
                }
            }
    for (auto &t : T) {
        const Vec3 &a = V[t[0]];
        if ((V[t[1]] - a).cross(V[t[2]] - a).dot(V[t[3]] - a) < 0) std::swap(t[0], t[1]);
    }
}

double signed_volume(const std::vector<Vec3> &V, const std::array<int, 4> &t) {
    const Vec3 &a = V[t[0]];
    return (V[t[1]] - a).cross(V[t[2]] - a).dot(V[t[3]] - a) / 6.0;
}

void finish_faces(TetMesh &mesh) {
    for (auto &f : mesh.faces) {
        const Vec3 &a = mesh.vertices[f.v[0]];
        Vec3 cr = (mesh.vertices[f.v[1]] - a).cross(mesh.vertices[f.v[2]] - a);
        f.area = 0.5 * cr.norm();
        f.normal = cr.normalized();
    }
}

// Boundary faces of the tet set, oriented out of the tets.
std::vector<BoundaryFace> boundary_faces(const std::vector<Vec3> &V,
                                         const std::vector<std::array<int, 4>> &T) {
    std::unordered_map<Face, std::pair<int, int>, FaceHash> seen; // -> (tet, local face), count via tet=-1
    std::vector<std::pair<int, int>> order;
    for (int t = 0; t < int(T.size()); ++t)
        for (int i = 0; i < 4; ++i) {
            Face f = sorted_face(T[t][face_of_tet[i][0]], T[t][face_of_tet[i][1]], T[t][face_of_tet[i][2]]);
            auto it = seen.find(f);
            if (it == seen.end()) {
                seen.emplace(f, std::make_pair(t, i));
            } else {
                it->second.first = -1;
            }
        }
    for (int t = 0; t < int(T.size()); ++t)
        for (int i = 0; i < 4; ++i) {
            Face f = sorted_face(T[t][face_of_tet[i][0]], T[t][face_of_tet[i][1]], T[t][face_of_tet[i][2]]);
            auto it = seen.find(f);
            if (it->second.first == t && it->second.second == i) order.emplace_back(t, i);
        }
    std::vector<BoundaryFace> out;
    out.reserve(order.size());
    for (auto [t, i] : order) {
        BoundaryFace bf;
        bf.v = {T[t][face_of_tet[i][0]], T[t][face_of_tet[i][1]], T[t][face_of_tet[i][2]]};
        const Vec3 &a = V[bf.v[0]];
        Vec3 nrm = (V[bf.v[1]] - a).cross(V[bf.v[2]] - a);
        if (nrm.dot(V[T[t][i]] - a) > 0) std::swap(bf.v[1], bf.v[2]);
        bf.tet = t;
        bf.tag = FaceTag::exterior;
        out.push_back(bf);
    }
    return out;
}

// Drop unused vertices and renumber.
void compact(TetMesh &mesh, std::vector<std::uint8_t> &flag) {
    std::vector<int> used(mesh.vertices.size(), -1);
    int nv = 0;
    for (auto &t : mesh.tets)
        for (int v : t) used[v] = 1;
    for (auto &u : used)
        if (u == 1) u = nv++;
    std::vector<Vec3> V(nv);
    std::vector<std::array<int, 3>> L(nv);
    std::vector<std::uint8_t> F(nv);
    for (int v = 0; v < int(used.size()); ++v)
        if (used[v] >= 0) {
            V[used[v]] = mesh.vertices[v];
            L[used[v]] = mesh.lattice[v];
            F[used[v]] = flag[v];
        }
    for (auto &t : mesh.tets)
        for (int &v : t) v = used[v];
    mesh.vertices = std::move(V);
    mesh.lattice = std::move(L);
    flag = std::move(F);
}

} // namespace

CellMesh build_unit_cell_mesh(int resolution, const ObstacleSpec &obstacle) {
    obstacle.validate();
    if (resolution < 4) throw ResolutionTooCoarse("resolution must be at least 4");
    const int n = resolution;
    const double h = 1.0 / n;
    const Vec3 c = obstacle.center;
    const double r = obstacle.radius;

    CellMesh mesh;
    std::vector<std::array<int, 4>> T;
    kuhn_grid(n, mesh.vertices, mesh.lattice, T);
    auto &V = mesh.vertices;
    const int nv = int(V.size());

    std::vector<double> dist(nv);
    std::vector<int> sgn(nv);
    for (int v = 0; v < nv; ++v) {
        dist[v] = (V[v] - c).norm() - r;
        sgn[v] = dist[v] > 0 ? 1 : (dist[v] < 0 ? -1 : 0);
    }
    auto snap = [&](int v) {
        V[v] = c + r * (V[v] - c).normalized();
        sgn[v] = 0;
    };
    for (int v = 0; v < nv; ++v)
        if (sgn[v] == 0) snap(v);

    // crossing edges, then greedy snapping by ascending |distance|
    std::vector<std::vector<int>> adj(nv);
    {
        std::vector<std::pair<int, int>> edges;
        for (const auto &t : T)
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j) {
                    int a = std::min(t[i], t[j]), b = std::max(t[i], t[j]);
                    if (sgn[a] * sgn[b] < 0) edges.emplace_back(a, b);
                }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (auto [a, b] : edges) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    std::vector<int> cand;
    for (int v = 0; v < nv; ++v)
        if (!adj[v].empty()) cand.push_back(v);
    // symmetric images tie up to rounding; quantize and snap outer vertices first
    const double tol = 1e-10 * h;
    auto level = [&](int v) { return std::llround(std::abs(dist[v]) / tol); };
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
        auto la = level(a), lb = level(b);
        if (la != lb) return la < lb;
        return sgn[a] > sgn[b];
    });
    for (int a : cand) {
        if (sgn[a] == 0) continue;
        for (int b : adj[a])
            if (sgn[a] * sgn[b] < 0) {
                snap(a);
                break;
            }
    }

    // re-snap the outer vertex of flattened tets
    const double qmin = 0.02 * h * h * h;
    std::vector<std::array<int, 4>> kept;
    for (int iter = 0;; ++iter) {
        kept.clear();
        for (const auto &t : T)
            if (std::max({sgn[t[0]], sgn[t[1]], sgn[t[2]], sgn[t[3]]}) > 0) kept.push_back(t);
        std::vector<int> bad;
        for (const auto &t : kept)
            if (signed_volume(V, t) < qmin) {
                double best = HUGE_VAL;
                for (int v : t)
                    if (sgn[v] > 0) best = std::min(best, dist[v]);
                for (int v : t)
                    if (sgn[v] > 0 && dist[v] <= best + tol) bad.push_back(v);
            }
        if (bad.empty()) break;
        if (iter > 20) throw DegenerateMesh("snapping did not remove flat tets");
        for (int v : bad)
            if (sgn[v] > 0) snap(v);
    }

    // separation from the cell boundary
    auto on_box = [n](const std::array<int, 3> &l) {
        for (int d = 0; d < 3; ++d)
            if (l[d] == 0 || l[d] == n) return true;
        return false;
    };
    for (int v = 0; v < nv; ++v)
        if (on_box(mesh.lattice[v]) && sgn[v] <= 0)
            throw ResolutionTooCoarse("obstacle reaches the outer lattice layer of the cell");

    std::vector<std::uint8_t> flag(nv);
    for (int v = 0; v < nv; ++v) flag[v] = sgn[v] == 0;
    mesh.tets = kept;
    compact(mesh, flag);
    mesh.on_obstacle = flag;
    mesh.resolution = n;
    mesh.lattice_size = n;
    mesh.h = h;
    mesh.obstacle = obstacle;
    mesh.obstacle_centers = {c};
    mesh.obstacle_radius = r;

    for (int t = 0; t < mesh.n_tets(); ++t)
        if (!(mesh.tet_volume(t) > 0)) throw DegenerateMesh("non-positive tet volume");

    mesh.faces = boundary_faces(mesh.vertices, mesh.tets);
    for (auto &f : mesh.faces) {
        const auto &l0 = mesh.lattice[f.v[0]], &l1 = mesh.lattice[f.v[1]], &l2 = mesh.lattice[f.v[2]];
        bool tagged = false;
        for (int d = 0; d < 3 && !tagged; ++d) {
            if (l0[d] == 0 && l1[d] == 0 && l2[d] == 0) {
                f.tag = FaceTag(2 * d);
                tagged = true;
            } else if (l0[d] == n && l1[d] == n && l2[d] == n) {
                f.tag = FaceTag(2 * d + 1);
                tagged = true;
            }
        }
        if (!tagged) {
            if (!(mesh.on_obstacle[f.v[0]] && mesh.on_obstacle[f.v[1]] && mesh.on_obstacle[f.v[2]]))
                throw DegenerateMesh("boundary face neither periodic nor on the obstacle");
            f.tag = FaceTag::obstacle;
            f.obstacle = 0;
        }
    }
    finish_faces(mesh);

    // periodic identification by wrapped lattice keys
    auto key = [n](std::array<int, 3> l) {
        for (int &x : l) x %= n;
        return std::int64_t(l[0]) + std::int64_t(n) * (l[1] + std::int64_t(n) * l[2]);
    };
    std::unordered_map<std::int64_t, int> canon;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        const auto &l = mesh.lattice[v];
        if (l[0] < n && l[1] < n && l[2] < n) canon.emplace(key(l), v);
    }
    mesh.periodic_master.resize(mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        auto it = canon.find(key(mesh.lattice[v]));
        if (it == canon.end()) throw DegenerateMesh("periodic image missing");
        mesh.periodic_master[v] = it->second;
    }
    std::map<std::pair<int, Face>, int> side;
    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        const auto &bf = mesh.faces[f];
        if (bf.tag == FaceTag::obstacle) continue;
        auto &m = mesh.periodic_master;
        side[{int(bf.tag), sorted_face(m[bf.v[0]], m[bf.v[1]], m[bf.v[2]])}] = f;
    }
    mesh.periodic_partner.assign(mesh.faces.size(), -1);
    for (int f = 0; f < int(mesh.faces.size()); ++f) {
        const auto &bf = mesh.faces[f];
        if (bf.tag == FaceTag::obstacle) continue;
        int other = int(bf.tag) ^ 1;
        auto &m = mesh.periodic_master;
        auto it = side.find({other, sorted_face(m[bf.v[0]], m[bf.v[1]], m[bf.v[2]])});
        if (it == side.end()) throw DegenerateMesh("periodic face without partner");
        mesh.periodic_partner[f] = it->second;
    }
    mesh.fluid_volume = fluid_volume(mesh);
    return mesh;
}

MacroMesh build_macro_mesh(double epsilon, int per_cell_resolution, const ObstacleSpec &obstacle) {
    if (!(epsilon > 0 && epsilon <= 1)) throw NonIntegerTiling("epsilon must lie in (0,1]");
    double m = 1.0 / epsilon;
    if (std::abs(m - std::round(m)) > 1e-9 * m) throw NonIntegerTiling("1/epsilon is not an integer");
    return build_macro_mesh(build_unit_cell_mesh(per_cell_resolution, obstacle), epsilon);
}

MacroMesh build_macro_mesh(const CellMesh &cell, double epsilon) {
    if (!(epsilon > 0 && epsilon <= 1)) throw NonIntegerTiling("epsilon must lie in (0,1]");
    double mr = 1.0 / epsilon;
    if (std::abs(mr - std::round(mr)) > 1e-9 * mr) throw NonIntegerTiling("1/epsilon is not an integer");
    const int m = int(std::lround(mr));
    const int n = cell.resolution;
    const int N = m * n;
    const double eps = 1.0 / m;

    MacroMesh mesh;
    mesh.epsilon = eps;
    mesh.cells_per_axis = m;
    mesh.per_cell_resolution = n;
    mesh.obstacle = cell.obstacle;
    mesh.lattice_size = N;
    mesh.h = eps * cell.h;
    mesh.obstacle_radius = eps * cell.obstacle_radius;
    mesh.tets_per_cell = cell.n_tets();
    mesh.cell_vertices = cell.n_vertices();

    const int ncell = m * m * m;
    std::unordered_map<std::int64_t, int> index;
    auto key = [N](const std::array<int, 3> &l) {
        return std::int64_t(l[0]) + std::int64_t(N + 1) * (l[1] + std::int64_t(N + 1) * l[2]);
    };
    mesh.cell_vertex_map.resize(size_t(ncell) * cell.n_vertices());
    mesh.tets.reserve(size_t(ncell) * cell.n_tets());
    for (int c = 0; c < ncell; ++c) {
        auto k = mesh.cell_index(c);
        Vec3 origin = eps * Vec3(k[0], k[1], k[2]);
        mesh.obstacle_centers.push_back(origin + eps * cell.obstacle.center);
        for (int v = 0; v < cell.n_vertices(); ++v) {
            std::array<int, 3> l;
            for (int d = 0; d < 3; ++d) l[d] = cell.lattice[v][d] + k[d] * n;
            auto [it, fresh] = index.emplace(key(l), mesh.n_vertices());
            if (fresh) {
                mesh.vertices.push_back(origin + eps * cell.vertices[v]);
                mesh.lattice.push_back(l);
                mesh.on_obstacle.push_back(cell.on_obstacle[v]);
            }
            mesh.cell_vertex_map[size_t(c) * cell.n_vertices() + v] = it->second;
        }
        for (const auto &t : cell.tets) {
            std::array<int, 4> T;
            for (int i = 0; i < 4; ++i) T[i] = mesh.cell_vertex_map[size_t(c) * cell.n_vertices() + t[i]];
            mesh.tets.push_back(T);
        }
    }
    // copy boundary faces cell by cell: obstacle faces always, periodic faces on the outer boundary
    for (int c = 0; c < ncell; ++c) {
        auto k = mesh.cell_index(c);
        for (int f = 0; f < int(cell.faces.size()); ++f) {
            const auto &cf = cell.faces[f];
            if (cf.tag != FaceTag::obstacle) {
                int d = int(cf.tag) / 2;
                bool plus = int(cf.tag) & 1;
                if (!(plus ? k[d] == m - 1 : k[d] == 0)) continue;
            }
            BoundaryFace bf = cf;
            for (int i = 0; i < 3; ++i) bf.v[i] = mesh.cell_vertex_map[size_t(c) * cell.n_vertices() + cf.v[i]];
            bf.tet = c * cell.n_tets() + cf.tet;
            if (cf.tag == FaceTag::obstacle) {
                bf.obstacle = c;
            } else {
                bf.tag = FaceTag::exterior;
                bf.obstacle = -1;
            }
            mesh.faces.push_back(bf);
            mesh.cell_face_of.push_back(f);
        }
    }
    finish_faces(mesh);
    for (size_t f = 0; f < mesh.faces.size(); ++f) mesh.faces[f].normal = cell.faces[mesh.cell_face_of[f]].normal;
    mesh.fluid_volume = fluid_volume(mesh);
    return mesh;
}

TetMesh build_box_mesh(int resolution) {
    if (resolution < 1) throw ResolutionTooCoarse("resolution must be positive");
    TetMesh mesh;
    kuhn_grid(resolution, mesh.vertices, mesh.lattice, mesh.tets);
    mesh.on_obstacle.assign(mesh.vertices.size(), 0);
    mesh.lattice_size = resolution;
    mesh.h = 1.0 / resolution;
    mesh.faces = boundary_faces(mesh.vertices, mesh.tets);
    finish_faces(mesh);
    mesh.fluid_volume = fluid_volume(mesh);
    return mesh;
}

void write_vtk(const TetMesh &mesh, const std::string &path,
               const std::vector<std::pair<std::string, std::vector<double>>> &point_scalars,
               const std::vector<std::pair<std::string, std::vector<Vec3>>> &point_vectors,
               const std::vector<std::pair<std::string, std::vector<Vec3>>> &cell_vectors) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nmicrodarcy\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.n_vertices() << " double\n";
    for (const auto &v : mesh.vertices) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    out << "CELLS " << mesh.n_tets() << ' ' << 5 * mesh.n_tets() << '\n';
    for (const auto &t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    out << "CELL_TYPES " << mesh.n_tets() << '\n';
    for (int t = 0; t < mesh.n_tets(); ++t) out << "10\n";
    if (!point_scalars.empty() || !point_vectors.empty()) {
        out << "POINT_DATA " << mesh.n_vertices() << '\n';
        for (const auto &[name, vals] : point_scalars) {
            out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double x : vals) out << x << '\n';
        }
        for (const auto &[name, vals] : point_vectors) {
            out << "VECTORS " << name << " double\n";
            for (const auto &x : vals) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
        }
    }
    if (!cell_vectors.empty()) {
        out << "CELL_DATA " << mesh.n_tets() << '\n';
        for (const auto &[name, vals] : cell_vectors) {
            out << "VECTORS " << name << " double\n";
            for (const auto &x : vals) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
        }
    }
}

} // namespace microdarcy
