#include <microdarcy/errors.hpp>
#include <microdarcy/femcore.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace microdarcy {

P2Topology::P2Topology(const TetMesh &mesh) : n_vertices(mesh.n_vertices()) {
    std::vector<std::array<int, 2>> all;
    all.reserve(mesh.tets.size() * 6);
    for (const auto &t : mesh.tets)
        for (const auto &e : tet_edge_vertices)
            all.push_back({std::min(t[e[0]], t[e[1]]), std::max(t[e[0]], t[e[1]])});
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    edges = std::move(all);
    tet_edges.resize(mesh.tets.size());
    for (size_t t = 0; t < mesh.tets.size(); ++t)
        for (int e = 0; e < 6; ++e)
            tet_edges[t][e] = edge(mesh.tets[t][tet_edge_vertices[e][0]], mesh.tets[t][tet_edge_vertices[e][1]]);
    face_edges.resize(mesh.faces.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f)
        for (int e = 0; e < 3; ++e)
            face_edges[f][e] = edge(mesh.faces[f].v[face_edge_vertices[e][0]], mesh.faces[f].v[face_edge_vertices[e][1]]);
}

int P2Topology::edge(int a, int b) const {
    std::array<int, 2> k{std::min(a, b), std::max(a, b)};
    auto it = std::lower_bound(edges.begin(), edges.end(), k);
    if (it == edges.end() || *it != k) return -1;
    return int(it - edges.begin());
}

namespace {

Mat3 tangent_frame(const Vec3 &n) {
    int k = 0;
    for (int d = 1; d < 3; ++d)
        if (std::abs(n[d]) < std::abs(n[k])) k = d;
    Vec3 t1 = n.cross(Vec3::Unit(k)).normalized();
    Vec3 t2 = n.cross(t1);
    Mat3 F;
    F.row(0) = t1;
    F.row(1) = t2;
    F.row(2) = n;
    return F;
}

} // namespace

Space::Space(const TetMesh &mesh, Family family, unsigned constraints,
             std::shared_ptr<const P2Topology> topology)
    : mesh_(&mesh), topo_(topology ? std::move(topology) : std::make_shared<const P2Topology>(mesh)),
      family_(family), constraints_(constraints) {
    const bool vector = n_comp() == 3;
    if (has(constraint::periodic) && mesh.periodic_master.empty())
        throw IncompatibleConstraints("periodic constraint needs a periodic cell mesh");
    if (has(constraint::periodic) && has(constraint::zero_exterior_trace))
        throw IncompatibleConstraints("periodic and exterior trace constraints exclude each other");
    if (has(constraint::zero_exterior_trace) && mesh.faces_with_tag(FaceTag::exterior).empty())
        throw IncompatibleConstraints("mesh has no exterior boundary");
    if (has(constraint::zero_normal_on_obstacle) && !vector)
        throw IncompatibleConstraints("normal constraint needs a vector family");
    if (has(constraint::zero_mean) && vector)
        throw IncompatibleConstraints("zero mean applies to scalar families");
    if (topo_->n_vertices != mesh.n_vertices()) throw MeshMismatch("topology built on another mesh");

    const int nv = mesh.n_vertices();
    const int nn = order() == 2 ? topo_->n_nodes() : nv;
    const auto &edges = topo_->edges;

    // doubled lattice coordinates identify nodes across periodic faces
    master_.resize(nn);
    for (int i = 0; i < nn; ++i) master_[i] = i;
    if (has(constraint::periodic)) {
        const int N2 = 2 * mesh.lattice_size;
        auto key = [&](int node, bool wrap) {
            std::array<int, 3> k;
            if (node < nv) {
                for (int d = 0; d < 3; ++d) k[d] = 2 * mesh.lattice[node][d];
            } else {
                const auto &e = edges[node - nv];
                for (int d = 0; d < 3; ++d) k[d] = mesh.lattice[e[0]][d] + mesh.lattice[e[1]][d];
            }
            if (wrap)
                for (int &x : k) x %= N2;
            return std::int64_t(k[0]) + std::int64_t(N2 + 1) * (k[1] + std::int64_t(N2 + 1) * k[2]);
        };
        std::unordered_map<std::int64_t, int> canon;
        canon.reserve(nn);
        for (int i = 0; i < nn; ++i)
            if (key(i, false) == key(i, true)) canon.emplace(key(i, false), i);
        for (int i = 0; i < nn; ++i) {
            auto it = canon.find(key(i, true));
            if (it == canon.end()) throw IncompatibleConstraints("mesh is not periodic");
            master_[i] = it->second;
        }
    }

    std::vector<std::uint8_t> dirichlet(nn, 0);
    if (has(constraint::zero_exterior_trace)) {
        for (size_t f = 0; f < mesh.faces.size(); ++f) {
            if (mesh.faces[f].tag != FaceTag::exterior) continue;
            for (int v : mesh.faces[f].v) dirichlet[v] = 1;
            if (order() == 2)
                for (int e : topo_->face_edges[f]) dirichlet[nv + e] = 1;
        }
    }

    frame_id_.assign(nn, -1);
    if (has(constraint::zero_normal_on_obstacle)) {
        std::vector<Vec3> acc(nn, Vec3::Zero());
        std::vector<int> obst(nn, -1);
        for (size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto &bf = mesh.faces[f];
            if (bf.tag != FaceTag::obstacle) continue;
            for (int v : bf.v) obst[v] = bf.obstacle;
            if (order() == 2)
                for (int e : topo_->face_edges[f]) {
                    obst[nv + e] = bf.obstacle;
                    acc[nv + e] += bf.area * bf.normal;
                }
        }
        for (int i = 0; i < nn; ++i) {
            if (obst[i] < 0) continue;
            Vec3 n = i < nv ? mesh.sphere_normal(i, obst[i]) : acc[i].normalized();
            frame_id_[i] = int(frames_.size());
            frames_.push_back(tangent_frame(n));
            normals_.push_back(n);
        }
    }

    dof0_.assign(nn, 0);
    ndof_.assign(nn, 0);
    int next = 0;
    for (int i = 0; i < nn; ++i) {
        if (master_[i] != i) continue;
        int k = dirichlet[i] ? 0 : (frame_id_[i] >= 0 ? 2 : n_comp());
        dof0_[i] = next;
        ndof_[i] = std::uint8_t(k);
        next += k;
    }
    for (int i = 0; i < nn; ++i) {
        int m = master_[i];
        dof0_[i] = dof0_[m];
        ndof_[i] = ndof_[m];
        frame_id_[i] = frame_id_[m];
    }
    n_dofs_ = next;
}

const Mat3 &Space::frame(int node) const {
    static const Mat3 I = Mat3::Identity();
    int id = frame_id_[node];
    return id < 0 ? I : frames_[id];
}

Vec3 Space::constraint_normal(int node) const {
    int id = frame_id_[node];
    return id < 0 ? Vec3::Zero() : normals_[id];
}

void Space::tet_nodes(int t, int *out) const {
    const auto &T = mesh_->tets[t];
    for (int i = 0; i < 4; ++i) out[i] = T[i];
    if (order() == 2)
        for (int e = 0; e < 6; ++e) out[4 + e] = topo_->n_vertices + topo_->tet_edges[t][e];
}

void Space::face_nodes(int f, int *out) const {
    const auto &F = mesh_->faces[f];
    for (int i = 0; i < 3; ++i) out[i] = F.v[i];
    if (order() == 2)
        for (int e = 0; e < 3; ++e) out[3 + e] = topo_->n_vertices + topo_->face_edges[f][e];
}

Vec3 Space::node_position(int node) const {
    const int nv = topo_->n_vertices;
    if (node < nv) return mesh_->vertices[node];
    const auto &e = topo_->edges[node - nv];
    return 0.5 * (mesh_->vertices[e[0]] + mesh_->vertices[e[1]]);
}

Vec Space::expand(const Vec &x) const {
    const int nc = n_comp();
    Vec raw = Vec::Zero(Eigen::Index(n_nodes()) * nc);
    for (int i = 0; i < n_nodes(); ++i) {
        const int k = ndof_[i];
        if (k == 0) continue;
        if (nc == 1) {
            raw[i] = x[dof0_[i]];
            continue;
        }
        const Mat3 &F = frame(i);
        Vec3 v = Vec3::Zero();
        for (int a = 0; a < k; ++a) v += x[dof0_[i] + a] * F.row(a).transpose();
        raw.segment<3>(3 * i) = v;
    }
    return raw;
}

Vec Space::restrict_raw(const Vec &raw) const {
    const int nc = n_comp();
    Vec x = Vec::Zero(n_dofs_);
    for (int i = 0; i < n_nodes(); ++i) {
        const int k = ndof_[i];
        if (k == 0) continue;
        if (nc == 1) {
            x[dof0_[i]] += raw[i];
            continue;
        }
        const Mat3 &F = frame(i);
        Vec3 r = raw.segment<3>(3 * i);
        for (int a = 0; a < k; ++a) x[dof0_[i] + a] += F.row(a).dot(r);
    }
    return x;
}

Vec Space::interpolate(const Vec &raw) const {
    const int nc = n_comp();
    Vec x = Vec::Zero(n_dofs_);
    for (int i = 0; i < n_nodes(); ++i) {
        if (master_[i] != i || ndof_[i] == 0) continue;
        if (nc == 1) {
            x[dof0_[i]] = raw[i];
            continue;
        }
        const Mat3 &F = frame(i);
        Vec3 r = raw.segment<3>(3 * i);
        for (int a = 0; a < ndof_[i]; ++a) x[dof0_[i] + a] = F.row(a).dot(r);
    }
    return x;
}

Vec Space::interpolate(const std::function<Vec3(const Vec3 &)> &f) const {
    Vec raw(3 * Eigen::Index(n_nodes()));
    for (int i = 0; i < n_nodes(); ++i) raw.segment<3>(3 * i) = f(node_position(i));
    return interpolate(raw);
}

Vec Space::interpolate_scalar(const std::function<double(const Vec3 &)> &f) const {
    Vec raw(n_nodes());
    for (int i = 0; i < n_nodes(); ++i) raw[i] = f(node_position(i));
    return interpolate(raw);
}

SpMat Space::prolongation() const {
    const int nc = n_comp();
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n_nodes(); ++i) {
        if (nc == 1) {
            if (ndof_[i]) trip.emplace_back(i, dof0_[i], 1.0);
            continue;
        }
        const Mat3 &F = frame(i);
        for (int a = 0; a < ndof_[i]; ++a)
            for (int c = 0; c < 3; ++c)
                if (F(a, c) != 0) trip.emplace_back(3 * i + c, dof0_[i] + a, F(a, c));
    }
    SpMat P(Eigen::Index(n_nodes()) * nc, n_dofs_);
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
}

Eigen::MatrixXd Space::basis_integrals() const {
    if (n_comp() == 1) return assemble_constant_load(*this, Vec3(1, 0, 0));
    Eigen::MatrixXd I(n_dofs_, 3);
    for (int c = 0; c < 3; ++c) I.col(c) = assemble_constant_load(*this, Vec3::Unit(c));
    return I;
}

Space build_space(const TetMesh &mesh, Family family, unsigned constraints,
                  std::shared_ptr<const P2Topology> topology) {
    return Space(mesh, family, constraints, std::move(topology));
}

} // namespace microdarcy
