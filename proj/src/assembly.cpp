#include <microdarcy/errors.hpp>
#include <microdarcy/femcore.hpp>
#include <microdarcy/quadrature.hpp>

#include "element.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>

namespace microdarcy {

using detail::TetGeom;
using Eigen::MatrixXd;

namespace {

bool is_surface(FormKind k) { return k == FormKind::surface_cross || k == FormKind::surface_mass; }

// Node-level sparsity with per-row column offsets; values are addressed as
// row_ptr[dof] + offset[neighbour] + l.
class Pattern {
public:
    Pattern(const Space &trial, const Space &test, bool surface_only, FaceSet faces)
        : trial_(trial), test_(test) {
        const int nt = test.n_nodes();
        std::vector<std::vector<int>> adj(nt);
        int tn[10], rn[10];
        auto add = [&](int ntl, int nrl) {
            for (int a = 0; a < ntl; ++a) {
                int ma = test.master(tn[a]);
                if (test.ndof(ma) == 0) continue;
                for (int b = 0; b < nrl; ++b) {
                    int mb = trial.master(rn[b]);
                    if (trial.ndof(mb) == 0) continue;
                    adj[ma].push_back(mb);
                }
            }
        };
        const TetMesh &mesh = test.mesh();
        if (surface_only) {
            for (int f = 0; f < int(mesh.faces.size()); ++f) {
                if (faces == FaceSet::obstacle && mesh.faces[f].tag != FaceTag::obstacle) continue;
                test.face_nodes(f, tn);
                trial.face_nodes(f, rn);
                add(test.nodes_per_face(), trial.nodes_per_face());
            }
        } else {
            for (int t = 0; t < mesh.n_tets(); ++t) {
                test.tet_nodes(t, tn);
                trial.tet_nodes(t, rn);
                add(test.nodes_per_tet(), trial.nodes_per_tet());
            }
        }
        node_ptr_.assign(nt + 1, 0);
        for (int i = 0; i < nt; ++i) {
            auto &v = adj[i];
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            node_ptr_[i + 1] = node_ptr_[i] + int(v.size());
        }
        cols_.resize(node_ptr_[nt]);
        offset_.resize(node_ptr_[nt]);
        row_len_.assign(nt, 0);
        for (int i = 0; i < nt; ++i) {
            int off = 0;
            for (size_t j = 0; j < adj[i].size(); ++j) {
                cols_[node_ptr_[i] + j] = adj[i][j];
                offset_[node_ptr_[i] + j] = off;
                off += trial.ndof(adj[i][j]);
            }
            row_len_[i] = off;
            std::vector<int>().swap(adj[i]);
        }
        row_ptr_.assign(test.n_dofs() + 1, 0);
        for (int i = 0; i < nt; ++i) {
            if (test.master(i) != i) continue;
            for (int k = 0; k < test.ndof(i); ++k) row_ptr_[test.dof0(i) + k + 1] = row_len_[i];
        }
        for (int r = 0; r < test.n_dofs(); ++r) row_ptr_[r + 1] += row_ptr_[r];
        values_.assign(row_ptr_.back(), 0.0);
    }

    // position of the first column of trial node mb in row dof of test node ma
    long position(int ma, int k, int mb) const {
        auto b = cols_.begin() + node_ptr_[ma], e = cols_.begin() + node_ptr_[ma + 1];
        auto it = std::lower_bound(b, e, mb);
        return long(row_ptr_[test_.dof0(ma) + k]) + offset_[it - cols_.begin()];
    }

    double *values() { return values_.data(); }

    SpMat finish() {
        SpMat A(test_.n_dofs(), trial_.n_dofs());
        const long nnz = long(values_.size());
        A.resizeNonZeros(nnz);
        std::copy(row_ptr_.begin(), row_ptr_.end(), A.outerIndexPtr());
        int *inner = A.innerIndexPtr();
        for (int i = 0; i < test_.n_nodes(); ++i) {
            if (test_.master(i) != i) continue;
            for (int k = 0; k < test_.ndof(i); ++k) {
                long p = row_ptr_[test_.dof0(i) + k];
                for (int j = node_ptr_[i]; j < node_ptr_[i + 1]; ++j)
                    for (int l = 0; l < trial_.ndof(cols_[j]); ++l) inner[p++] = trial_.dof0(cols_[j]) + l;
            }
        }
        std::copy(values_.begin(), values_.end(), A.valuePtr());
        std::vector<double>().swap(values_);
        return A;
    }

private:
    const Space &trial_, &test_;
    std::vector<int> node_ptr_, cols_, offset_, row_len_;
    std::vector<long> row_ptr_;
    std::vector<double> values_;
};

// scatter a raw local matrix (node-major, component-minor) through the constraints
void scatter(Pattern &P, const Space &trial, const Space &test, const int *tn, int ntl, const int *rn,
             int nrl, const MatrixXd &Aloc) {
    const int ct = test.n_comp(), cr = trial.n_comp();
    double *val = P.values();
    for (int a = 0; a < ntl; ++a) {
        const int ma = test.master(tn[a]);
        const int ka = test.ndof(ma);
        if (ka == 0) continue;
        for (int b = 0; b < nrl; ++b) {
            const int mb = trial.master(rn[b]);
            const int kb = trial.ndof(mb);
            if (kb == 0) continue;
            MatrixXd blk = Aloc.block(a * ct, b * cr, ct, cr);
            if (ct == 3) blk = test.frame(ma).topRows(ka) * blk;
            if (cr == 3) blk = blk * trial.frame(mb).topRows(kb).transpose();
            for (int k = 0; k < ka; ++k) {
                long p = P.position(ma, k, mb);
                for (int l = 0; l < kb; ++l) val[p + l] += blk(k, l);
            }
        }
    }
}

struct Basis {
    int order;
    int n;
    double N[10];
    Eigen::Matrix<double, 10, 3> G;
    void eval(const TetGeom &g, const std::array<double, 4> &L, bool grads) {
        n = order == 2 ? 10 : 4;
        if (order == 2) {
            detail::tet_values<2>(L, N);
            if (grads) {
                Eigen::Matrix<double, 10, 3> g2;
                detail::tet_grads<2>(g, L, g2);
                G = g2;
            }
        } else {
            detail::tet_values<1>(L, N);
            if (grads) {
                Eigen::Matrix<double, 4, 3> g1;
                detail::tet_grads<1>(g, L, g1);
                G.topRows<4>() = g1;
            }
        }
    }
};

void check_pair(FormKind k, const Space &trial, const Space &test) {
    if (&trial.mesh() != &test.mesh()) throw MeshMismatch("trial and test spaces live on different meshes");
    const bool tv = test.n_comp() == 3, rv = trial.n_comp() == 3;
    switch (k) {
    case FormKind::rot_rot:
    case FormKind::div_div:
    case FormKind::rot_coupling:
    case FormKind::surface_cross:
        if (!tv || !rv) throw IncompatibleConstraints("form needs vector spaces");
        break;
    case FormKind::pressure_div:
        if (!tv || rv) throw IncompatibleConstraints("pressure_div needs scalar trial and vector test");
        break;
    case FormKind::mass:
    case FormKind::grad_grad:
    case FormKind::surface_mass:
        if (tv != rv) throw IncompatibleConstraints("form needs matching families");
        break;
    }
}

} // namespace

SpMat assemble(const std::vector<FormTerm> &terms, const Space &trial, const Space &test, FaceSet faces) {
    bool surface_only = !terms.empty();
    bool any_volume = false, any_surface = false;
    for (const auto &t : terms) {
        check_pair(t.kind, trial, test);
        surface_only &= is_surface(t.kind);
        (is_surface(t.kind) ? any_surface : any_volume) = true;
    }
    Pattern P(trial, test, surface_only, faces);
    const TetMesh &mesh = test.mesh();
    const int ct = test.n_comp(), cr = trial.n_comp();
    const int ntl = test.nodes_per_tet(), nrl = trial.nodes_per_tet();
    int tn[10], rn[10];
    MatrixXd A(ntl * ct, nrl * cr);

    if (any_volume) {
        const auto &rule = tet_rule();
        Basis bt, br;
        bt.order = test.order();
        br.order = trial.order();
        for (int t = 0; t < mesh.n_tets(); ++t) {
            TetGeom g = detail::tet_geom(mesh, t);
            A.setZero();
            for (size_t q = 0; q < rule.weights.size(); ++q) {
                const double wq = rule.weights[q] * g.volume;
                bt.eval(g, rule.points[q], true);
                br.eval(g, rule.points[q], true);
                for (const auto &term : terms) {
                    if (is_surface(term.kind)) continue;
                    const double w = wq * term.coefficient;
                    for (int a = 0; a < ntl; ++a) {
                        const Vec3 ga = bt.G.row(a);
                        for (int b = 0; b < nrl; ++b) {
                            const Vec3 gb = br.G.row(b);
                            switch (term.kind) {
                            case FormKind::rot_rot: {
                                const double gg = ga.dot(gb);
                                for (int c = 0; c < 3; ++c)
                                    for (int d = 0; d < 3; ++d)
                                        A(3 * a + c, 3 * b + d) += w * ((c == d ? gg : 0.0) - ga[d] * gb[c]);
                                break;
                            }
                            case FormKind::div_div:
                                for (int c = 0; c < 3; ++c)
                                    for (int d = 0; d < 3; ++d) A(3 * a + c, 3 * b + d) += w * ga[c] * gb[d];
                                break;
                            case FormKind::grad_grad: {
                                const double gg = w * ga.dot(gb);
                                if (ct == 1) A(a, b) += gg;
                                else
                                    for (int c = 0; c < 3; ++c) A(3 * a + c, 3 * b + c) += gg;
                                break;
                            }
                            case FormKind::mass: {
                                const double m = w * bt.N[a] * br.N[b];
                                if (ct == 1) A(a, b) += m;
                                else
                                    for (int c = 0; c < 3; ++c) A(3 * a + c, 3 * b + c) += m;
                                break;
                            }
                            case FormKind::rot_coupling:
                                for (int c = 0; c < 3; ++c) {
                                    const Vec3 r = ga.cross(Vec3::Unit(c));
                                    for (int d = 0; d < 3; ++d) A(3 * a + c, 3 * b + d) += w * r[d] * br.N[b];
                                }
                                break;
                            case FormKind::pressure_div:
                                for (int c = 0; c < 3; ++c) A(3 * a + c, b) += w * br.N[b] * ga[c];
                                break;
                            default:
                                break;
                            }
                        }
                    }
                }
            }
            test.tet_nodes(t, tn);
            trial.tet_nodes(t, rn);
            scatter(P, trial, test, tn, ntl, rn, nrl, A);
        }
    }

    if (any_surface) {
        const auto &rule = tri_rule();
        const int ftl = test.nodes_per_face(), frl = trial.nodes_per_face();
        MatrixXd S(ftl * ct, frl * cr);
        double Nt[6], Nr[6];
        for (int f = 0; f < int(mesh.faces.size()); ++f) {
            const auto &bf = mesh.faces[f];
            if (faces == FaceSet::obstacle && bf.tag != FaceTag::obstacle) continue;
            S.setZero();
            Mat3 cross_n; // column d = e_d x nu
            for (int d = 0; d < 3; ++d) cross_n.col(d) = Vec3::Unit(d).cross(bf.normal);
            for (size_t q = 0; q < rule.weights.size(); ++q) {
                const double wq = rule.weights[q] * bf.area;
                detail::tri_values(test.order(), rule.points[q], Nt);
                detail::tri_values(trial.order(), rule.points[q], Nr);
                for (const auto &term : terms) {
                    if (!is_surface(term.kind)) continue;
                    const double w = wq * term.coefficient;
                    for (int a = 0; a < ftl; ++a)
                        for (int b = 0; b < frl; ++b) {
                            const double m = w * Nt[a] * Nr[b];
                            if (term.kind == FormKind::surface_mass) {
                                if (ct == 1) S(a, b) += m;
                                else
                                    for (int c = 0; c < 3; ++c) S(3 * a + c, 3 * b + c) += m;
                            } else {
                                for (int c = 0; c < 3; ++c)
                                    for (int d = 0; d < 3; ++d) S(3 * a + c, 3 * b + d) += m * cross_n(c, d);
                            }
                        }
                }
            }
            test.face_nodes(f, tn);
            trial.face_nodes(f, rn);
            scatter(P, trial, test, tn, ftl, rn, frl, S);
        }
    }
    return P.finish();
}

SpMat assemble_form(FormKind kind, const Space &trial, const Space &test, double coefficient, FaceSet faces) {
    return assemble({{kind, coefficient}}, trial, test, faces);
}

Vec assemble_load(const Space &test, const std::function<Vec3(const Vec3 &)> &f) {
    const TetMesh &mesh = test.mesh();
    const auto &rule = tet_rule();
    const int nc = test.n_comp();
    const int nl = test.nodes_per_tet();
    Vec raw = Vec::Zero(Eigen::Index(test.n_nodes()) * nc);
    int tn[10];
    double N[10];
    for (int t = 0; t < mesh.n_tets(); ++t) {
        TetGeom g = detail::tet_geom(mesh, t);
        test.tet_nodes(t, tn);
        for (size_t q = 0; q < rule.weights.size(); ++q) {
            const auto &L = rule.points[q];
            if (test.order() == 2) detail::tet_values<2>(L, N);
            else detail::tet_values<1>(L, N);
            const Vec3 fx = f(detail::tet_point(g, L));
            const double w = rule.weights[q] * g.volume;
            for (int a = 0; a < nl; ++a) {
                if (nc == 1) raw[tn[a]] += w * N[a] * fx[0];
                else raw.segment<3>(3 * tn[a]) += w * N[a] * fx;
            }
        }
    }
    // periodic images fold onto their masters through the shared dof
    return test.restrict_raw(raw);
}

Vec assemble_constant_load(const Space &test, const Vec3 &c) {
    return assemble_load(test, [&c](const Vec3 &) { return c; });
}

void write_coo(const SpMat &a, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << std::setprecision(17);
    for (int r = 0; r < a.outerSize(); ++r)
        for (SpMat::InnerIterator it(a, r); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

IbpForm::IbpForm(const Space &space)
    : R_(assemble_form(FormKind::rot_coupling, space, space)),
      S_(assemble_form(FormKind::surface_cross, space, space, 1.0, FaceSet::all)) {}

double IbpForm::residual(const Vec &phi, const Vec &psi) const {
    return std::abs(phi.dot(R_ * psi) - psi.dot(R_ * phi) + psi.dot(S_ * phi));
}

double ibp_residual(const Space &space, const Vec &phi, const Vec &psi) { return IbpForm(space).residual(phi, psi); }

double gaffney_ratio(const Space &space, const Vec &v) {
    SpMat S = assemble_form(FormKind::grad_grad, space, space);
    SpMat G = assemble({{FormKind::rot_rot, 1.0}, {FormKind::div_div, 1.0}}, space, space);
    const double den = v.dot(G * v);
    if (!(den > 1e-300)) throw ZeroDenominator("div and rot of the field vanish");
    return v.dot(S * v) / den;
}

} // namespace microdarcy
