#include <microdarcy/epsweep.hpp>
#include <microdarcy/errors.hpp>
#include <microdarcy/quadrature.hpp>

#include "element.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <thread>

namespace microdarcy {

EpsSolution solve_eps_problem(std::shared_ptr<const MacroMesh> mesh, const DimensionlessParams &params,
                              const VectorField &f, const VectorField &g, const WellPosednessVerdict &verdict,
                              const SolveOptions &opts) {
    if (!verdict.satisfied) throw WellPosednessViolated("existence condition fails for these parameters");
    const double eps = mesh->epsilon;
    DimensionlessParams p = params;
    p.epsilon = eps;
    p.validate();
    auto spaces = std::make_shared<const MixedSpaces>(MixedSpaces::macro(*mesh));
    const double R = eps * eps * p.Rc;
    SaddleSystem sys = assemble_micropolar(*spaces, p, R);
    if (sys.size() > opts.direct_limit) sys.krylov = krylov_blocks(*spaces, p, R);
    const int n = spaces->V.n_dofs();
    sys.rhs = Eigen::MatrixXd::Zero(2 * n, 1);
    sys.rhs.col(0).head(n) = assemble_load(spaces->V, [&](const Vec3 &x) { return Vec3(f(x) / eps); });
    sys.rhs.col(0).tail(n) = assemble_load(spaces->V, g);
    SaddleSolution s = solve_saddle(sys, opts);

    EpsSolution out;
    out.epsilon = eps;
    out.mesh = std::move(mesh);
    out.u = s.u.col(0);
    out.w = s.w.col(0);
    out.p = s.p.col(0);
    out.residual = s.residual[0];
    out.method = s.method;
    out.norms = eps_norms(*spaces, out.u, out.w, out.p);
    out.spaces = std::move(spaces);
    return out;
}

EpsNorms eps_norms(const MixedSpaces &s, const Vec &u, const Vec &w, const Vec &p) {
    const SpMat M = assemble_form(FormKind::mass, s.V, s.V);
    const SpMat S = assemble_form(FormKind::grad_grad, s.V, s.V);
    const SpMat Mp = assemble_form(FormKind::mass, s.Q, s.Q);
    auto nrm = [](const SpMat &A, const Vec &x) { return std::sqrt(std::max(0.0, x.dot(A * x))); };
    return {nrm(M, u), nrm(S, u), nrm(M, w), nrm(S, w), nrm(Mp, p)};
}

namespace {

// cube averages of the Darcy data over the eps cells
struct CubeMeans {
    std::vector<Vec3> fp, g, u, w;
};

CubeMeans cube_means(const DarcySolution &d, const MacroMesh &mesh) {
    const int m = mesh.cells_per_axis;
    const int n = d.mesh->lattice_size;
    if (n % m != 0) throw MeshMismatch("Darcy lattice is not aligned with the eps cells");
    const auto &rule = tet_rule();
    CubeMeans c;
    const int nc = mesh.n_cells();
    for (auto *v : {&c.fp, &c.g, &c.u, &c.w}) v->assign(nc, Vec3::Zero());
    for (int t = 0; t < d.mesh->n_tets(); ++t) {
        const auto G = detail::tet_geom(*d.mesh, t);
        const Vec3 mid = detail::tet_point(G, {0.25, 0.25, 0.25, 0.25});
        int k[3];
        for (int a = 0; a < 3; ++a) k[a] = std::clamp(int(std::floor(mid[a] * m)), 0, m - 1);
        const int cell = k[0] + m * (k[1] + m * k[2]);
        for (size_t q = 0; q < rule.weights.size(); ++q) {
            const Vec3 x = detail::tet_point(G, rule.points[q]);
            const double wq = rule.weights[q] * G.volume;
            const Vec3 fp = d.f(x) - d.grad_p[t];
            const Vec3 gx = d.g(x);
            c.fp[cell] += wq * fp;
            c.g[cell] += wq * gx;
            c.u[cell] += wq * d.tensors.u(fp, gx);
            c.w[cell] += wq * d.tensors.w(fp, gx);
        }
    }
    const double vol = std::pow(mesh.epsilon, 3);
    for (auto *v : {&c.fp, &c.g, &c.u, &c.w})
        for (auto &x : *v) x /= vol;
    return c;
}

// integral of a raw P2 vector field over each eps cell
std::vector<Vec3> cell_integrals(const EpsSolution &e, const Vec &raw) {
    const MacroMesh &mesh = *e.mesh;
    const Space &V = e.spaces->V;
    std::vector<Vec3> out(mesh.n_cells(), Vec3::Zero());
    int nodes[10];
    for (int t = 0; t < mesh.n_tets(); ++t) {
        V.tet_nodes(t, nodes);
        Vec3 s = Vec3::Zero();
        // P2 basis integrals: -|T|/20 at vertices, |T|/5 at edges
        for (int a = 0; a < 4; ++a) s -= raw.segment<3>(3 * nodes[a]) / 20;
        for (int a = 4; a < 10; ++a) s += raw.segment<3>(3 * nodes[a]) / 5;
        out[t / mesh.tets_per_cell] += mesh.tet_volume(t) * s;
    }
    return out;
}

// macro node of every cell node of cell c
std::vector<int> node_map(const EpsSolution &e, int c, const Space &cell) {
    const MacroMesh &mesh = *e.mesh;
    const P2Topology &ct = cell.topology();
    const P2Topology &mt = e.spaces->V.topology();
    if (ct.n_vertices != mesh.cell_vertices) throw MeshMismatch("cell space is not the tiled cell");
    std::vector<int> map(ct.n_nodes());
    const int *vm = mesh.cell_vertex_map.data() + size_t(c) * mesh.cell_vertices;
    for (int v = 0; v < ct.n_vertices; ++v) map[v] = vm[v];
    for (size_t k = 0; k < ct.edges.size(); ++k) {
        const int me = mt.edge(vm[ct.edges[k][0]], vm[ct.edges[k][1]]);
        if (me < 0) throw MeshMismatch("cell edge missing in the eps mesh");
        map[ct.n_vertices + k] = mt.n_vertices + me;
    }
    return map;
}

Vec gather(const Vec &raw, const std::vector<int> &map) {
    Vec out(3 * map.size());
    for (size_t i = 0; i < map.size(); ++i) out.segment<3>(3 * i) = raw.segment<3>(3 * map[i]);
    return out;
}

} // namespace

CellAverageTable cell_average_compare(const EpsSolution &e, const DarcySolution &darcy) {
    const MacroMesh &mesh = *e.mesh;
    const CubeMeans dm = cube_means(darcy, mesh);
    const double eps = e.epsilon;
    const double vol = eps * eps * eps;
    const auto iu = cell_integrals(e, e.spaces->V.expand(e.u));
    const auto iw = cell_integrals(e, e.spaces->V.expand(e.w));
    CellAverageTable tab;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        CellAverageRow r;
        r.cell = c;
        r.center = mesh.cell_origin(c) + Vec3::Constant(eps / 2);
        // zero extension: fluid integral over the full cube volume
        r.u_eps = iu[c] / vol / eps;
        r.w_eps = iw[c] / vol;
        r.u_darcy = dm.u[c];
        r.w_darcy = dm.w[c];
        r.err_u = (r.u_eps - r.u_darcy).norm();
        r.err_w = (r.w_eps - r.w_darcy).norm();
        tab.l2_u += vol * r.err_u * r.err_u;
        tab.l2_w += vol * r.err_w * r.err_w;
        tab.rows.push_back(r);
    }
    tab.l2_u = std::sqrt(tab.l2_u);
    tab.l2_w = std::sqrt(tab.l2_w);
    return tab;
}

Vec unfold_cell(const EpsSolution &e, const Vec &field, int c, const Space &cell) {
    if (c < 0 || c >= e.mesh->n_cells()) throw MeshMismatch("cell index out of range");
    return gather(e.spaces->V.expand(field), node_map(e, c, cell));
}

std::vector<std::pair<int, Vec3>> unfold_boundary(const EpsSolution &e, const Vec &field, int c, const Space &cell) {
    const MacroMesh &mesh = *e.mesh;
    const Vec raw = e.spaces->V.expand(field);
    std::vector<std::pair<int, Vec3>> out;
    int mn[6], cn[6];
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto &bf = mesh.faces[f];
        if (bf.tag != FaceTag::obstacle || bf.obstacle != c) continue;
        e.spaces->V.face_nodes(int(f), mn);
        cell.face_nodes(mesh.cell_face_of[f], cn);
        for (int a = 0; a < 6; ++a) out.emplace_back(cn[a], raw.segment<3>(3 * mn[a]));
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
    out.erase(std::unique(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.first == b.first; }),
              out.end());
    return out;
}

UnfoldResult unfold_field(const EpsSolution &e, const Space &cell,
                          const std::function<TwoScaleSample(int)> &reference) {
    // unconstrained P2 space: dof vector == raw nodal vector
    const Space free(cell.mesh(), Family::vectorP2, 0, cell.topology_ptr());
    const SpMat M = assemble_form(FormKind::mass, free, free);
    const double eps = e.epsilon;
    const double vol = eps * eps * eps;
    const Vec ru = e.spaces->V.expand(e.u);
    const Vec rw = e.spaces->V.expand(e.w);
    UnfoldResult r;
    auto sq = [&M](const Vec &x) { return x.dot(M * x); };
    for (int c = 0; c < e.mesh->n_cells(); ++c) {
        const auto map = node_map(e, c, cell);
        const Vec tu = gather(ru, map) / eps;
        const Vec tw = gather(rw, map);
        const TwoScaleSample ref = reference(c);
        r.err_u += vol * sq(tu - cell.expand(ref.u));
        r.err_w += vol * sq(tw - cell.expand(ref.w));
        r.norm_u += vol * sq(tu) * eps * eps;
        r.norm_w += vol * sq(tw);
    }
    r.err_u = std::sqrt(r.err_u);
    r.err_w = std::sqrt(r.err_w);
    r.norm_u = std::sqrt(r.norm_u);
    r.norm_w = std::sqrt(r.norm_w);
    return r;
}

std::function<TwoScaleSample(int)> darcy_reference(const std::vector<CellSolution> &solutions,
                                                   const DarcySolution &darcy, const MacroMesh &mesh) {
    auto dm = std::make_shared<const CubeMeans>(cube_means(darcy, mesh));
    return [&solutions, dm](int c) { return two_scale_reconstruct(solutions, dm->fp[c], dm->g[c]); };
}

bool ConvergenceReport::all_bounded() const {
    return std::all_of(bounded.begin(), bounded.end(), [](bool b) { return b; });
}

std::array<bool, 4> ConvergenceReport::decreasing() const {
    std::array<bool, 4> ok{true, true, true, true};
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto &a = rows[i - 1], &b = rows[i];
        ok[0] = ok[0] && b.cell_avg_err_u <= 1.05 * a.cell_avg_err_u;
        ok[1] = ok[1] && b.cell_avg_err_w <= 1.05 * a.cell_avg_err_w;
        ok[2] = ok[2] && b.unfold_err_u <= 1.05 * a.unfold_err_u;
        ok[3] = ok[3] && b.unfold_err_w <= 1.05 * a.unfold_err_w;
    }
    return ok;
}

ConvergenceReport apriori_check(const std::vector<EpsSolution> &solutions) {
    ConvergenceReport r;
    for (const auto &s : solutions) {
        ConvergenceRow row;
        const double e = s.epsilon;
        row.epsilon = e;
        row.u_scaled = s.norms.u / e;
        row.Du = s.norms.Du;
        row.w = s.norms.w;
        row.Dw_scaled = e * s.norms.Dw;
        row.p_scaled = e * s.norms.p;
        r.rows.push_back(row);
    }
    std::sort(r.rows.begin(), r.rows.end(), [](const auto &a, const auto &b) { return a.epsilon > b.epsilon; });
    for (size_t i = 1; i < r.rows.size(); ++i)
        if (r.rows[i].epsilon == r.rows[i - 1].epsilon) throw TooFewSamples("repeated epsilon");
    if (r.rows.size() < 2) throw TooFewSamples("at least two distinct epsilons needed");
    auto col = [&](double ConvergenceRow::*m, int k) {
        double lo = r.rows[0].*m, hi = lo;
        for (const auto &x : r.rows) {
            lo = std::min(lo, x.*m);
            hi = std::max(hi, x.*m);
        }
        r.bounded[k] = hi <= 3 * lo;
    };
    col(&ConvergenceRow::u_scaled, 0);
    col(&ConvergenceRow::Du, 1);
    col(&ConvergenceRow::w, 2);
    col(&ConvergenceRow::Dw_scaled, 3);
    col(&ConvergenceRow::p_scaled, 4);
    return r;
}

int worker_threads() {
    const char *s = std::getenv("MICRODARCY_THREADS");
    if (!s) return 1;
    const int n = std::atoi(s);
    return std::max(1, n);
}

SweepResult run_sweep(const CellProblem &problem, const std::vector<CellSolution> &solutions,
                      const EffectiveTensors &tensors, const WellPosednessVerdict &verdict, const SweepSetup &setup) {
    if (setup.epsilons.size() < 2) throw TooFewSamples("at least two distinct epsilons needed");
    SweepResult out;
    auto box = std::make_shared<const TetMesh>(build_box_mesh(setup.darcy_resolution));
    out.darcy_mesh = box;
    out.darcy = solve_darcy(DarcyTensors::from(tensors), setup.f, setup.g, *box);

    std::vector<double> eps = setup.epsilons;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const size_t n = eps.size();
    out.solutions.resize(n);
    std::vector<std::exception_ptr> err(n);
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i; (i = next++) < n;) {
            try {
                auto mesh = std::make_shared<const MacroMesh>(build_macro_mesh(problem.mesh(), eps[i]));
                out.solutions[i] = solve_eps_problem(mesh, problem.params(), setup.f, setup.g, verdict, setup.solve);
            } catch (...) {
                err[i] = std::current_exception();
            }
        }
    };
    const int nt = std::min<int>(std::max(1, setup.threads), int(n));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto &t : pool) t.join();
    for (auto &e : err)
        if (e) std::rethrow_exception(e);

    out.report = apriori_check(out.solutions);
    for (size_t i = 0; i < n; ++i) {
        const EpsSolution &s = out.solutions[i];
        out.tables.push_back(cell_average_compare(s, out.darcy));
        out.unfolds.push_back(unfold_field(s, problem.spaces().V, darcy_reference(solutions, out.darcy, *s.mesh)));
        auto &row = out.report.rows[i];
        row.cell_avg_err_u = out.tables.back().l2_u;
        row.cell_avg_err_w = out.tables.back().l2_w;
        row.unfold_err_u = out.unfolds.back().err_u;
        row.unfold_err_w = out.unfolds.back().err_w;
    }
    return out;
}

std::string sweep_csv(const ConvergenceReport &r) {
    std::string s = "epsilon,u_scaled_norm,Du_norm,w_norm,Dw_scaled_norm,p_scaled_norm,"
                    "cell_avg_err_u,cell_avg_err_w,unfold_err_u,unfold_err_w\n";
    char buf[512];
    for (const auto &x : r.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", x.epsilon,
                      x.u_scaled, x.Du, x.w, x.Dw_scaled, x.p_scaled, x.cell_avg_err_u, x.cell_avg_err_w,
                      x.unfold_err_u, x.unfold_err_w);
        s += buf;
    }
    return s;
}

std::string sweep_json(const ConvergenceReport &r) {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::json::array();
    for (const auto &x : r.rows)
        j["rows"].push_back(nlohmann::ordered_json{{"epsilon", x.epsilon},
                                                   {"u_scaled_norm", x.u_scaled},
                                                   {"Du_norm", x.Du},
                                                   {"w_norm", x.w},
                                                   {"Dw_scaled_norm", x.Dw_scaled},
                                                   {"p_scaled_norm", x.p_scaled},
                                                   {"cell_avg_err_u", x.cell_avg_err_u},
                                                   {"cell_avg_err_w", x.cell_avg_err_w},
                                                   {"unfold_err_u", x.unfold_err_u},
                                                   {"unfold_err_w", x.unfold_err_w}});
    const char *names[] = {"u_scaled_norm", "Du_norm", "w_norm", "Dw_scaled_norm", "p_scaled_norm"};
    for (int k = 0; k < 5; ++k) j["bounded"][names[k]] = r.bounded[k];
    const auto d = r.decreasing();
    const char *errs[] = {"cell_avg_err_u", "cell_avg_err_w", "unfold_err_u", "unfold_err_w"};
    for (int k = 0; k < 4; ++k) j["decreasing"][errs[k]] = d[k];
    return j.dump(2);
}

} // namespace microdarcy
