#include <microdarcy/analysis.hpp>
#include <microdarcy/cli.hpp>
#include <microdarcy/epsweep.hpp>
#include <microdarcy/errors.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>

namespace microdarcy {

namespace fs = std::filesystem;

const std::vector<std::string> &commands() {
    static const std::vector<std::string> c{"cell-solve", "tensors", "check", "darcy", "eps-sweep", "unfold", "constants"};
    return c;
}

namespace {

struct Context {
    const Config &cfg;
    std::ostream &log;
    fs::path dir;

    void write(const std::string &name, const std::string &text) const {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << text;
        if (text.empty() || text.back() != '\n') out << '\n';
        log << "wrote " << (dir / name).string() << '\n';
    }
};

struct CellStage {
    std::unique_ptr<CellMesh> mesh;
    ConstantsReport constants;
    WellPosednessVerdict verdict;
    std::unique_ptr<CellProblem> problem;
    std::vector<CellSolution> solutions;
    EffectiveTensors tensors;
};

// constants and verdict on the cell mesh of the given resolution
CellStage check_stage(const Context &c, int resolution) {
    CellStage s;
    s.mesh = std::make_unique<CellMesh>(build_unit_cell_mesh(resolution, c.cfg.obstacle));
    const MixedSpaces sp = MixedSpaces::cell(*s.mesh);
    s.constants = estimate_constants(sp.V);
    s.verdict = check_wellposedness(c.cfg.params(), s.constants, c.cfg.safety_factor);
    c.log << "gamma " << s.verdict.gamma << ", bound " << s.verdict.bound
          << (s.verdict.satisfied ? " (satisfied)\n" : " (violated)\n");
    return s;
}

CellStage cell_stage(const Context &c, int resolution) {
    CellStage s = check_stage(c, resolution);
    if (!s.verdict.satisfied) throw WellPosednessViolated("existence condition fails for these parameters");
    s.problem = std::make_unique<CellProblem>(*s.mesh, c.cfg.params());
    s.solutions = s.problem->solve_all(s.verdict);
    s.tensors = compute_effective_tensors(*s.problem, s.solutions);
    return s;
}

std::string cell_solutions_json(const CellStage &s) {
    const SaddleSystem &sys = s.problem->system();
    const Space &V = s.problem->spaces().V;
    const SpMat M = assemble_form(FormKind::mass, V, V);
    const Vec m = s.problem->spaces().Q.basis_integrals().col(0);
    nlohmann::ordered_json j;
    j["resolution"] = s.mesh->resolution;
    j["problems"] = nlohmann::json::array();
    for (const auto &c : s.solutions) {
        nlohmann::ordered_json r;
        r["i"] = c.i + 1;
        r["k"] = c.k + 1;
        r["residual"] = c.residual;
        r["u_l2"] = std::sqrt(c.u.dot(M * c.u));
        r["w_l2"] = std::sqrt(c.w.dot(M * c.w));
        r["weak_divergence"] = (sys.B * c.u).cwiseAbs().maxCoeff();
        r["pi_mean"] = m.dot(c.pi) / s.mesh->fluid_volume;
        j["problems"].push_back(r);
    }
    return j.dump(2);
}

void cell_vtk(const Context &c, const CellStage &s) {
    const Space &V = s.problem->spaces().V;
    const int nv = s.mesh->n_vertices();
    std::vector<std::pair<std::string, std::vector<Vec3>>> fields;
    for (const auto &sol : s.solutions) {
        const Vec ru = V.expand(sol.u), rw = V.expand(sol.w);
        std::vector<Vec3> u(nv), w(nv);
        for (int v = 0; v < nv; ++v) {
            u[v] = ru.segment<3>(3 * v);
            w[v] = rw.segment<3>(3 * v);
        }
        const std::string tag = std::to_string(sol.i + 1) + "_" + std::to_string(sol.k + 1);
        fields.emplace_back("u_" + tag, u);
        fields.emplace_back("w_" + tag, w);
    }
    write_vtk(*s.mesh, (c.dir / "cell.vtk").string(), {}, fields);
    c.log << "wrote " << (c.dir / "cell.vtk").string() << '\n';
}

void eps_vtk(const Context &c, const EpsSolution &e) {
    const Space &V = e.spaces->V;
    const int nv = e.mesh->n_vertices();
    const Vec ru = V.expand(e.u), rw = V.expand(e.w);
    const Vec rp = e.spaces->Q.expand(e.p);
    std::vector<Vec3> u(nv), w(nv);
    std::vector<double> p(nv);
    for (int v = 0; v < nv; ++v) {
        u[v] = ru.segment<3>(3 * v);
        w[v] = rw.segment<3>(3 * v);
        p[v] = rp[v];
    }
    const std::string name = "eps_" + std::to_string(e.mesh->cells_per_axis) + ".vtk";
    write_vtk(*e.mesh, (c.dir / name).string(), {{"p", p}}, {{"u", u}, {"w", w}});
    c.log << "wrote " << (c.dir / name).string() << '\n';
}

SweepResult sweep_stage(const Context &c, CellStage &s) {
    SweepSetup setup;
    setup.epsilons = c.cfg.epsilons();
    setup.f = parse_field(c.cfg.f);
    setup.g = parse_field(c.cfg.g);
    setup.darcy_resolution = c.cfg.darcy_resolution;
    setup.threads = worker_threads();
    return run_sweep(*s.problem, s.solutions, s.tensors, s.verdict, setup);
}

int dispatch(const std::string &cmd, const Context &c) {
    const Config &cfg = c.cfg;
    const bool json = cfg.emits("json");
    if (cmd == "constants" || cmd == "check") {
        CellStage s = check_stage(c, cfg.resolution);
        if (json) c.write("constants.json", constants_json(s.constants));
        if (cmd == "check") {
            if (json) c.write("verdict.json", verdict_json(s.verdict, cfg.params()));
            if (!s.verdict.satisfied) {
                c.log << "WellPosednessViolated: gamma^2 = " << s.verdict.gamma * s.verdict.gamma
                      << " exceeds the bound " << s.verdict.bound << '\n';
                return exit_wellposedness;
            }
        }
        return exit_ok;
    }
    if (cmd == "cell-solve" || cmd == "tensors") {
        CellStage s = cell_stage(c, cfg.resolution);
        if (cmd == "cell-solve") {
            if (json) c.write("cell_solutions.json", cell_solutions_json(s));
            if (cfg.emits("vtk")) cell_vtk(c, s);
        }
        if (json) c.write("tensors.json", tensors_json(s.tensors));
        return exit_ok;
    }
    if (cmd == "darcy") {
        CellStage s = cell_stage(c, cfg.resolution);
        const TetMesh box = build_box_mesh(cfg.darcy_resolution);
        const DarcySolution d = solve_darcy(DarcyTensors::from(s.tensors), parse_field(cfg.f), parse_field(cfg.g), box);
        if (json) c.write("darcy.json", darcy_json(d));
        if (cfg.emits("vtk")) {
            write_darcy_vtk(d, (c.dir / "darcy.vtk").string());
            c.log << "wrote " << (c.dir / "darcy.vtk").string() << '\n';
        }
        return exit_ok;
    }
    if (cmd == "eps-sweep" || cmd == "unfold") {
        CellStage s = cell_stage(c, cfg.sweep_resolution);
        SweepResult r = sweep_stage(c, s);
        if (cmd == "eps-sweep") {
            if (cfg.emits("csv")) c.write("sweep.csv", sweep_csv(r.report));
            if (json) c.write("sweep.json", sweep_json(r.report));
            if (cfg.emits("vtk"))
                for (const auto &e : r.solutions) eps_vtk(c, e);
        }
        if (json) {
            nlohmann::ordered_json j;
            j["rows"] = nlohmann::json::array();
            for (size_t i = 0; i < r.solutions.size(); ++i)
                j["rows"].push_back(nlohmann::ordered_json{{"epsilon", r.solutions[i].epsilon},
                                                           {"unfold_err_u", r.unfolds[i].err_u},
                                                           {"unfold_err_w", r.unfolds[i].err_w},
                                                           {"unfold_norm_u", r.unfolds[i].norm_u},
                                                           {"unfold_norm_w", r.unfolds[i].norm_w}});
            c.write("unfold.json", j.dump(2));
        }
        return exit_ok;
    }
    throw ConfigInvalid("unknown command '" + cmd + "'");
}

} // namespace

int run(const std::string &command, const Config &config, std::ostream &log) {
    try {
        config.validate();
        Context c{config, log, fs::path(config.directory)};
        fs::create_directories(c.dir);
        return dispatch(command, c);
    } catch (const ConfigInvalid &e) {
        log << e.what() << '\n';
        return exit_config;
    } catch (const NonPositiveViscosity &e) {
        log << e.what() << '\n';
        return exit_config;
    } catch (const WellPosednessViolated &e) {
        log << e.what() << '\n';
        return exit_wellposedness;
    } catch (const SolverBreakdown &e) {
        log << e.what() << '\n';
        return exit_solver;
    } catch (const SingularSystem &e) {
        log << e.what() << '\n';
        return exit_solver;
    } catch (const EigSolverFailure &e) {
        log << e.what() << '\n';
        return exit_solver;
    } catch (const std::exception &e) {
        log << e.what() << '\n';
        return exit_error;
    }
}

} // namespace microdarcy
