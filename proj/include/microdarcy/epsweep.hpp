#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <microdarcy/analysis.hpp>
#include <microdarcy/cell.hpp>
#include <microdarcy/darcy.hpp>

namespace microdarcy {

struct EpsNorms {
    double u = 0, Du = 0, w = 0, Dw = 0, p = 0; // L2 over the fluid part of Omega_eps
};

struct EpsSolution {
    double epsilon = 1;
    std::shared_ptr<const MacroMesh> mesh;
    std::shared_ptr<const MixedSpaces> spaces;
    Vec u, w, p; // dof vectors in spaces->V, spaces->Q
    EpsNorms norms;
    double residual = 0;
    std::string method;
};

// forcing eps^-1 f on the velocity rows and g on the microrotation rows,
// microrotation diffusion eps^2 Rc. throws WellPosednessViolated, SolverBreakdown
EpsSolution solve_eps_problem(std::shared_ptr<const MacroMesh> mesh, const DimensionlessParams &params,
                              const VectorField &f, const VectorField &g, const WellPosednessVerdict &verdict,
                              const SolveOptions &opts = {});

EpsNorms eps_norms(const MixedSpaces &spaces, const Vec &u, const Vec &w, const Vec &p);

struct CellAverageRow {
    int cell = 0;
    Vec3 center;
    Vec3 u_eps, w_eps;     // eps^-1 <u_eps>, <w_eps> over Y_{k,eps}
    Vec3 u_darcy, w_darcy; // averages of the Darcy fields over the same cube
    double err_u = 0, err_w = 0;
};
struct CellAverageTable {
    std::vector<CellAverageRow> rows;
    double l2_u = 0, l2_w = 0; // (sum_k |Y_k| err_k^2)^1/2
};

// needs the Darcy lattice aligned with the cells (resolution a multiple of 1/eps)
CellAverageTable cell_average_compare(const EpsSolution &eps, const DarcySolution &darcy);

// raw P2 nodal values (3 per node) of T_eps(field) on the cell mesh for cell c
Vec unfold_cell(const EpsSolution &eps, const Vec &field, int cell, const Space &cell_space);
// the same restricted to the obstacle nodes of cell c, read off the macro
// obstacle faces; pairs (cell node, value)
std::vector<std::pair<int, Vec3>> unfold_boundary(const EpsSolution &eps, const Vec &field, int cell,
                                                  const Space &cell_space);

struct UnfoldResult {
    double err_u = 0, err_w = 0; // ||eps^-1 T u_eps - u_hat||, ||T w_eps - w_hat|| over Omega x Y*
    double norm_u = 0, norm_w = 0; // ||T u_eps||, ||T w_eps|| over Omega x Y*
};

// reference(c): cell-space dof vectors of the hat fields for cell c
UnfoldResult unfold_field(const EpsSolution &eps, const Space &cell_space,
                          const std::function<TwoScaleSample(int cell)> &reference);

// hat fields of cell c from the Darcy cell averages of f - grad p and g
std::function<TwoScaleSample(int)> darcy_reference(const std::vector<CellSolution> &solutions,
                                                   const DarcySolution &darcy, const MacroMesh &mesh);

struct ConvergenceRow {
    double epsilon = 0;
    double u_scaled = 0, Du = 0, w = 0, Dw_scaled = 0, p_scaled = 0;
    double cell_avg_err_u = 0, cell_avg_err_w = 0, unfold_err_u = 0, unfold_err_w = 0;
};
struct ConvergenceReport {
    std::vector<ConvergenceRow> rows; // decreasing epsilon
    // max over eps <= 3 min over eps for u_scaled, Du, w, Dw_scaled, p_scaled
    std::array<bool, 5> bounded{};
    bool all_bounded() const;
    // err(eps_{i+1}) <= 1.05 err(eps_i) for the four error columns
    std::array<bool, 4> decreasing() const;
};

// throws TooFewSamples
ConvergenceReport apriori_check(const std::vector<EpsSolution> &solutions);

struct SweepSetup {
    std::vector<double> epsilons{1.0 / 2, 1.0 / 3, 1.0 / 4};
    VectorField f = [](const Vec3 &) { return Vec3(1, 0, 0); };
    VectorField g = [](const Vec3 &) { return Vec3(0, 0, 0); };
    int darcy_resolution = 12;
    SolveOptions solve;
    int threads = 1;
};

struct SweepResult {
    std::vector<EpsSolution> solutions; // decreasing epsilon
    std::vector<CellAverageTable> tables;
    std::vector<UnfoldResult> unfolds;
    ConvergenceReport report;
    std::shared_ptr<const TetMesh> darcy_mesh;
    DarcySolution darcy;
};

// The eps meshes tile problem.mesh(), so the cell solutions serve as the
// unfolding reference exactly.
SweepResult run_sweep(const CellProblem &problem, const std::vector<CellSolution> &solutions,
                      const EffectiveTensors &tensors, const WellPosednessVerdict &verdict, const SweepSetup &setup);

// worker cap from MICRODARCY_THREADS, at least 1
int worker_threads();

std::string sweep_csv(const ConvergenceReport &r);
std::string sweep_json(const ConvergenceReport &r);

} // namespace microdarcy
