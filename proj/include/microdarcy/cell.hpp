#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <microdarcy/femcore.hpp>
#include <microdarcy/params.hpp>
#include <microdarcy/saddle.hpp>

namespace microdarcy {

struct WellPosednessVerdict;

// velocity/microrotation and pressure spaces on one mesh
struct MixedSpaces {
    std::shared_ptr<const P2Topology> topology;
    Space V; // vectorP2
    Space Q; // scalarP1 with zero mean

    static MixedSpaces cell(const CellMesh &mesh);
    static MixedSpaces macro(const TetMesh &mesh);
};

// A, C, D, E, B blocks of the micropolar form with microrotation diffusion R;
// rhs left empty
SaddleSystem assemble_micropolar(const MixedSpaces &spaces, const DimensionlessParams &params, double R);

// scalar-component preconditioner blocks for the Krylov path
std::shared_ptr<const KrylovBlocks> krylov_blocks(const MixedSpaces &spaces, const DimensionlessParams &params,
                                                  double R);

// A(u,w; phi,psi) for dof vectors, trial (u,w), test (phi,psi)
double micropolar_form(const SaddleSystem &system, const Vec &u, const Vec &w, const Vec &phi, const Vec &psi);

struct CellSolution {
    int i = 0; // axis 0..2
    int k = 0; // forcing slot 0 (body force), 1 (torque)
    Vec u, w, pi;
    double residual = 0;
};

// The six local problems on one mesh sharing one factorization.
class CellProblem {
public:
    CellProblem(const CellMesh &mesh, const DimensionlessParams &params);

    const CellMesh &mesh() const { return *mesh_; }
    const MixedSpaces &spaces() const { return spaces_; }
    const DimensionlessParams &params() const { return params_; }
    const SaddleSystem &system() const { return system_; }
    // int phi_c over Y*, column c
    const Eigen::MatrixXd &integrals() const { return integrals_; }

    // throws WellPosednessViolated unless verdict.satisfied
    std::vector<CellSolution> solve_all(const WellPosednessVerdict &verdict, const SolveOptions &opts = {}) const;
    CellSolution solve(int i, int k, const WellPosednessVerdict &verdict, const SolveOptions &opts = {}) const;

    double form(const CellSolution &trial, const CellSolution &test) const;

private:
    const CellMesh *mesh_;
    DimensionlessParams params_;
    MixedSpaces spaces_;
    SaddleSystem system_;
    Eigen::MatrixXd integrals_;
};

struct EffectiveTensors {
    Mat3 K1, K2, L1, L2;
    double porosity = 0;
    std::array<double, 6> residuals{};
    DimensionlessParams params;
    int resolution = 0;
    double radius = 0;

    double asymmetry() const; // ||K1 - K1^T|| / ||K1||
};

EffectiveTensors compute_effective_tensors(const CellProblem &problem, const std::vector<CellSolution> &solutions);

// entry (i,j) = |K1_ij - A_Y(sol_j; sol_i)|
Mat3 bilinear_identity_residual(const CellProblem &problem, const std::vector<CellSolution> &solutions,
                                const EffectiveTensors &tensors);

// hat fields at one macro point: coefficient vectors in the cell spaces
struct TwoScaleSample {
    Vec u, w, q;
};
TwoScaleSample two_scale_reconstruct(const std::vector<CellSolution> &solutions, const Vec3 &f_minus_grad_p,
                                     const Vec3 &g);

std::string tensors_json(const EffectiveTensors &t);

} // namespace microdarcy
