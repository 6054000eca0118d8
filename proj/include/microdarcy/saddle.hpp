#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include <microdarcy/femcore.hpp>

namespace microdarcy {

// Data for the block preconditioner of the Krylov path. The velocity and
// microrotation blocks are replaced by scalar SPD operators acting on each
// Cartesian component; T maps a vector dof to (scalar dof, component),
// row 3 * s + c, with orthonormal rows per node so that T^T T = I.
struct KrylovBlocks {
    SpMat Tu, Tw;
    SpMat Lu, Lw;
    Vec p_diag; // pressure Schur complement approximation (lumped mass)
    // augmented Lagrangian weights: the u rows get B^T (p_aug .* continuity
    // residual) added, which leaves the solution unchanged
    Vec p_aug;
};

// [ A  D  B^T 0 ] [u]   [f]
// [ E  C  0   0 ] [w] = [g]
// [ B  0  0   m ] [p]   [0]
// [ 0  0  m^T 0 ] [l]   [0]
// C, D, E may be empty (pure velocity-pressure systems).
struct SaddleSystem {
    SpMat A, C, D, E, B;
    Vec mean;              // pressure basis integrals, zero-mean multiplier row
    Eigen::MatrixXd rhs;   // (n_u + n_w) x columns
    std::shared_ptr<const KrylovBlocks> krylov; // required above the direct limit

    int n_u() const { return int(A.rows()); }
    int n_w() const { return int(C.rows()); }
    int n_p() const { return int(B.rows()); }
    int size() const { return n_u() + n_w() + n_p() + 1; }
    // full block operator, column major for the factorization
    Eigen::SparseMatrix<double> matrix() const;
    Vec apply(const Vec &x) const; // full operator times full vector
    Vec apply_augmented(const Vec &x) const; // apply plus the krylov augmentation
};

struct SaddleSolution {
    Eigen::MatrixXd u, w, p;
    Vec multiplier;
    std::vector<double> residual; // relative, per column
    std::string method;
};

struct SolveOptions {
    double tolerance = 1e-9;   // required relative residual
    int refinement_steps = 3;
    // above this many unknowns use preconditioned GMRES
    long direct_limit = 40000;
    int gmres_restart = 100;
    int gmres_max_iterations = 4000;
    bool verbose = false;
};

// block triangular right preconditioner built from system.krylov
class SaddlePreconditioner {
public:
    explicit SaddlePreconditioner(const SaddleSystem &system);
    ~SaddlePreconditioner();
    Vec apply(const Vec &r) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SaddleSolution solve_saddle(const SaddleSystem &system, const SolveOptions &options = {});

// LU of the full block operator, reusable across right-hand sides
class SaddleFactorization {
public:
    explicit SaddleFactorization(const SaddleSystem &system);
    ~SaddleFactorization();
    Vec solve(const Vec &b) const;
    const SaddleSystem &system() const { return *sys_; }

private:
    const SaddleSystem *sys_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace microdarcy
