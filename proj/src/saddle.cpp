#include <microdarcy/errors.hpp>
#include <microdarcy/saddle.hpp>

#include <Eigen/CholmodSupport>
#include <Eigen/UmfPackSupport>

#include <cmath>
#include <cstdio>

namespace microdarcy {

using ColMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

namespace {

void push_block(std::vector<Trip> &t, const SpMat &M, int r0, int c0, bool transpose = false) {
    for (int r = 0; r < M.outerSize(); ++r)
        for (SpMat::InnerIterator it(M, r); it; ++it) {
            if (transpose) t.emplace_back(r0 + int(it.col()), c0 + int(it.row()), it.value());
            else t.emplace_back(r0 + int(it.row()), c0 + int(it.col()), it.value());
        }
}

} // namespace

ColMat SaddleSystem::matrix() const {
    const int nu = n_u(), nw = n_w(), np = n_p();
    std::vector<Trip> t;
    t.reserve(A.nonZeros() + C.nonZeros() + D.nonZeros() + E.nonZeros() + 2 * B.nonZeros() + 2 * np);
    push_block(t, A, 0, 0);
    if (nw) {
        push_block(t, D, 0, nu);
        push_block(t, E, nu, 0);
        push_block(t, C, nu, nu);
    }
    push_block(t, B, nu + nw, 0);
    push_block(t, B, 0, nu + nw, true);
    const int l = nu + nw + np;
    for (int i = 0; i < np; ++i) {
        t.emplace_back(nu + nw + i, l, mean[i]);
        t.emplace_back(l, nu + nw + i, mean[i]);
    }
    ColMat K(size(), size());
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

Vec SaddleSystem::apply(const Vec &x) const {
    const int nu = n_u(), nw = n_w(), np = n_p();
    Vec y = Vec::Zero(size());
    auto u = x.segment(0, nu);
    auto p = x.segment(nu + nw, np);
    const double l = x[nu + nw + np];
    y.segment(0, nu) = A * u + B.transpose() * p;
    if (nw) {
        auto w = x.segment(nu, nw);
        y.segment(0, nu) += D * w;
        y.segment(nu, nw) = E * u + C * w;
    }
    y.segment(nu + nw, np) = B * u + l * mean;
    y[nu + nw + np] = mean.dot(p);
    return y;
}

Vec SaddleSystem::apply_augmented(const Vec &x) const {
    Vec y = apply(x);
    if (krylov && krylov->p_aug.size())
        y.head(n_u()) += B.transpose() * krylov->p_aug.cwiseProduct(y.segment(n_u() + n_w(), n_p()));
    return y;
}

struct SaddleFactorization::Impl {
    ColMat K;
    Eigen::UmfPackLU<ColMat> lu;
};

SaddleFactorization::SaddleFactorization(const SaddleSystem &system)
    : sys_(&system), impl_(std::make_unique<Impl>()) {
    impl_->K = system.matrix();
    impl_->lu.umfpackControl()[UMFPACK_ORDERING] = UMFPACK_ORDERING_METIS;
    impl_->lu.compute(impl_->K);
    if (impl_->lu.info() != Eigen::Success)
        throw SingularSystem("LU factorization failed (singular matrix or out of memory)");
}

SaddleFactorization::~SaddleFactorization() = default;

Vec SaddleFactorization::solve(const Vec &b) const {
    Vec x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success || !x.allFinite()) throw SingularSystem("LU solve failed");
    return x;
}

namespace {

SaddleSolution pack(const SaddleSystem &s, const Eigen::MatrixXd &X) {
    const int nu = s.n_u(), nw = s.n_w(), np = s.n_p();
    SaddleSolution out;
    out.u = X.topRows(nu);
    out.w = X.middleRows(nu, nw);
    out.p = X.middleRows(nu + nw, np);
    out.multiplier = X.row(nu + nw + np).transpose();
    return out;
}

} // namespace

using Cholmod = Eigen::CholmodSupernodalLLT<ColMat>;

// (p, l) from the lumped-mass Schur complement, then u, then w using the E coupling
struct SaddlePreconditioner::Impl {
    explicit Impl(const SaddleSystem &s) : s_(s), k_(*s.krylov) {
        factor(lu_, k_.Lu);
        if (s.n_w()) factor(lw_, k_.Lw);
        inv_d_ = k_.p_diag.cwiseInverse();
        mdm_ = s.mean.dot(inv_d_.cwiseProduct(s.mean));
    }

    Vec apply(const Vec &r) const {
        const int nu = s_.n_u(), nw = s_.n_w(), np = s_.n_p();
        Vec z(r.size());
        auto rp = r.segment(nu + nw, np);
        const double rl = r[nu + nw + np];
        const double zl = (rl + s_.mean.dot(inv_d_.cwiseProduct(rp))) / mdm_;
        Vec zp = inv_d_.cwiseProduct(zl * s_.mean - rp);
        z.segment(nu + nw, np) = zp;
        z[nu + nw + np] = zl;
        Vec zu = block(lu_, k_.Tu, r.head(nu) - s_.B.transpose() * zp);
        z.head(nu) = zu;
        if (nw) z.segment(nu, nw) = block(lw_, k_.Tw, r.segment(nu, nw) - s_.E * zu);
        return z;
    }

    static void factor(Cholmod &c, const SpMat &L) {
        ColMat m = L;
        c.compute(m);
        if (c.info() != Eigen::Success) throw SingularSystem("preconditioner factorization failed");
    }

    static Vec block(const Cholmod &c, const SpMat &T, const Vec &r) {
        Vec t = T * r;
        const Eigen::Index ns = t.size() / 3;
        using Rows3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
        Eigen::MatrixXd cols = Eigen::Map<const Rows3>(t.data(), ns, 3);
        Eigen::MatrixXd y = c.solve(cols);
        Eigen::Map<Rows3>(t.data(), ns, 3) = y;
        return T.transpose() * t;
    }

    const SaddleSystem &s_;
    const KrylovBlocks &k_;
    Cholmod lu_, lw_;
    Vec inv_d_;
    double mdm_ = 0;
};

SaddlePreconditioner::SaddlePreconditioner(const SaddleSystem &system) {
    if (!system.krylov) throw IncompatibleConstraints("system carries no preconditioner blocks");
    impl_ = std::make_unique<Impl>(system);
}

namespace {

// restarted GMRES on the augmented operator, right preconditioned
Vec gmres(const SaddleSystem &s, const SaddlePreconditioner &M, const Vec &b, const SolveOptions &o, double &rel,
          int &iterations) {
    const Eigen::Index n = b.size();
    const int m = o.gmres_restart;
    const double bn = b.norm();
    Vec x = Vec::Zero(n);
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Vec cs(m), sn(m), g(m + 1);
    iterations = 0;
    Vec r = b;
    rel = 1;
    double inner = 0.1 * o.tolerance; // tightened while the plain residual lags
    while (iterations < o.gmres_max_iterations) {
        // stop on the plain residual; the augmented one can be smaller
        if (iterations > 0) {
            rel = (b - s.apply(x)).norm() / bn;
            if (rel > o.tolerance && r.norm() <= inner * bn) inner = 0.1 * r.norm() / bn;
        }
        if (rel <= o.tolerance) break;
        const double beta = r.norm();
        V.col(0) = r / beta;
        g.setZero();
        g[0] = beta;
        H.setZero();
        int k = 0;
        for (; k < m && iterations < o.gmres_max_iterations; ++k, ++iterations) {
            Vec w = s.apply_augmented(M.apply(V.col(k)));
            for (int pass = 0; pass < 2; ++pass)
                for (int j = 0; j <= k; ++j) {
                    const double h = V.col(j).dot(w);
                    H(j, k) += h;
                    w -= h * V.col(j);
                }
            H(k + 1, k) = w.norm();
            if (H(k + 1, k) > 0) V.col(k + 1) = w / H(k + 1, k);
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
                H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
                H(j, k) = t;
            }
            const double d = std::hypot(H(k, k), H(k + 1, k));
            cs[k] = H(k, k) / d;
            sn[k] = H(k + 1, k) / d;
            H(k, k) = d;
            H(k + 1, k) = 0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            if (std::abs(g[k + 1]) <= inner * bn) {
                ++k;
                ++iterations;
                break;
            }
        }
        Vec y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        x += M.apply(V.leftCols(k) * y);
        r = b - s.apply_augmented(x);
        if (o.verbose) std::fprintf(stderr, "gmres %d iterations, residual %.3e\n", iterations, r.norm() / bn);
    }
    rel = (b - s.apply(x)).norm() / bn;
    return x;
}

} // namespace

SaddlePreconditioner::~SaddlePreconditioner() = default;

Vec SaddlePreconditioner::apply(const Vec &r) const { return impl_->apply(r); }

SaddleSolution solve_saddle(const SaddleSystem &system, const SolveOptions &options) {
    const int n = system.size();
    const int nx = system.n_u() + system.n_w();
    const int m = int(system.rhs.cols());
    if (system.rhs.rows() != nx) throw MeshMismatch("right-hand side size does not match the system");
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, m);
    std::vector<double> res(m, 0.0);
    std::string method;
    if (n <= options.direct_limit || !system.krylov) {
        method = "umfpack";
        SaddleFactorization lu(system);
        for (int j = 0; j < m; ++j) {
            Vec b = Vec::Zero(n);
            b.head(nx) = system.rhs.col(j);
            const double bn = b.norm();
            if (bn == 0) continue;
            Vec x = lu.solve(b);
            Vec r = b - system.apply(x);
            for (int s = 0; s < options.refinement_steps && r.norm() > 1e-3 * options.tolerance * bn; ++s) {
                x += lu.solve(r);
                r = b - system.apply(x);
            }
            res[j] = r.norm() / bn;
            X.col(j) = x;
        }
    } else {
        method = "gmres";
        SaddlePreconditioner M(system);
        for (int j = 0; j < m; ++j) {
            Vec b = Vec::Zero(n);
            b.head(nx) = system.rhs.col(j);
            if (b.norm() == 0) continue;
            int it = 0;
            X.col(j) = gmres(system, M, b, options, res[j], it);
        }
    }
    for (int j = 0; j < m; ++j)
        if (!(res[j] <= options.tolerance)) throw SolverBreakdown("saddle residual above tolerance", res[j]);
    SaddleSolution out = pack(system, X);
    out.residual = res;
    out.method = method;
    return out;
}

} // namespace microdarcy
