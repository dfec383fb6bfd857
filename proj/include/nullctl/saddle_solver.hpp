#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "errors.hpp"

namespace nullctl {

enum class SolverMethod { direct, minres };

struct SolverOptions {
    double tol = 1e-10;
    SolverMethod method = SolverMethod::direct;
    int max_iter = 20000;
    int refine_steps = 3;
};

struct SolveReport {
    double relres = 0;
    std::string method;
    int iterations = 0;     // refinement steps (direct) or Krylov iterations
    double factor_seconds = 0;
    double solve_seconds = 0;
};

// Inverse column 2-norms; a positive diagonal, as minimum-residual iterations require.
class ColumnNormPreconditioner : public Eigen::DiagonalPreconditioner<double> {
public:
    template <typename MatType>
    ColumnNormPreconditioner& analyzePattern(const MatType&) { return *this; }
    template <typename MatType>
    ColumnNormPreconditioner& factorize(const MatType& mat) {
        m_invdiag.resize(mat.cols());
        for (Eigen::Index j = 0; j < mat.outerSize(); ++j) {
            double s = 0;
            for (typename MatType::InnerIterator it(mat, j); it; ++it) s += it.value() * it.value();
            m_invdiag(j) = s > 0 ? 1.0 / std::sqrt(s) : 1.0;
        }
        m_isInitialized = true;
        return *this;
    }
    template <typename MatType>
    ColumnNormPreconditioner& compute(const MatType& mat) { return factorize(mat); }
};

namespace detail {
inline std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}
} // namespace detail

using DirectLU = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
inline constexpr const char* kDirectName = "sparse-lu";

// Symmetric Ruiz scaling followed by a sparse LU (or MINRES) on the scaled matrix.
// The factorization is reused across right-hand sides.
class SaddleFactorization {
public:
    using SpMat = Eigen::SparseMatrix<double>;

    SaddleFactorization(const SpMat& K, SolverOptions opt = {}) : K_(K), opt_(opt) {
        auto t0 = std::chrono::steady_clock::now();
        const Eigen::Index n = K.rows();
        d_ = Eigen::VectorXd::Ones(n);
        Ks_ = K;
        for (int it = 0; it < 20; ++it) {
            Eigen::VectorXd cm = Eigen::VectorXd::Zero(n);
            for (Eigen::Index j = 0; j < Ks_.outerSize(); ++j)
                for (SpMat::InnerIterator e(Ks_, j); e; ++e) cm[j] = std::max(cm[j], std::abs(e.value()));
            double worst = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                double c = cm[j] > 0 ? 1.0 / std::sqrt(cm[j]) : 1.0;
                worst = std::max(worst, std::abs(1.0 - cm[j]));
                d_[j] *= c;
                cm[j] = c;
            }
            if (worst < 1e-3) break;
            Ks_ = cm.asDiagonal() * Ks_ * cm.asDiagonal();
        }
        Ks_ = d_.asDiagonal() * K_ * d_.asDiagonal();
        Ks_.makeCompressed();
        if (opt_.method == SolverMethod::direct) {
            lu_ = std::make_unique<DirectLU>();
            lu_->analyzePattern(Ks_);
            lu_->factorize(Ks_);
            if (lu_->info() != Eigen::Success) throw SingularSystemError("sparse LU factorization failed");
        } else {
            minres_ = std::make_unique<Eigen::MINRES<SpMat, Eigen::Lower | Eigen::Upper, ColumnNormPreconditioner>>();
            minres_->setMaxIterations(opt_.max_iter);
            minres_->setTolerance(0.1 * opt_.tol);
            minres_->compute(Ks_);
        }
        factor_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveReport* rep = nullptr) const {
        auto t0 = std::chrono::steady_clock::now();
        SolveReport R;
        R.factor_seconds = factor_seconds_;
        double bn = b.norm();
        Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
        if (bn == 0) {
            R.method = opt_.method == SolverMethod::direct ? kDirectName : "minres";
            if (rep) *rep = R;
            return x;
        }
        if (opt_.method == SolverMethod::direct) {
            R.method = kDirectName;
            Eigen::VectorXd r = b;
            for (int step = 0; step <= opt_.refine_steps; ++step) {
                Eigen::VectorXd sr = d_.cwiseProduct(r);
                Eigen::VectorXd dx = lu_->solve(sr);
                x += d_.cwiseProduct(dx);
                r = residual(b, x);
                R.relres = r.norm() / bn;
                R.iterations = step;
                if (!std::isfinite(R.relres)) throw SingularSystemError("non-finite solution");
                if (R.relres <= 0.01 * opt_.tol) break;
            }
            if (R.relres > opt_.tol)
                throw SingularSystemError("relative residual " + detail::sci(R.relres) +
                                          " above tolerance; system numerically singular");
        } else {
            R.method = "minres";
            // the recurrence residual drifts from the true one; restart from the iterate
            Eigen::VectorXd bs = d_.cwiseProduct(b);
            Eigen::VectorXd xs = minres_->solve(bs);
            R.iterations = static_cast<int>(minres_->iterations());
            x = d_.cwiseProduct(xs);
            R.relres = (b - K_ * x).norm() / bn;
            for (int restart = 0; restart < 5 && R.relres > opt_.tol; ++restart) {
                xs = minres_->solveWithGuess(bs, xs);
                R.iterations += static_cast<int>(minres_->iterations());
                x = d_.cwiseProduct(xs);
                R.relres = (b - K_ * x).norm() / bn;
            }
            if (R.relres > opt_.tol)
                throw NoConvergence("minres stopped after " + std::to_string(R.iterations) +
                                    " iterations with relative residual " + detail::sci(R.relres));
        }
        R.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (rep) *rep = R;
        return x;
    }

    const Eigen::VectorXd& scaling() const { return d_; }

private:
    // b - K x accumulated in long double; plain double stalls refinement near eps |K||x|
    Eigen::VectorXd residual(const Eigen::VectorXd& b, const Eigen::VectorXd& x) const {
        std::vector<long double> acc(b.data(), b.data() + b.size());
        for (int j = 0; j < K_.outerSize(); ++j)
            for (SpMat::InnerIterator it(K_, j); it; ++it)
                acc[it.row()] -= static_cast<long double>(it.value()) * x[j];
        Eigen::VectorXd r(b.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = static_cast<double>(acc[i]);
        return r;
    }

    SpMat K_, Ks_;
    SolverOptions opt_;
    Eigen::VectorXd d_;
    std::unique_ptr<DirectLU> lu_;
    std::unique_ptr<Eigen::MINRES<SpMat, Eigen::Lower | Eigen::Upper, ColumnNormPreconditioner>> minres_;
    double factor_seconds_ = 0;
};

inline Eigen::VectorXd solve(const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& b,
                             SolveReport* rep = nullptr, SolverOptions opt = {}) {
    SaddleFactorization F(K, opt);
    return F.solve(b, rep);
}

} // namespace nullctl
