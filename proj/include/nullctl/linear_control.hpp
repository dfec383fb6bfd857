#pragma once

#include <cmath>
#include <memory>
#include <string>

#include <Eigen/SparseCholesky>

#include "fem_assembly.hpp"
#include "saddle_solver.hpp"
#include "state.hpp"

namespace nullctl {

enum class Derivative { none, dt, grad, second };

// int_Q rho^2 |D F|^2 with the scaled weights of the assembly.
inline double weighted_norm(const Discretization& D, const FieldFunction& F, const WeightExponents& e,
                            Derivative d = Derivative::none) {
    if (d == Derivative::second) throw UnsupportedDerivative("second derivatives vanish on P1 elements");
    double sum = 0;
    for (int el = 0; el < D.ntets(); ++el)
        for (int q = 0; q < D.nq(); ++q) {
            const QuadPoint& Q = D.qp(el, q);
            double rho2 = std::exp(2 * scaled_mu_log(e, Q.t, D.setup()));
            double s = 0;
            for (int c = 0; c < F.components(); ++c) {
                if (d == Derivative::none) {
                    double v = D.value(F, el, Q, c);
                    s += v * v;
                } else {
                    Eigen::Vector3d g = D.gradient(F, el, Q, c);
                    s += d == Derivative::dt ? g[0] * g[0] : g[1] * g[1] + g[2] * g[2];
                }
            }
            sum += Q.w * rho2 * s;
        }
    return sum;
}

inline double weighted_norm(const Discretization& D, const FieldFunction& F, std::string_view weight,
                            Derivative d = Derivative::none) {
    return weighted_norm(D, F, named_weight(weight), d);
}

// Spatial L2 norm of component `comp` (or all components if comp < 0) on the plane t = t_level.
inline double level_norm(const Discretization& D, const FieldFunction& F, int level, int comp = -1) {
    const auto& M = D.mesh();
    const TriRule R = tri_rule_7();
    double sum = 0;
    for (const auto& tri : M.level_triangles(level)) {
        const auto& p0 = M.vertices[tri[0]];
        const auto& p1 = M.vertices[tri[1]];
        const auto& p2 = M.vertices[tri[2]];
        double area = 0.5 * std::abs((p1[1] - p0[1]) * (p2[2] - p0[2]) - (p2[1] - p0[1]) * (p1[2] - p0[2]));
        for (size_t q = 0; q < R.weights.size(); ++q) {
            double x1 = 0, x2 = 0;
            for (int A = 0; A < 3; ++A) {
                x1 += R.points[q][A] * M.vertices[tri[A]][1];
                x2 += R.points[q][A] * M.vertices[tri[A]][2];
            }
            double mod = 1.0;
            if (F.space == Space::state) mod = D.level_r3inv(level);
            if (F.space == Space::control) mod = -chi_smooth(x1, x2, D.domain(), D.cutoff()) / D.level_r4(level);
            for (int c = 0; c < F.components(); ++c) {
                if (comp >= 0 && c != comp) continue;
                double v = 0;
                for (int A = 0; A < 3; ++A) v += R.points[q][A] * F.coef(tri[A], c);
                v *= mod;
                sum += R.weights[q] * area * v * v;
            }
        }
    }
    return std::sqrt(sum);
}

inline double terminal_norm(const Discretization& D, const FieldFunction& y) {
    return level_norm(D, y, D.mesh().nt);
}

// Field restricted to the t = 0 plane, for comparison with initial data.
inline FieldFunction initial_trace(const Discretization& D, const FieldFunction& F) {
    int n = D.mesh().per_level();
    FieldFunction out = FieldFunction::zeros(Space::initial, n, F.components());
    for (int v = 0; v < n; ++v)
        for (int c = 0; c < F.components(); ++c) out.coef(v, c) = D.node_value(F, v, c);
    return out;
}

// L2 norm and H1 seminorm (discrete P1 gradients) of a field on the t = 0 plane.
inline std::array<double, 2> plane_norms(const Discretization& D, const FieldFunction& g) {
    const auto& M = D.mesh();
    const TriRule R = tri_rule_3();
    double l2 = 0, h1 = 0;
    for (const auto& tri : M.level_triangles(0)) {
        const auto& p0 = M.vertices[tri[0]];
        const auto& p1 = M.vertices[tri[1]];
        const auto& p2 = M.vertices[tri[2]];
        Eigen::Matrix2d J;
        J << p1[1] - p0[1], p2[1] - p0[1], p1[2] - p0[2], p2[2] - p0[2];
        double area = 0.5 * std::abs(J.determinant());
        Eigen::Matrix2d Jit = J.inverse().transpose();
        for (int c = 0; c < g.components(); ++c) {
            Eigen::Vector2d dref(g.coef(tri[1], c) - g.coef(tri[0], c), g.coef(tri[2], c) - g.coef(tri[0], c));
            Eigen::Vector2d grad = Jit * dref;
            h1 += area * grad.squaredNorm();
            for (size_t q = 0; q < R.weights.size(); ++q) {
                double v = 0;
                for (int A = 0; A < 3; ++A) v += R.points[q][A] * g.coef(tri[A], c);
                l2 += R.weights[q] * area * v * v;
            }
        }
    }
    return {std::sqrt(l2), std::sqrt(h1)};
}

// sup over P1 scalars q vanishing on the lateral boundary of |int_Q y . grad_x q| / ||q||_H1(Q).
inline double weak_divergence_residual(const Discretization& D, const FieldFunction& y) {
    const auto& M = D.mesh();
    std::vector<int> idx(D.nv(), -1);
    int n = 0;
    for (int v = 0; v < D.nv(); ++v)
        if (!M.is_lateral(v)) idx[v] = n++;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    std::vector<Triplet> t;
    for (int e = 0; e < D.ntets(); ++e) {
        const auto& tet = M.tets[e];
        const auto& g = D.geo(e);
        for (int q = 0; q < D.nq(); ++q) {
            const QuadPoint& Q = D.qp(e, q);
            double y1 = D.value(y, e, Q, 0), y2 = D.value(y, e, Q, 1);
            for (int A = 0; A < 4; ++A) {
                if (idx[tet[A]] < 0) continue;
                r[idx[tet[A]]] += Q.w * (y1 * g.grad(A, 1) + y2 * g.grad(A, 2));
                for (int B = 0; B < 4; ++B)
                    if (idx[tet[B]] >= 0)
                        t.emplace_back(idx[tet[A]], idx[tet[B]],
                                       Q.w * (Q.phi[A] * Q.phi[B] + g.grad.row(A).dot(g.grad.row(B))));
            }
        }
    }
    SpMat G(n, n);
    G.setFromTriplets(t.begin(), t.end());
    Eigen::SimplicialLDLT<SpMat> chol(G);
    Eigen::VectorXd z = chol.solve(r);
    return std::sqrt(std::max(0.0, r.dot(z)));
}

struct LinearDiagnostics {
    double terminal_norm = 0;
    double y0_norm = 0;
    double rho3_energy = 0; // int rho3^2 |y|^2
    double rho4_energy = 0; // int rho4^2 |v|^2 over omega
    double rho6_energy = 0;
    double rho6_grad_energy = 0;
    double kappa0 = 0;
    double kappa1 = 0;
    double u_plus_lambda = 0; // ||u + lambda||_inf / ||u||_inf
};

struct LinearControlSolution {
    FieldFunction u, m, k, lambda, mu;
    StateTriple state; // (y, p_state, v)
    LinearDiagnostics diag;
    SolveReport report;
};

struct LinearControlOptions {
    AssemblyOptions assembly;
    SolverOptions solver;
    bool diagnostics = true;
};

// Assembles and factors the mixed system once; solves for any (f, y0).
class LinearControlSolver {
public:
    LinearControlSolver(std::shared_ptr<const Discretization> D, LinearControlOptions opt = {})
        : D_(std::move(D)), opt_(opt) {
        FieldFunction none{Space::plain, {}};
        FieldFunction none0{Space::initial, {}};
        sys_ = assemble_system(*D_, opt_.assembly, none, none0);
        con_ = apply_constraints(sys_);
        fact_ = std::make_unique<SaddleFactorization>(con_.K, opt_.solver);
    }

    const Discretization& disc() const { return *D_; }
    std::shared_ptr<const Discretization> disc_ptr() const { return D_; }
    const AssembledSaddleSystem& system() const { return sys_; }
    const ConstrainedSystem& constrained() const { return con_; }

    // f: plain field on Q (0 columns for zero); y0: field on the t = 0 plane.
    LinearControlSolution solve(const FieldFunction& f, const FieldFunction& y0) const {
        const Discretization& D = *D_;
        const FeLayout L = sys_.layout;
        Eigen::VectorXd full_rhs = assemble_rhs(D, f, y0);
        Eigen::VectorXd b = con_.restrict_rhs(full_rhs);
        LinearControlSolution S;
        Eigen::VectorXd x = fact_->solve(b, &S.report);
        Eigen::VectorXd X = con_.expand(x);
        const int nv = L.nv;
        auto block = [&](int f0, int nc, Space s) {
            FieldFunction F = FieldFunction::zeros(s, nv, nc);
            for (int c = 0; c < nc; ++c) F.coef.col(c) = X.segment(L.index(f0 + c, 0), nv);
            return F;
        };
        S.u = block(U1, 2, Space::plain);
        S.m = block(M1, 2, Space::plain);
        S.k = block(K, 1, Space::plain);
        S.lambda = block(L1, 2, Space::plain);
        S.mu = block(MU, 1, Space::plain);
        S.state.y = FieldFunction{Space::state, S.u.coef};
        S.state.p = FieldFunction{Space::state, S.mu.coef};
        S.state.v = FieldFunction{Space::control, S.m.coef};
        double un = S.u.coef.cwiseAbs().maxCoeff();
        double sn = (S.u.coef + S.lambda.coef).cwiseAbs().maxCoeff();
        S.diag.u_plus_lambda = un > 0 ? sn / un : sn;
        if (opt_.diagnostics) fill_diagnostics(S, f, y0);
        return S;
    }

private:
    void fill_diagnostics(LinearControlSolution& S, const FieldFunction& f, const FieldFunction& y0) const {
        const Discretization& D = *D_;
        auto& d = S.diag;
        d.terminal_norm = terminal_norm(D, S.state.y);
        d.rho3_energy = weighted_norm(D, S.state.y, kRho3);
        d.rho4_energy = weighted_norm(D, S.state.v, kRho4);
        d.rho6_energy = weighted_norm(D, S.state.y, "rho6");
        d.rho6_grad_energy = weighted_norm(D, S.state.y, "rho6", Derivative::grad);
        double fsrc = f.components() > 0 ? weighted_norm(D, f, "rho0") : 0.0;
        if (y0.components() > 0) {
            auto n = plane_norms(D, y0);
            d.y0_norm = n[0];
            d.kappa0 = n[0] * n[0] + fsrc;
            d.kappa1 = n[1] * n[1] + fsrc;
        } else {
            d.kappa0 = d.kappa1 = fsrc;
        }
    }

    std::shared_ptr<const Discretization> D_;
    LinearControlOptions opt_;
    AssembledSaddleSystem sys_;
    ConstrainedSystem con_;
    std::unique_ptr<SaddleFactorization> fact_;
};

} // namespace nullctl
