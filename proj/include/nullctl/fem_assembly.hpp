#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/Sparse>

#include "discretization.hpp"

namespace nullctl {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Per-vertex unknowns, stored field-major.
enum Field : int { U1 = 0, U2, M1, M2, K, L1, L2, MU };

struct FeLayout {
    int nv = 0;
    static constexpr int nfields = 8;
    int size() const { return nfields * nv; }
    int index(int field, int v) const { return field * nv + v; }
};

struct AssemblyOptions {
    double nu0 = 100.0;
    // scale of the pressure-gradient coupling between mu and k (0 disables)
    double stab_delta = 0.1;
};

struct AssembledSaddleSystem {
    FeLayout layout;
    SpMat K;
    Eigen::VectorXd rhs;
    Eigen::VectorXd node_volume; // integral of each nodal basis function over Q
    std::vector<int> level;      // time level of each vertex
    std::vector<char> lateral;   // vertex on the lateral boundary
};

// Duplicate triplets are summed in a different order for (i,j) and (j,i); averaging
// with the transpose makes the matrix symmetric bit for bit.
inline SpMat symmetrized(const SpMat& K) {
    SpMat Kt = K.transpose();
    return 0.5 * (K + Kt);
}

namespace detail {

inline double stab_eps(const Discretization& D, const AssemblyOptions& opt) {
    const auto& M = D.mesh();
    double h2 = (M.a / M.nx) * (M.b / M.ny);
    return opt.stab_delta * h2 / opt.nu0;
}

inline void b1_triplets(const Discretization& D, const FeLayout& L, std::vector<Triplet>& out) {
    for (int e = 0; e < D.ntets(); ++e) {
        const auto& tet = D.mesh().tets[e];
        double Muu[4][4] = {}, Mmm[4][4] = {};
        for (int q = 0; q < D.nq(); ++q) {
            const QuadPoint& Q = D.qp(e, q);
            for (int A = 0; A < 4; ++A)
                for (int B = 0; B < 4; ++B) {
                    double v = Q.w * Q.phi[A] * Q.phi[B];
                    Muu[A][B] += v;
                    Mmm[A][B] += Q.chi * v;
                }
        }
        for (int A = 0; A < 4; ++A)
            for (int B = 0; B < 4; ++B)
                for (int c = 0; c < 2; ++c) {
                    out.emplace_back(L.index(U1 + c, tet[A]), L.index(U1 + c, tet[B]), Muu[A][B]);
                    out.emplace_back(L.index(M1 + c, tet[A]), L.index(M1 + c, tet[B]), Mmm[A][B]);
                }
    }
}

// Rows in (lambda, mu), columns in (u, m, k).
inline void B1_triplets(const Discretization& D, const FeLayout& L, const AssemblyOptions& opt,
                        std::vector<Triplet>& out) {
    const double eps = stab_eps(D, opt);
    for (int e = 0; e < D.ntets(); ++e) {
        const auto& tet = D.mesh().tets[e];
        const auto& g = D.geo(e).grad;
        double Lu[4][4] = {}, Lm[4][4] = {}, Lk[2][4][4] = {}, Um[2][4][4] = {}, Uk[4][4] = {};
        for (int q = 0; q < D.nq(); ++q) {
            const QuadPoint& Q = D.qp(e, q);
            for (int A = 0; A < 4; ++A)
                for (int B = 0; B < 4; ++B) {
                    double pa = Q.phi[A], pb = Q.phi[B];
                    double gxx = g(A, 1) * g(B, 1) + g(A, 2) * g(B, 2);
                    Lu[A][B] += Q.w * pa * pb;
                    Lm[A][B] += Q.w * (Q.r3inv * (Q.r4 * g(B, 0) + Q.r4dt * pb) * pa -
                                       opt.nu0 * Q.r3inv * Q.r4 * gxx);
                    for (int c = 0; c < 2; ++c) {
                        Lk[c][A][B] += Q.w * Q.r4 * pa * g(B, 1 + c);
                        Um[c][A][B] -= Q.w * Q.r3inv * Q.r4 * pa * g(B, 1 + c);
                    }
                    Uk[A][B] += Q.w * eps * Q.r4 * gxx;
                }
        }
        for (int A = 0; A < 4; ++A)
            for (int B = 0; B < 4; ++B) {
                int a = tet[A], b = tet[B];
                for (int c = 0; c < 2; ++c) {
                    out.emplace_back(L.index(L1 + c, a), L.index(U1 + c, b), Lu[A][B]);
                    out.emplace_back(L.index(L1 + c, a), L.index(M1 + c, b), Lm[A][B]);
                    out.emplace_back(L.index(L1 + c, a), L.index(K, b), Lk[c][A][B]);
                    out.emplace_back(L.index(MU, a), L.index(M1 + c, b), Um[c][A][B]);
                }
                out.emplace_back(L.index(MU, a), L.index(K, b), Uk[A][B]);
            }
    }
}

} // namespace detail

inline SpMat assemble_b1(const Discretization& D) {
    FeLayout L{D.nv()};
    std::vector<Triplet> t;
    detail::b1_triplets(D, L, t);
    SpMat K(L.size(), L.size());
    K.setFromTriplets(t.begin(), t.end());
    return symmetrized(K);
}

inline SpMat assemble_B1(const Discretization& D, const AssemblyOptions& opt) {
    FeLayout L{D.nv()};
    std::vector<Triplet> t;
    detail::B1_triplets(D, L, opt, t);
    SpMat B(L.size(), L.size());
    B.setFromTriplets(t.begin(), t.end());
    return B;
}

// Load vector: m-block entries  int_Q rho4 f.m'  +  int_Omega rho4(0) y0.m'(0).
// f: plain field over all vertices (0 columns means f = 0); y0: field over the t = 0 plane.
inline Eigen::VectorXd assemble_rhs(const Discretization& D, const FieldFunction& f, const FieldFunction& y0) {
    FeLayout L{D.nv()};
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L.size());
    if (f.components() > 0) {
        for (int e = 0; e < D.ntets(); ++e) {
            const auto& tet = D.mesh().tets[e];
            for (int q = 0; q < D.nq(); ++q) {
                const QuadPoint& Q = D.qp(e, q);
                for (int c = 0; c < 2; ++c) {
                    double fv = D.value(f, e, Q, c);
                    for (int A = 0; A < 4; ++A) rhs[L.index(M1 + c, tet[A])] += Q.w * Q.r4 * fv * Q.phi[A];
                }
            }
        }
    }
    if (y0.components() > 0) {
        const auto& M = D.mesh();
        const double r40 = D.level_r4(0);
        const TriRule R = tri_rule_3();
        for (const auto& face : M.faces) {
            if (face.tag != FaceTag::initial) continue;
            const auto& p0 = M.vertices[face.v[0]];
            const auto& p1 = M.vertices[face.v[1]];
            const auto& p2 = M.vertices[face.v[2]];
            double area = 0.5 * std::abs((p1[1] - p0[1]) * (p2[2] - p0[2]) - (p2[1] - p0[1]) * (p1[2] - p0[2]));
            for (size_t q = 0; q < R.weights.size(); ++q) {
                double w = R.weights[q] * area;
                for (int c = 0; c < 2; ++c) {
                    double yv = 0;
                    for (int A = 0; A < 3; ++A) yv += R.points[q][A] * y0.coef(face.v[A], c);
                    for (int A = 0; A < 3; ++A)
                        rhs[L.index(M1 + c, face.v[A])] += w * r40 * yv * R.points[q][A];
                }
            }
        }
    }
    return rhs;
}

inline AssembledSaddleSystem assemble_system(const Discretization& D, const AssemblyOptions& opt,
                                             const FieldFunction& f, const FieldFunction& y0) {
    AssembledSaddleSystem S;
    S.layout = FeLayout{D.nv()};
    std::vector<Triplet> t, tb;
    detail::b1_triplets(D, S.layout, t);
    detail::B1_triplets(D, S.layout, opt, tb);
    t.reserve(t.size() + 2 * tb.size());
    for (const auto& x : tb) t.push_back(x);
    for (const auto& x : tb) t.emplace_back(x.col(), x.row(), x.value());
    S.K.resize(S.layout.size(), S.layout.size());
    S.K.setFromTriplets(t.begin(), t.end());
    S.K = symmetrized(S.K);
    S.rhs = assemble_rhs(D, f, y0);

    const auto& M = D.mesh();
    S.node_volume = Eigen::VectorXd::Zero(D.nv());
    for (int e = 0; e < D.ntets(); ++e)
        for (int q = 0; q < D.nq(); ++q) {
            const QuadPoint& Q = D.qp(e, q);
            for (int A = 0; A < 4; ++A) S.node_volume[M.tets[e][A]] += Q.w * Q.phi[A];
        }
    S.level.resize(D.nv());
    S.lateral.resize(D.nv());
    for (int v = 0; v < D.nv(); ++v) {
        S.level[v] = M.level_of(v);
        S.lateral[v] = M.is_lateral(v) ? 1 : 0;
    }
    return S;
}

// Lateral m, lambda dofs removed; one mean-zero row per time level for k and for mu.
struct ConstrainedSystem {
    SpMat K;
    Eigen::VectorXd rhs;
    std::vector<int> free_dofs;  // constrained index -> global index (first n_free rows)
    std::vector<int> global_to_free;
    int n_free = 0;
    int n_mult = 0;
    int n_eliminated = 0;
    int full_size = 0;

    Eigen::VectorXd restrict_rhs(const Eigen::VectorXd& full) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(n_free + n_mult);
        for (int i = 0; i < n_free; ++i) r[i] = full[free_dofs[i]];
        return r;
    }
    Eigen::VectorXd expand(const Eigen::VectorXd& x) const {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(full_size);
        for (int i = 0; i < n_free; ++i) full[free_dofs[i]] = x[i];
        return full;
    }
    // constraint count in the sense of removed dofs plus multiplier rows
    int constraint_count() const { return n_eliminated + n_mult; }
};

inline ConstrainedSystem apply_constraints(const AssembledSaddleSystem& S) {
    const FeLayout& L = S.layout;
    ConstrainedSystem C;
    C.full_size = L.size();
    C.global_to_free.assign(L.size(), -1);
    for (int f = 0; f < FeLayout::nfields; ++f) {
        bool dirichlet = f == M1 || f == M2 || f == L1 || f == L2;
        for (int v = 0; v < L.nv; ++v) {
            int g = L.index(f, v);
            if (dirichlet && S.lateral[v]) {
                ++C.n_eliminated;
                continue;
            }
            C.global_to_free[g] = static_cast<int>(C.free_dofs.size());
            C.free_dofs.push_back(g);
        }
    }
    C.n_free = static_cast<int>(C.free_dofs.size());
    int nlev = 0;
    for (int v = 0; v < L.nv; ++v) nlev = std::max(nlev, S.level[v] + 1);
    C.n_mult = 2 * nlev;

    std::vector<Triplet> t;
    t.reserve(S.K.nonZeros() + 4 * L.nv);
    for (int c = 0; c < S.K.outerSize(); ++c)
        for (SpMat::InnerIterator it(S.K, c); it; ++it) {
            int r = C.global_to_free[it.row()], cc = C.global_to_free[it.col()];
            if (r >= 0 && cc >= 0) t.emplace_back(r, cc, it.value());
        }
    for (int v = 0; v < L.nv; ++v) {
        int rk = C.n_free + S.level[v];
        int rm = C.n_free + nlev + S.level[v];
        int gk = C.global_to_free[L.index(K, v)], gm = C.global_to_free[L.index(MU, v)];
        double w = S.node_volume[v];
        t.emplace_back(rk, gk, w);
        t.emplace_back(gk, rk, w);
        t.emplace_back(rm, gm, w);
        t.emplace_back(gm, rm, w);
    }
    int n = C.n_free + C.n_mult;
    C.K.resize(n, n);
    C.K.setFromTriplets(t.begin(), t.end());
    C.K = symmetrized(C.K);
    C.rhs = C.restrict_rhs(S.rhs);
    return C;
}

// Coordinate text dump: one "row col value" line per stored entry (0-based).
inline void write_coo(std::ostream& os, const SpMat& K) {
    os.precision(17);
    os << "% " << K.rows() << ' ' << K.cols() << ' ' << K.nonZeros() << '\n';
    for (int c = 0; c < K.outerSize(); ++c)
        for (SpMat::InnerIterator it(K, c); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

} // namespace nullctl
