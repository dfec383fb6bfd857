#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "fem_assembly.hpp"
#include "linear_control.hpp"
#include "state.hpp"

namespace nullctl {

enum class TensorMode { gradient, deformation };
enum class LawKind { power, bounded_power };

struct ConstitutiveLaw {
    double nu0 = 100.0;
    double nu1 = 0.01;
    double r_exp = 2.0;
    TensorMode tensor_mode = TensorMode::gradient;
    LawKind law_kind = LawKind::power;

    // allow_any_r downgrades an inadmissible power-law exponent to a warning
    void validate(bool allow_any_r = false) const {
        if (!(nu0 > 0)) throw ValidationError("law.nu0 must be positive");
        if (!(nu1 >= 0)) throw ValidationError("law.nu1 must be nonnegative");
        if (!(r_exp > 0)) throw ValidationError("law.r must be positive");
        if (law_kind == LawKind::power && !(r_exp == 1 || r_exp == 2 || r_exp >= 3)) {
            if (!allow_any_r) throw ValidationError("power law requires r in {1,2} or r >= 3");
            std::cerr << "warning: power law with r = " << r_exp << " outside {1,2} u [3,inf)\n";
        }
    }
};

inline Eigen::Matrix2d law_argument(const Eigen::Matrix2d& G, const ConstitutiveLaw& law) {
    return law.tensor_mode == TensorMode::deformation ? Eigen::Matrix2d(0.5 * (G + G.transpose())) : G;
}

inline double viscosity(const Eigen::Matrix2d& A, const ConstitutiveLaw& law) {
    double n = A.norm();
    if (law.law_kind == LawKind::power) return law.nu0 + (n > 0 ? law.nu1 * std::pow(n, law.r_exp) : 0.0);
    return law.nu0 * std::pow(1.0 + law.nu1 * n * n, 0.5 * law.r_exp);
}

// d nu / d A (Frobenius pairing); |A| <= 1e-12 counts as zero
inline Eigen::Matrix2d viscosity_derivative(const Eigen::Matrix2d& A, const ConstitutiveLaw& law) {
    double n = A.norm();
    if (law.law_kind == LawKind::power) {
        if (n <= 1e-12 || law.nu1 == 0) return Eigen::Matrix2d::Zero();
        return law.nu1 * law.r_exp * std::pow(n, law.r_exp - 2) * A;
    }
    return law.nu0 * law.r_exp * law.nu1 * std::pow(1.0 + law.nu1 * n * n, 0.5 * law.r_exp - 1) * A;
}

// Empirical C in |D^k nu(A)| <= C (1 + |A|^{(r-k)+}) over |A| in [1e-3, 1e3].
inline double growth_check(const ConstitutiveLaw& law, int k, int samples = 600, unsigned seed = 7) {
    if (k < 0 || k > 3) throw std::invalid_argument("growth_check: k must be in 0..3");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0, 1);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    auto rand_unit = [&] {
        Eigen::Matrix2d E;
        E << N(rng), N(rng), N(rng), N(rng);
        return Eigen::Matrix2d(E / E.norm());
    };
    auto f = [&](const Eigen::Matrix2d& A) { return viscosity(A, law); };
    auto dk = [&](const Eigen::Matrix2d& A, const Eigen::Matrix2d& E, double h) {
        switch (k) {
        case 0: return f(A);
        case 1: return (f(A + h * E) - f(A - h * E)) / (2 * h);
        case 2: return (f(A + h * E) - 2 * f(A) + f(A - h * E)) / (h * h);
        default:
            return (f(A + 2 * h * E) - 2 * f(A + h * E) + 2 * f(A - h * E) - f(A - 2 * h * E)) / (2 * h * h * h);
        }
    };
    const double pw = std::max(law.r_exp - k, 0.0);
    std::map<int, double> decade_max;
    double C = 0;
    for (int s = 0; s < samples; ++s) {
        double mag = std::pow(10.0, U(rng));
        Eigen::Matrix2d A = mag * rand_unit();
        // third differences are roundoff-bound below ~0.2 since nu carries the nu0 offset
        double h = 0.05 * std::max(mag, k == 3 ? 0.2 : 1e-3);
        double d = std::abs(dk(A, A / mag, h));
        for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(dk(A, rand_unit(), h)));
        double ratio = d / (1.0 + std::pow(mag, pw));
        int dec = static_cast<int>(std::floor(std::log10(mag)));
        decade_max[dec] = std::max(decade_max[dec], ratio);
        C = std::max(C, ratio);
    }
    std::vector<double> vals;
    for (auto& [dec, v] : decade_max) vals.push_back(v);
    std::vector<double> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    double floor = std::max(median, 1e-6 * (law.nu0 + law.nu1));
    if (vals.front() > 100 * floor || vals.back() > 100 * floor)
        throw GrowthViolation("D^" + std::to_string(k) + " nu ratio grows across decades (" +
                              std::to_string(vals.front()) + " .. " + std::to_string(vals.back()) +
                              ", median " + std::to_string(median) + ")");
    return C;
}

struct ResidualPair {
    FieldFunction f_res{Space::plain, {}}; // vector field on Q, zero on the lateral boundary
    FieldFunction g0{Space::initial, {}};  // vector field on the t = 0 plane
};

// Discrete H(y,p,v) = (weak residual of the momentum equation, y(0)) and its derivative.
// Test functions are rho4 * (P1 hat functions vanishing on the lateral boundary); the time
// derivative is integrated by parts, which leaves the trace terms at t = 0 and t = T.
class NonlinearModel {
public:
    NonlinearModel(std::shared_ptr<const Discretization> D, ConstitutiveLaw law, bool include_convection)
        : D_(std::move(D)), law_(law), convection_(include_convection) {
        const auto& M = D_->mesh();
        idx_.assign(D_->nv(), -1);
        for (int v = 0; v < D_->nv(); ++v)
            if (!M.is_lateral(v)) idx_[v] = n_int_++;
        std::vector<Triplet> t;
        for (int e = 0; e < D_->ntets(); ++e) {
            const auto& tet = M.tets[e];
            double loc[4][4] = {};
            for (int q = 0; q < D_->nq(); ++q) {
                const QuadPoint& Q = D_->qp(e, q);
                for (int A = 0; A < 4; ++A)
                    for (int B = 0; B < 4; ++B) loc[A][B] += Q.w * Q.r4 * Q.phi[A] * Q.phi[B];
            }
            for (int A = 0; A < 4; ++A)
                for (int B = 0; B < 4; ++B)
                    if (idx_[tet[A]] >= 0 && idx_[tet[B]] >= 0) t.emplace_back(idx_[tet[A]], idx_[tet[B]], loc[A][B]);
        }
        SpMat Mw(n_int_, n_int_);
        Mw.setFromTriplets(t.begin(), t.end());
        mass_.compute(Mw);
        if (mass_.info() != Eigen::Success) throw SingularSystemError("weighted mass matrix factorization failed");
    }

    const ConstitutiveLaw& law() const { return law_; }
    bool convection() const { return convection_; }
    const Discretization& disc() const { return *D_; }

    // Load vector (interior rows x 2) of the weak residual of the state equation.
    Eigen::MatrixXd residual_load(const StateTriple& s) const {
        return load(s, nullptr);
    }
    Eigen::MatrixXd derivative_load(const StateTriple& base, const StateTriple& dir) const {
        return load(base, &dir);
    }

    ResidualPair residual_H(const StateTriple& s, const FieldFunction& y0) const {
        ResidualPair R;
        R.f_res = invert(residual_load(s));
        R.g0 = initial_trace(*D_, s.y);
        if (y0.components() > 0) R.g0.coef -= y0.coef;
        return R;
    }

    ResidualPair apply_DH(const StateTriple& base, const StateTriple& dir) const {
        ResidualPair R;
        R.f_res = invert(derivative_load(base, dir));
        R.g0 = initial_trace(*D_, dir.y);
        return R;
    }

    FieldFunction invert(const Eigen::MatrixXd& L) const {
        FieldFunction f = FieldFunction::zeros(Space::plain, D_->nv(), 2);
        for (int c = 0; c < 2; ++c) {
            Eigen::VectorXd x = mass_.solve(Eigen::VectorXd(L.col(c)));
            for (int v = 0; v < D_->nv(); ++v)
                if (idx_[v] >= 0) f.coef(v, c) = x[idx_[v]];
        }
        return f;
    }

    int interior_index(int v) const { return idx_[v]; }
    int num_interior() const { return n_int_; }

private:
    struct Local {
        Eigen::Vector2d y;
        Eigen::Matrix2d G; // G(i,j) = d y_i / d x_j
        double p;
        Eigen::Vector2d v;
    };

    Local eval(const StateTriple& s, int e, const QuadPoint& Q) const {
        Local L;
        for (int c = 0; c < 2; ++c) {
            Eigen::Vector3d g = D_->gradient(s.y, e, Q, c);
            L.y[c] = D_->value(s.y, e, Q, c);
            L.G(c, 0) = g[1];
            L.G(c, 1) = g[2];
            L.v[c] = D_->value(s.v, e, Q, c);
        }
        L.p = D_->value(s.p, e, Q, 0);
        return L;
    }

    // dir == nullptr: residual at s; otherwise derivative at s applied to *dir.
    Eigen::MatrixXd load(const StateTriple& s, const StateTriple* dir) const {
        const Discretization& D = *D_;
        const auto& M = D.mesh();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_int_, 2);
        for (int e = 0; e < D.ntets(); ++e) {
            const auto& tet = M.tets[e];
            bool any = false;
            for (int A = 0; A < 4; ++A) any = any || idx_[tet[A]] >= 0;
            if (!any) continue;
            const auto& g = D.geo(e).grad;
            for (int q = 0; q < D.nq(); ++q) {
                const QuadPoint& Q = D.qp(e, q);
                Local b = eval(s, e, Q);
                Eigen::Vector2d y, v, conv;
                Eigen::Matrix2d S;
                double p;
                Eigen::Matrix2d Ab = law_argument(b.G, law_);
                if (!dir) {
                    y = b.y;
                    v = b.v;
                    p = b.p;
                    S = viscosity(Ab, law_) * b.G;
                    conv = b.G * b.y;
                } else {
                    Local d = eval(*dir, e, Q);
                    y = d.y;
                    v = d.v;
                    p = d.p;
                    Eigen::Matrix2d Ad = law_argument(d.G, law_);
                    double dnu = (viscosity_derivative(Ab, law_).array() * Ad.array()).sum();
                    S = viscosity(Ab, law_) * d.G + dnu * b.G;
                    conv = d.G * b.y + b.G * d.y;
                }
                for (int A = 0; A < 4; ++A) {
                    int i = idx_[tet[A]];
                    if (i < 0) continue;
                    double w = Q.r4 * Q.phi[A];
                    double wt = Q.r4 * g(A, 0) + Q.r4dt * Q.phi[A];
                    double wx[2] = {Q.r4 * g(A, 1), Q.r4 * g(A, 2)};
                    for (int c = 0; c < 2; ++c) {
                        double val = -y[c] * wt + S(c, 0) * wx[0] + S(c, 1) * wx[1] - p * wx[c] -
                                     Q.chi_om * v[c] * w;
                        if (convection_) val += conv[c] * w;
                        out(i, c) += Q.w * val;
                    }
                }
            }
        }
        // - int_Omega y(0) . w(0)
        const FieldFunction& yy = dir ? dir->y : s.y;
        const double r40 = D.level_r4(0), r30 = D.level_r3inv(0);
        const TriRule R = tri_rule_3();
        for (const auto& face : M.faces) {
            if (face.tag != FaceTag::initial) continue;
            const auto& p0 = M.vertices[face.v[0]];
            const auto& p1 = M.vertices[face.v[1]];
            const auto& p2 = M.vertices[face.v[2]];
            double area = 0.5 * std::abs((p1[1] - p0[1]) * (p2[2] - p0[2]) - (p2[1] - p0[1]) * (p1[2] - p0[2]));
            for (size_t q = 0; q < R.weights.size(); ++q)
                for (int c = 0; c < 2; ++c) {
                    double yv = 0;
                    for (int A = 0; A < 3; ++A) yv += R.points[q][A] * yy.coef(face.v[A], c);
                    yv *= r30;
                    for (int A = 0; A < 3; ++A) {
                        int i = idx_[face.v[A]];
                        if (i >= 0) out(i, c) -= R.weights[q] * area * yv * r40 * R.points[q][A];
                    }
                }
        }
        return out;
    }

    std::shared_ptr<const Discretization> D_;
    ConstitutiveLaw law_;
    bool convection_;
    std::vector<int> idx_;
    int n_int_ = 0;
    Eigen::SimplicialLDLT<SpMat> mass_;
};

} // namespace nullctl
