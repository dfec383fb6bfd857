#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "carleman_weights.hpp"
#include "domain_mesh.hpp"
#include "quadrature.hpp"

namespace nullctl {

inline constexpr WeightExponents kRho3{2, -1, 15};
inline constexpr WeightExponents kRho4{4, -3, 32};

// Which unknown a coefficient vector belongs to. The value of a field at (t,x) is
// modulation(t,x) * (P1 interpolant of the coefficients):
//   plain    -> 1                  (sources, raw mixed unknowns)
//   state    -> rho3(t)^-1         (y = rho3^-1 u, p = rho3^-1 mu)
//   control  -> -chi(x) rho4(t)^-1 (v = -chi rho4^-1 m)
//   initial  -> 1, coefficients over the vertices of the t = 0 plane only
enum class Space { plain, state, control, initial };

struct FieldFunction {
    Space space = Space::plain;
    Eigen::MatrixXd coef; // rows: vertices (or plane vertices), cols: components

    int components() const { return static_cast<int>(coef.cols()); }
    static FieldFunction zeros(Space s, int rows, int comps) {
        return {s, Eigen::MatrixXd::Zero(rows, comps)};
    }
};

struct QuadPoint {
    double t, x1, x2, w;
    std::array<double, 4> phi;
    double r3inv, r4, r4dt, chi, chi_om;
};

struct TetGeometry {
    double vol;
    Eigen::Matrix<double, 4, 3> grad; // rows: basis functions, cols: d/dt, d/dx1, d/dx2
};

// Mesh plus everything evaluated once per quadrature point.
class Discretization {
public:
    Discretization(SpaceTimeMesh mesh, BoxDomain dom, CarlemanSetup setup, CutoffSpec cutoff,
                   TetRuleKind rule = TetRuleKind::four_point)
        : mesh_(std::move(mesh)), dom_(dom), setup_(setup), cutoff_(cutoff) {
        validate_cutoff(dom_, cutoff_);
        TetRule R = tet_rule(rule);
        nq_ = static_cast<int>(R.weights.size());
        geo_.resize(mesh_.tets.size());
        qp_.resize(mesh_.tets.size() * nq_);
        for (size_t e = 0; e < mesh_.tets.size(); ++e) {
            const auto& tet = mesh_.tets[e];
            Eigen::Matrix3d J;
            for (int c = 0; c < 3; ++c)
                for (int r = 0; r < 3; ++r)
                    J(r, c) = mesh_.vertices[tet[c + 1]][r] - mesh_.vertices[tet[0]][r];
            Eigen::Matrix3d Jinv = J.inverse();
            TetGeometry& g = geo_[e];
            g.vol = std::abs(J.determinant()) / 6.0;
            g.grad.row(1) = Jinv.row(0);
            g.grad.row(2) = Jinv.row(1);
            g.grad.row(3) = Jinv.row(2);
            g.grad.row(0) = -(g.grad.row(1) + g.grad.row(2) + g.grad.row(3));
            for (int q = 0; q < nq_; ++q) {
                QuadPoint& Q = qp_[e * nq_ + q];
                Q.t = Q.x1 = Q.x2 = 0;
                for (int a = 0; a < 4; ++a) {
                    Q.phi[a] = R.points[q][a];
                    Q.t += Q.phi[a] * mesh_.vertices[tet[a]][0];
                    Q.x1 += Q.phi[a] * mesh_.vertices[tet[a]][1];
                    Q.x2 += Q.phi[a] * mesh_.vertices[tet[a]][2];
                }
                Q.w = R.weights[q] * g.vol;
                fill_weights(Q);
            }
        }
        level_r3inv_.resize(mesh_.nt + 1);
        level_r4_.resize(mesh_.nt + 1);
        for (int i = 0; i <= mesh_.nt; ++i) {
            double t = mesh_.time_of_level(i);
            level_r3inv_[i] = std::exp(-scaled_mu_log(kRho3, t, setup_));
            level_r4_[i] = std::exp(scaled_mu_log(kRho4, t, setup_));
        }
        node_chi_.resize(mesh_.num_vertices());
        for (int v = 0; v < mesh_.num_vertices(); ++v)
            node_chi_[v] = chi_smooth(mesh_.vertices[v][1], mesh_.vertices[v][2], dom_, cutoff_);
    }

    const SpaceTimeMesh& mesh() const { return mesh_; }
    const BoxDomain& domain() const { return dom_; }
    const CarlemanSetup& setup() const { return setup_; }
    const CutoffSpec& cutoff() const { return cutoff_; }
    int nq() const { return nq_; }
    int nv() const { return mesh_.num_vertices(); }
    int ntets() const { return mesh_.num_tets(); }
    const TetGeometry& geo(int e) const { return geo_[e]; }
    const QuadPoint& qp(int e, int q) const { return qp_[static_cast<size_t>(e) * nq_ + q]; }
    double level_r3inv(int i) const { return level_r3inv_[i]; }
    double level_r4(int i) const { return level_r4_[i]; }
    double node_chi(int v) const { return node_chi_[v]; }

    double modulation(Space s, const QuadPoint& Q) const {
        switch (s) {
        case Space::state: return Q.r3inv;
        case Space::control: return Q.r4 > 0 ? -Q.chi / Q.r4 : 0.0;
        default: return 1.0;
        }
    }
    double node_modulation(Space s, int v) const {
        int lvl = mesh_.level_of(v);
        switch (s) {
        case Space::state: return level_r3inv_[lvl];
        case Space::control: return -node_chi_[v] / level_r4_[lvl];
        default: return 1.0;
        }
    }
    double modulation_dt(Space s, const QuadPoint& Q) const {
        switch (s) {
        case Space::state: return -Q.r3inv * r3_log_dt(Q.t);
        case Space::control: return Q.chi * Q.r4dt / (Q.r4 * Q.r4);
        default: return 0.0;
        }
    }
    double r3_log_dt(double t) const { return mu_log_dt(kRho3, t, setup_); }

    // Value of component c of F at quadrature point Q of tet e.
    double value(const FieldFunction& F, int e, const QuadPoint& Q, int c) const {
        const auto& tet = mesh_.tets[e];
        double s = 0;
        for (int a = 0; a < 4; ++a) s += Q.phi[a] * F.coef(tet[a], c);
        return modulation(F.space, Q) * s;
    }
    // Gradient (d/dt, d/dx1, d/dx2) of component c at Q.
    Eigen::Vector3d gradient(const FieldFunction& F, int e, const QuadPoint& Q, int c) const {
        const auto& tet = mesh_.tets[e];
        const auto& g = geo_[e];
        double s = 0;
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        for (int a = 0; a < 4; ++a) {
            double cf = F.coef(tet[a], c);
            s += Q.phi[a] * cf;
            d += cf * g.grad.row(a).transpose();
        }
        double m = modulation(F.space, Q);
        Eigen::Vector3d out = m * d;
        out[0] += modulation_dt(F.space, Q) * s;
        return out;
    }
    // Nodal value (modulation applied).
    double node_value(const FieldFunction& F, int v, int c) const {
        return node_modulation(F.space, v) * F.coef(v, c);
    }

private:
    void fill_weights(QuadPoint& Q) const {
        Q.r3inv = std::exp(-scaled_mu_log(kRho3, Q.t, setup_));
        double l4 = scaled_mu_log(kRho4, Q.t, setup_);
        if (l4 > 700) throw OverflowError("rho4 exceeds the representable range");
        Q.r4 = std::exp(l4);
        Q.r4dt = Q.r4 * mu_log_dt(kRho4, Q.t, setup_);
        Q.chi = chi_smooth(Q.x1, Q.x2, dom_, cutoff_);
        Q.chi_om = chi_omega(Q.x1, Q.x2, dom_);
    }

    SpaceTimeMesh mesh_;
    BoxDomain dom_;
    CarlemanSetup setup_;
    CutoffSpec cutoff_;
    int nq_ = 0;
    std::vector<TetGeometry> geo_;
    std::vector<QuadPoint> qp_;
    std::vector<double> level_r3inv_, level_r4_, node_chi_;
};

} // namespace nullctl
