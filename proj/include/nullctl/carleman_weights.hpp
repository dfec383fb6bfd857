#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace nullctl {

struct WeightExponents {
    double p = 0, q = 0, r = 0;

    WeightExponents operator+(const WeightExponents& o) const { return {p + o.p, q + o.q, r + o.r}; }
    WeightExponents operator-() const { return {-p, -q, -r}; }
    bool operator==(const WeightExponents&) const = default;
};

struct CarlemanSetup {
    double T = 1.0;
    double s_param = 1.0;
    double lambda_param = 10.0;
    double m_exp = 5.0;
    double eta0_norm_inf = 1.0;
    double alpha1 = 0, alpha2 = 0;
    double gamma1 = 0, gamma2 = 0;
    double ell_clamp = 0.125;
    Rect omega1;
    // reference value dividing l in the polynomial factor of scaled weights
    double ell_ref = 0.25;
};

// l is evaluated with the floor (clamped) or as the exact piecewise profile.
enum class EllMode { clamped, exact };

inline double eta0(double x1, double x2, double a, double b) {
    return x1 * (a - x1) * x2 * (b - x2) / (a * a * b * b / 16.0);
}

inline std::array<double, 2> grad_eta0(double x1, double x2, double a, double b) {
    double c = 16.0 / (a * a * b * b);
    return {c * (a - 2 * x1) * x2 * (b - x2), c * x1 * (a - x1) * (b - 2 * x2)};
}

inline const std::vector<std::pair<std::string, WeightExponents>>& weight_table() {
    static const std::vector<std::pair<std::string, WeightExponents>> table = {
        {"rho0", {0, 1, 6}},          {"rho1", {0, 1, 2}},
        {"rho2", {0, 1, -2}},         {"rho3", {2, -1, 15}},
        {"rho4", {4, -3, 32}},        {"rho6", {1, -0.5, 17.5}},
        {"rho7", {1, -0.5, 20}},      {"rho8", {-1, 1, 0}},
        {"rho9", {-1, 1, 2.5}},       {"rho10", {-1, 1, 5}},
        {"rho11", {-1, 1, 7.5}},
    };
    return table;
}

// Accepts "rho4", "ρ4", "ρ₄", "zeta", "ζ", "zeta_hat", "ζ̂".
inline WeightExponents named_weight(std::string_view name) {
    static const std::vector<std::pair<std::string, std::string>> alias = {
        {"zeta", "rho8"},      {"\xCE\xB6", "rho8"},
        {"zeta_hat", "rho10"}, {"\xCE\xB6\xCC\x82", "rho10"},
    };
    std::string key(name);
    for (auto& [from, to] : alias)
        if (key == from) key = to;
    // normalize greek rho and subscript digits
    std::string norm;
    for (size_t i = 0; i < key.size();) {
        if (key.compare(i, 2, "\xCF\x81") == 0) {
            norm += "rho";
            i += 2;
        } else if (key.compare(i, 2, "\xE2\x82") == 0 && i + 2 < key.size()) {
            unsigned char c = static_cast<unsigned char>(key[i + 2]);
            if (c < 0x80 || c > 0x89) throw UnknownWeightName(std::string(name));
            norm += static_cast<char>('0' + (c - 0x80));
            i += 3;
        } else {
            norm += key[i++];
        }
    }
    for (auto& [n, e] : weight_table())
        if (n == norm) return e;
    throw UnknownWeightName(std::string(name));
}

inline double ell_exact(double t, double T) {
    return t <= 0.5 * T ? 0.25 * T * T : t * (T - t);
}

inline double ell(double t, const CarlemanSetup& S, EllMode mode = EllMode::clamped) {
    double l = ell_exact(t, S.T);
    return mode == EllMode::clamped ? std::max(l, S.ell_clamp) : l;
}

inline double ell_dt(double t, const CarlemanSetup& S, EllMode mode = EllMode::clamped) {
    if (t <= 0.5 * S.T) return 0.0;
    if (mode == EllMode::clamped && ell_exact(t, S.T) <= S.ell_clamp) return 0.0;
    return S.T - 2 * t;
}

inline double exponent_coeff(const WeightExponents& e, const CarlemanSetup& S) {
    return S.s_param * (e.p * S.alpha1 + e.q * S.alpha2);
}

inline double mu_log(const WeightExponents& e, double t, const CarlemanSetup& S,
                     EllMode mode = EllMode::clamped) {
    double l = ell(t, S, mode);
    double l2 = l * l;
    return exponent_coeff(e, S) / (l2 * l2) + e.r * std::log(l);
}

inline double mu(const WeightExponents& e, double t, const CarlemanSetup& S,
                 EllMode mode = EllMode::clamped) {
    double v = mu_log(e, t, S, mode);
    if (v > 700.0) throw OverflowError("weight exponent " + std::to_string(v) + " exceeds 700");
    return std::exp(v);
}

// d/dt log mu
inline double mu_log_dt(const WeightExponents& e, double t, const CarlemanSetup& S,
                        EllMode mode = EllMode::clamped) {
    double dl = ell_dt(t, S, mode);
    if (dl == 0.0) return 0.0;
    double l = ell(t, S, mode);
    double l4 = l * l * l * l;
    return -4.0 * dl * exponent_coeff(e, S) / (l4 * l) + e.r * dl / l;
}

inline double mu_dt(const WeightExponents& e, double t, const CarlemanSetup& S,
                    EllMode mode = EllMode::clamped) {
    double d = mu_log_dt(e, t, S, mode);
    return d == 0.0 ? 0.0 : mu(e, t, S, mode) * d;
}

// Weights with the polynomial factor measured in units of ell_ref: (l/ell_ref)^r.
// Each differs from the plain weight by the constant ell_ref^-r.
inline double scaled_mu_log(const WeightExponents& e, double t, const CarlemanSetup& S,
                            EllMode mode = EllMode::clamped) {
    return mu_log(e, t, S, mode) - e.r * std::log(S.ell_ref);
}

inline double scaled_mu(const WeightExponents& e, double t, const CarlemanSetup& S) {
    double v = scaled_mu_log(e, t, S);
    if (v > 700.0) throw OverflowError("weight exponent " + std::to_string(v) + " exceeds 700");
    return std::exp(v);
}

inline bool dominates(const WeightExponents& e1, const WeightExponents& e2, const CarlemanSetup& S) {
    double E1 = e1.p * S.alpha1 + e1.q * S.alpha2;
    double E2 = e2.p * S.alpha1 + e2.q * S.alpha2;
    double tol = 1e-12 * (std::abs(E1) + std::abs(E2));
    if (std::abs(E1 - E2) <= tol) return e1.r >= e2.r;
    return E1 < E2;
}

struct SetupOptions {
    double lambda_param = 10.0;
    double m_exp = 5.0;
    double ell_clamp = 0.0; // <= 0 selects T^2/8
    int grid_n = 1024;
    double s_param = 0.0;   // <= 0 selects the overflow-guard value
    double exponent_cap = 250.0;
};

inline double default_ell_clamp(double T) { return 0.125 * T * T; }

inline CarlemanSetup build_setup(const BoxDomain& dom, const Rect& omega1, const SetupOptions& opt) {
    if (!(opt.m_exp > 4)) throw ValidationError("m_exp must exceed 4");
    if (!(opt.lambda_param > 0)) throw ValidationError("lambda must be positive");
    if (opt.grid_n < 64) throw ValidationError("grid_n must be at least 64");
    if (!omega1.contains_open(0.5 * dom.a, 0.5 * dom.b))
        throw ValidationError("domain center must lie in omega1");

    CarlemanSetup S;
    S.T = dom.T;
    S.lambda_param = opt.lambda_param;
    S.m_exp = opt.m_exp;
    S.omega1 = omega1;
    S.ell_ref = 0.25 * dom.T * dom.T;
    S.ell_clamp = opt.ell_clamp > 0 ? opt.ell_clamp : default_ell_clamp(dom.T);
    if (S.ell_clamp > S.ell_ref * (1 + 1e-15)) throw ValidationError("ell_clamp must not exceed T^2/4");

    const double lam = opt.lambda_param, m = opt.m_exp;
    const int n = opt.grid_n;
    double emax = 0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            emax = std::max(emax, eta0(dom.a * i / n, dom.b * j / n, dom.a, dom.b));
    S.eta0_norm_inf = emax;

    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double gmin = amin, gmax = -amin;
    const double top = std::exp(1.25 * lam * m * emax);
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            double e = eta0(dom.a * i / n, dom.b * j / n, dom.a, dom.b);
            double g = std::exp(lam * (m * emax + e));
            double al = top - g;
            amin = std::min(amin, al);
            amax = std::max(amax, al);
            gmin = std::min(gmin, g);
            gmax = std::max(gmax, g);
        }
    }
    S.alpha1 = amin;
    S.alpha2 = amax;
    S.gamma1 = gmin;
    S.gamma2 = gmax;
    if (!(S.alpha1 > 0)) throw ValidationError("alpha1 must be positive");
    if (S.alpha2 / S.alpha1 >= 4.0 / 3.0)
        throw ValidationError("alpha2/alpha1 = " + std::to_string(S.alpha2 / S.alpha1) +
                              " violates the bound 4/3; increase lambda");

    if (opt.s_param > 0) {
        S.s_param = opt.s_param;
    } else {
        double worst = 0;
        for (auto& [name, e] : weight_table())
            worst = std::max(worst, std::abs(e.p) * S.alpha1 + std::abs(e.q) * S.alpha2);
        double lc4 = std::pow(S.ell_clamp, 4);
        S.s_param = opt.exponent_cap * lc4 / worst;
    }
    return S;
}

// Same grid extrema without the ratio validation; used for reporting.
inline std::array<double, 2> alpha_extrema(const BoxDomain& dom, double lam, double m, int n) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    const double top = std::exp(1.25 * lam * m);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            double e = eta0(dom.a * i / n, dom.b * j / n, dom.a, dom.b);
            double al = top - std::exp(lam * (m + e));
            amin = std::min(amin, al);
            amax = std::max(amax, al);
        }
    return {amin, amax};
}

} // namespace nullctl
