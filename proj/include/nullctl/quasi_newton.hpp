#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "linear_control.hpp"
#include "nonlinear_model.hpp"

namespace nullctl {

struct QuasiNewtonOptions {
    double epsilon0 = 1e-8;
    int max_iter = 25;
};

struct IterationRecord {
    int n = 0;
    double rel_change = 0;
    double residual = 0;         // ||f_res||_L2(Q) at the iterate the step started from
    double initial_mismatch = 0; // ||y^n(0) - y0||_L2(Omega)
    double terminal_norm = 0;    // ||y^{n+1}(T)||
    double seconds = 0;
};

struct IterationReport {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    double rate_estimate = 0;   // mean of log(rc_n / rc_{n+1}) over the final iterations
    double decay_factor = 0;    // exp(-rate_estimate)
    double slope = 0;           // least-squares slope of log rc_n against n
    double final_residual = 0;  // ||f_res|| at the returned triple
};

inline double l2_norm_Q(const Discretization& D, const FieldFunction& F) {
    return std::sqrt(weighted_norm(D, F, WeightExponents{0, 0, 0}));
}

struct StepResult {
    StateTriple next;
    double residual = 0;
    double initial_mismatch = 0;
};

// One iteration: solve DH(0)·step = H(current) - (0, y0) with the linear control solver,
// then return current - step.
inline StepResult qn_step(const StateTriple& current, const FieldFunction& y0, const LinearControlSolver& solver,
                          const NonlinearModel& model) {
    const Discretization& D = solver.disc();
    ResidualPair R = model.residual_H(current, y0);
    LinearControlSolution step = solver.solve(R.f_res, R.g0);
    StepResult out;
    out.next = current - step.state;
    out.residual = l2_norm_Q(D, R.f_res);
    out.initial_mismatch = plane_norms(D, R.g0)[0];
    return out;
}

inline void finish_rates(IterationReport& rep) {
    std::vector<double> rc;
    for (size_t i = 1; i < rep.iterations.size(); ++i)
        if (rep.iterations[i].rel_change > 0) rc.push_back(rep.iterations[i].rel_change);
    if (rc.size() >= 2) {
        size_t first = rc.size() > 4 ? rc.size() - 4 : 0;
        double s = 0;
        int cnt = 0;
        for (size_t i = first; i + 1 < rc.size(); ++i, ++cnt) s += std::log(rc[i] / rc[i + 1]);
        rep.rate_estimate = s / cnt;
        rep.decay_factor = std::exp(-rep.rate_estimate);
        double mx = 0, my = 0;
        for (size_t i = 0; i < rc.size(); ++i) {
            mx += i;
            my += std::log(rc[i]);
        }
        mx /= rc.size();
        my /= rc.size();
        double sxy = 0, sxx = 0;
        for (size_t i = 0; i < rc.size(); ++i) {
            sxy += (i - mx) * (std::log(rc[i]) - my);
            sxx += (i - mx) * (i - mx);
        }
        rep.slope = sxy / sxx;
    }
}

// Iterates from (0,0,0) until the relative change of y drops to epsilon0 or max_iter is hit.
inline StateTriple run_quasi_newton(const FieldFunction& y0, const LinearControlSolver& solver,
                                    const NonlinearModel& model, const QuasiNewtonOptions& opt,
                                    IterationReport& rep) {
    const Discretization& D = solver.disc();
    StateTriple cur = StateTriple::zeros(D.nv());
    rep = {};
    for (int n = 1; n <= opt.max_iter; ++n) {
        auto t0 = std::chrono::steady_clock::now();
        StepResult s = qn_step(cur, y0, solver, model);
        double prev = l2_norm_Q(D, cur.y);
        StateTriple diff = s.next - cur;
        double change = l2_norm_Q(D, diff.y);
        IterationRecord r;
        r.n = n;
        r.rel_change = prev < 1e-14 ? change : change / prev;
        r.residual = s.residual;
        r.initial_mismatch = s.initial_mismatch;
        r.terminal_norm = terminal_norm(D, s.next.y);
        cur = std::move(s.next);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.iterations.push_back(r);
        if (!std::isfinite(r.rel_change)) break;
        if (r.rel_change <= opt.epsilon0) {
            rep.converged = true;
            break;
        }
    }
    finish_rates(rep);
    rep.final_residual = l2_norm_Q(D, model.residual_H(cur, y0).f_res);
    return cur;
}

} // namespace nullctl
