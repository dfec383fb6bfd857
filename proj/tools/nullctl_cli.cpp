// Command-line driver: solve-linear, solve-nonlinear, weights-table, mesh-info.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nullctl.hpp"

namespace fs = std::filesystem;
using namespace nullctl;

namespace {

enum Exit { ok = 0, io_failure = 1, validation = 2, no_convergence = 3, solver_failure = 4 };

struct Common {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
};

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? parse_config("", c.overrides) : load_config(c.config_path, c.overrides);
    if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
    return cfg;
}

std::string trace_note(const RunConfig& cfg, const FieldFunction& y0, const SpaceTimeMesh& M) {
    double tr = boundary_trace_max(y0, M);
    std::ostringstream os;
    os.precision(6);
    os << "# initial.boundary_trace_max = " << tr << "\n";
    if (tr > 0)
        std::cerr << "note: initial velocity has a nonzero boundary trace (max " << tr << ") for psi0 = "
                  << (cfg.psi0 == Psi0Form::printed ? "printed" : "corrected") << "\n";
    return os.str();
}

void maybe_dump(const RunConfig& cfg, const LinearControlSolver& S) {
    if (!cfg.dump_matrix) return;
    fs::path p = fs::path(cfg.output_dir) / "matrix.coo";
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    write_coo(f, S.constrained().K);
}

int solve_linear(const Common& c) {
    RunConfig cfg = resolve(c);
    auto t0 = std::chrono::steady_clock::now();
    auto D = make_discretization(cfg);
    LinearControlSolver solver(D, linear_options(cfg));
    FieldFunction y0 = initial_state(cfg, D->mesh());
    LinearControlSolution sol = solver.solve(FieldFunction{Space::plain, {}}, y0);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ostringstream extra;
    extra.precision(17);
    extra << trace_note(cfg, y0, D->mesh());
    extra << "# linear.relres = " << sol.report.relres << "\n";
    extra << "# linear.terminal_norm = " << sol.diag.terminal_norm << "\n";
    extra << "# linear.y0_norm = " << sol.diag.y0_norm << "\n";
    extra << "# linear.u_plus_lambda = " << sol.diag.u_plus_lambda << "\n";
    extra << "# linear.rho3_energy = " << sol.diag.rho3_energy << "\n";
    extra << "# linear.rho4_energy = " << sol.diag.rho4_energy << "\n";
    write_outputs(cfg.output_dir, *D, sol.state, nullptr, cfg, extra.str());
    maybe_dump(cfg, solver);

    std::printf("solver %s relres %.3e (factor %.2fs, solve %.2fs)\n", sol.report.method.c_str(),
                sol.report.relres, sol.report.factor_seconds, sol.report.solve_seconds);
    std::printf("|y(T)| = %.6e  |y0| = %.6e  ratio = %.3e\n", sol.diag.terminal_norm, sol.diag.y0_norm,
                sol.diag.y0_norm > 0 ? sol.diag.terminal_norm / sol.diag.y0_norm : 0.0);
    std::printf("|u+lambda|/|u| = %.3e  total %.2fs  -> %s\n", sol.diag.u_plus_lambda, secs,
                cfg.output_dir.c_str());
    return ok;
}

int solve_nonlinear(const Common& c) {
    RunConfig cfg = resolve(c);
    auto D = make_discretization(cfg);
    LinearControlOptions lo = linear_options(cfg);
    lo.diagnostics = false;
    LinearControlSolver solver(D, lo);
    NonlinearModel model(D, cfg.law, cfg.include_convection);
    FieldFunction y0 = initial_state(cfg, D->mesh());
    IterationReport rep;
    StateTriple s = run_quasi_newton(y0, solver, model, {cfg.epsilon0, cfg.max_iter}, rep);

    for (const auto& r : rep.iterations)
        std::printf("iter %2d  rel_change %.3e  residual %.3e  |y(T)| %.3e  %.2fs\n", r.n, r.rel_change,
                    r.residual, r.terminal_norm, r.seconds);
    std::printf("decay factor %.3e  log-slope %.3f  final residual %.3e\n", rep.decay_factor, rep.slope,
                rep.final_residual);

    std::string extra = trace_note(cfg, y0, D->mesh());
    write_outputs(cfg.output_dir, *D, s, &rep, cfg, extra);
    maybe_dump(cfg, solver);
    if (!rep.converged) {
        std::fprintf(stderr, "no convergence after %zu iterations\n", rep.iterations.size());
        return no_convergence;
    }
    return ok;
}

int weights_table(const Common& c, int samples) {
    RunConfig cfg = resolve(c);
    CarlemanSetup S = build_setup(cfg.domain, cfg.domain.omega1, setup_options(cfg));
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir + ": " + ec.message());
    fs::path p = fs::path(cfg.output_dir) / "weights.csv";
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    f.precision(12);
    f << "t,ell";
    for (auto& [name, e] : weight_table()) f << ",log_" << name << ",log_scaled_" << name;
    f << "\n";
    for (int i = 0; i <= samples; ++i) {
        double t = S.T * i / samples;
        f << t << ',' << ell(t, S);
        for (auto& [name, e] : weight_table()) f << ',' << mu_log(e, t, S) << ',' << scaled_mu_log(e, t, S);
        f << "\n";
    }
    std::printf("s = %.6e  lambda = %g  m = %g  ell_clamp = %g\n", S.s_param, S.lambda_param, S.m_exp,
                S.ell_clamp);
    std::printf("alpha1 = %.6e  alpha2 = %.6e  ratio = %.6f\n", S.alpha1, S.alpha2, S.alpha2 / S.alpha1);
    std::printf("%-6s %6s %6s %6s\n", "name", "p", "q", "r");
    for (auto& [name, e] : weight_table()) std::printf("%-6s %6g %6g %6g\n", name.c_str(), e.p, e.q, e.r);
    std::printf("-> %s\n", p.string().c_str());
    return ok;
}

int mesh_info(const Common& c, bool export_mesh) {
    RunConfig cfg = resolve(c);
    cfg.domain.validate();
    SpaceTimeMesh M = build_mesh(cfg.domain, cfg.nx, cfg.ny, cfg.nt);
    int counts[3] = {0, 0, 0};
    for (const auto& fc : M.faces) ++counts[static_cast<int>(fc.tag)];
    double vol = 0;
    for (const auto& t : M.tets) vol += tet_volume(M, t);
    std::printf("vertices %d  tets %d  boundary faces %zu\n", M.num_vertices(), M.num_tets(), M.faces.size());
    std::printf("faces lateral %d  initial %d  terminal %d\n", counts[0], counts[1], counts[2]);
    std::printf("volume %.12g\n", vol);
    if (export_mesh) {
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        fs::path p = fs::path(cfg.output_dir) / "mesh.txt";
        std::ofstream f(p);
        if (!f) throw IoError("cannot write " + p.string());
        write_mesh(f, M);
        std::printf("-> %s\n", p.string().c_str());
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Space-time null controllability solver for shear-thickening Stokes flow"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "Config file (section.key = value lines)");
        sub->add_option("--out", common.out_dir, "Output directory (overrides output.dir)");
        sub->add_option("--override", common.overrides, "section.key=value, repeatable")->take_all();
    };
    auto* lin = app.add_subcommand("solve-linear", "Linear control problem with f = 0");
    auto* nl = app.add_subcommand("solve-nonlinear", "Quasi-Newton iteration for the nonlinear problem");
    auto* wt = app.add_subcommand("weights-table", "Resolved weight constants and weights.csv");
    auto* mi = app.add_subcommand("mesh-info", "Mesh statistics, optional text export");
    bool dump = false, export_mesh = false;
    int samples = 200;
    for (auto* s : {lin, nl, wt, mi}) add_common(s);
    lin->add_flag("--dump-matrix", dump, "Write the constrained system as matrix.coo");
    nl->add_flag("--dump-matrix", dump, "Write the constrained system as matrix.coo");
    wt->add_option("--samples", samples, "Time samples in weights.csv")->check(CLI::PositiveNumber);
    mi->add_flag("--export", export_mesh, "Write mesh.txt to the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? ok : validation;
    }
    if (dump) common.overrides.push_back("output.dump_matrix=true");

    try {
        if (*lin) return solve_linear(common);
        if (*nl) return solve_nonlinear(common);
        if (*wt) return weights_table(common, samples);
        return mesh_info(common, export_mesh);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return validation;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return validation;
    } catch (const NoConvergence& e) {
        std::cerr << "no convergence: " << e.what() << "\n";
        return no_convergence;
    } catch (const SingularSystemError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return solver_failure;
    } catch (const OverflowError& e) {
        std::cerr << "overflow: " << e.what() << "\n";
        return solver_failure;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return io_failure;
    }
}
