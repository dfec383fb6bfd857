#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "quasi_newton.hpp"

namespace nullctl {

enum class Psi0Form { printed, corrected };

struct RunConfig {
    BoxDomain domain;
    int nx = 12, ny = 12, nt = 12;
    double lambda = 10.0;
    double m_exp = 5.0;
    double ell_clamp = 0.125;
    double s_param = 0.0; // 0: overflow-guard selection
    int grid_n = 1024;
    double cutoff_margin = 0.1;
    ConstitutiveLaw law;
    bool allow_any_r = false;
    double epsilon0 = 1e-8;
    int max_iter = 25;
    bool include_convection = true;
    Psi0Form psi0 = Psi0Form::printed;
    double psi0_amplitude = 1.0;
    double stab_delta = 0.1;
    int quadrature = 4;
    double solver_tol = 1e-10;
    SolverMethod solver_method = SolverMethod::direct;
    int solver_max_iter = 20000;
    std::string output_dir = "out";
    std::vector<double> snapshot_times{0.15, 0.25, 0.35, 0.45};
    bool dump_matrix = false;

    bool operator==(const RunConfig& o) const {
        return to_text() == o.to_text();
    }

    std::string to_text() const;
    void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// shortest form that reads back to the same double
inline std::string fmt(double x) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline double to_double(const std::string& v, int line, const std::string& key) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ParseError(line, "key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline int to_int(const std::string& v, int line, const std::string& key) {
    try {
        size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(x);
    } catch (const std::exception&) {
        throw ParseError(line, "key '" + key + "': expected an integer, got '" + v + "'");
    }
}

inline bool to_bool(const std::string& v, int line, const std::string& key) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ParseError(line, "key '" + key + "': expected true/false, got '" + v + "'");
}

struct Entry {
    std::string value;
    int line;
};

} // namespace detail

inline std::string RunConfig::to_text() const {
    using detail::fmt;
    std::ostringstream os;
    auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << "\n"; };
    kv("domain.a", fmt(domain.a));
    kv("domain.b", fmt(domain.b));
    kv("domain.T", fmt(domain.T));
    kv("omega.x1_lo", fmt(domain.omega.x1_lo));
    kv("omega.x1_hi", fmt(domain.omega.x1_hi));
    kv("omega.x2_lo", fmt(domain.omega.x2_lo));
    kv("omega.x2_hi", fmt(domain.omega.x2_hi));
    kv("omega1.x1_lo", fmt(domain.omega1.x1_lo));
    kv("omega1.x1_hi", fmt(domain.omega1.x1_hi));
    kv("omega1.x2_lo", fmt(domain.omega1.x2_lo));
    kv("omega1.x2_hi", fmt(domain.omega1.x2_hi));
    kv("mesh.nx", std::to_string(nx));
    kv("mesh.ny", std::to_string(ny));
    kv("mesh.nt", std::to_string(nt));
    kv("carleman.lambda", fmt(lambda));
    kv("carleman.m", fmt(m_exp));
    kv("carleman.ell_clamp", fmt(ell_clamp));
    kv("carleman.s", s_param > 0 ? fmt(s_param) : "auto");
    kv("carleman.grid_n", std::to_string(grid_n));
    kv("cutoff.margin", fmt(cutoff_margin));
    kv("law.nu0", fmt(law.nu0));
    kv("law.nu1", fmt(law.nu1));
    kv("law.r", fmt(law.r_exp));
    kv("law.tensor_mode", law.tensor_mode == TensorMode::gradient ? "gradient" : "deformation");
    kv("law.kind", law.law_kind == LawKind::power ? "power" : "bounded_power");
    kv("law.allow_any_r", allow_any_r ? "true" : "false");
    kv("algorithm.epsilon0", fmt(epsilon0));
    kv("algorithm.max_iter", std::to_string(max_iter));
    kv("algorithm.convection", include_convection ? "true" : "false");
    kv("initial.psi0", psi0 == Psi0Form::printed ? "printed" : "corrected");
    kv("initial.amplitude", fmt(psi0_amplitude));
    kv("assembly.stab_delta", fmt(stab_delta));
    kv("assembly.quadrature", std::to_string(quadrature));
    kv("solver.tol", fmt(solver_tol));
    kv("solver.method", solver_method == SolverMethod::direct ? "direct" : "minres");
    kv("solver.max_iter", std::to_string(solver_max_iter));
    kv("output.dir", output_dir);
    std::string times;
    for (size_t i = 0; i < snapshot_times.size(); ++i) times += (i ? "," : "") + fmt(snapshot_times[i]);
    kv("output.snapshot_times", times);
    kv("output.dump_matrix", dump_matrix ? "true" : "false");
    return os.str();
}

inline void RunConfig::validate() const {
    domain.validate();
    if (nx < 2 || ny < 2 || nt < 2) throw ValidationError("mesh.nx, mesh.ny, mesh.nt must be at least 2");
    if (!(m_exp > 4)) throw ValidationError("carleman.m must exceed 4");
    if (!(lambda > 0)) throw ValidationError("carleman.lambda must be positive");
    if (!(ell_clamp > 0) || ell_clamp > 0.25 * domain.T * domain.T * (1 + 1e-15))
        throw ValidationError("carleman.ell_clamp must lie in ]0, T^2/4]");
    if (grid_n < 64) throw ValidationError("carleman.grid_n must be at least 64");
    validate_cutoff(domain, CutoffSpec{cutoff_margin});
    law.validate(allow_any_r);
    if (!(epsilon0 > 0)) throw ValidationError("algorithm.epsilon0 must be positive");
    if (max_iter < 1) throw ValidationError("algorithm.max_iter must be at least 1");
    if (quadrature != 4 && quadrature != 11) throw ValidationError("assembly.quadrature must be 4 or 11");
    if (!(stab_delta >= 0)) throw ValidationError("assembly.stab_delta must be nonnegative");
    if (!(solver_tol > 0)) throw ValidationError("solver.tol must be positive");
    for (double t : snapshot_times)
        if (!(t >= 0 && t <= domain.T)) throw ValidationError("output.snapshot_times must lie in [0, T]");
}

// Parses "section.key = value" lines ('#' starts a comment). `overrides` use the same
// syntax without spaces and take precedence over the file.
inline RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
    std::map<std::string, detail::Entry> kv;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    auto add = [&](const std::string& s, int ln) {
        std::string l = s;
        auto h = l.find('#');
        if (h != std::string::npos) l = l.substr(0, h);
        l = detail::trim(l);
        if (l.empty()) return;
        auto eq = l.find('=');
        if (eq == std::string::npos) throw ParseError(ln, "expected 'section.key = value'");
        std::string k = detail::trim(l.substr(0, eq)), v = detail::trim(l.substr(eq + 1));
        if (k.find('.') == std::string::npos) throw ParseError(ln, "key '" + k + "' lacks a section");
        if (v.empty()) throw ParseError(ln, "key '" + k + "' has no value");
        kv[k] = {v, ln};
    };
    while (std::getline(is, raw)) add(raw, ++line);
    for (size_t i = 0; i < overrides.size(); ++i) add(overrides[i], 0);

    RunConfig c;
    std::map<std::string, std::function<void(const detail::Entry&)>> set;
    auto num = [](double& dst, const char* key) {
        return [&dst, key](const detail::Entry& e) { dst = detail::to_double(e.value, e.line, key); };
    };
    auto integer = [](int& dst, const char* key) {
        return [&dst, key](const detail::Entry& e) { dst = detail::to_int(e.value, e.line, key); };
    };
    auto boolean = [](bool& dst, const char* key) {
        return [&dst, key](const detail::Entry& e) { dst = detail::to_bool(e.value, e.line, key); };
    };
    bool omega1_set[4] = {false, false, false, false};
    bool clamp_set = false, margin_set = false;
    set["domain.a"] = num(c.domain.a, "domain.a");
    set["domain.b"] = num(c.domain.b, "domain.b");
    set["domain.T"] = num(c.domain.T, "domain.T");
    set["omega.x1_lo"] = num(c.domain.omega.x1_lo, "omega.x1_lo");
    set["omega.x1_hi"] = num(c.domain.omega.x1_hi, "omega.x1_hi");
    set["omega.x2_lo"] = num(c.domain.omega.x2_lo, "omega.x2_lo");
    set["omega.x2_hi"] = num(c.domain.omega.x2_hi, "omega.x2_hi");
    double* o1[4] = {&c.domain.omega1.x1_lo, &c.domain.omega1.x1_hi, &c.domain.omega1.x2_lo, &c.domain.omega1.x2_hi};
    const char* o1k[4] = {"omega1.x1_lo", "omega1.x1_hi", "omega1.x2_lo", "omega1.x2_hi"};
    for (int i = 0; i < 4; ++i)
        set[o1k[i]] = [&, i](const detail::Entry& e) {
            if (e.value == "auto") return;
            *o1[i] = detail::to_double(e.value, e.line, o1k[i]);
            omega1_set[i] = true;
        };
    set["mesh.nx"] = integer(c.nx, "mesh.nx");
    set["mesh.ny"] = integer(c.ny, "mesh.ny");
    set["mesh.nt"] = integer(c.nt, "mesh.nt");
    set["carleman.lambda"] = num(c.lambda, "carleman.lambda");
    set["carleman.m"] = num(c.m_exp, "carleman.m");
    set["carleman.ell_clamp"] = [&](const detail::Entry& e) {
        if (e.value == "auto") return;
        c.ell_clamp = detail::to_double(e.value, e.line, "carleman.ell_clamp");
        clamp_set = true;
    };
    set["carleman.s"] = [&](const detail::Entry& e) {
        c.s_param = e.value == "auto" ? 0.0 : detail::to_double(e.value, e.line, "carleman.s");
    };
    set["carleman.grid_n"] = integer(c.grid_n, "carleman.grid_n");
    set["cutoff.margin"] = [&](const detail::Entry& e) {
        if (e.value == "auto") return;
        c.cutoff_margin = detail::to_double(e.value, e.line, "cutoff.margin");
        margin_set = true;
    };
    set["law.nu0"] = num(c.law.nu0, "law.nu0");
    set["law.nu1"] = num(c.law.nu1, "law.nu1");
    set["law.r"] = num(c.law.r_exp, "law.r");
    set["law.tensor_mode"] = [&](const detail::Entry& e) {
        if (e.value == "gradient") c.law.tensor_mode = TensorMode::gradient;
        else if (e.value == "deformation") c.law.tensor_mode = TensorMode::deformation;
        else throw ParseError(e.line, "law.tensor_mode must be gradient or deformation");
    };
    set["law.kind"] = [&](const detail::Entry& e) {
        if (e.value == "power") c.law.law_kind = LawKind::power;
        else if (e.value == "bounded_power") c.law.law_kind = LawKind::bounded_power;
        else throw ParseError(e.line, "law.kind must be power or bounded_power");
    };
    set["law.allow_any_r"] = boolean(c.allow_any_r, "law.allow_any_r");
    set["algorithm.epsilon0"] = [&](const detail::Entry& e) {
        c.epsilon0 = e.value == "inf" ? std::numeric_limits<double>::infinity()
                                      : detail::to_double(e.value, e.line, "algorithm.epsilon0");
    };
    set["algorithm.max_iter"] = integer(c.max_iter, "algorithm.max_iter");
    set["algorithm.convection"] = boolean(c.include_convection, "algorithm.convection");
    set["initial.psi0"] = [&](const detail::Entry& e) {
        if (e.value == "printed") c.psi0 = Psi0Form::printed;
        else if (e.value == "corrected") c.psi0 = Psi0Form::corrected;
        else throw ParseError(e.line, "initial.psi0 must be printed or corrected");
    };
    set["initial.amplitude"] = num(c.psi0_amplitude, "initial.amplitude");
    set["assembly.stab_delta"] = num(c.stab_delta, "assembly.stab_delta");
    set["assembly.quadrature"] = integer(c.quadrature, "assembly.quadrature");
    set["solver.tol"] = num(c.solver_tol, "solver.tol");
    set["solver.method"] = [&](const detail::Entry& e) {
        if (e.value == "direct") c.solver_method = SolverMethod::direct;
        else if (e.value == "minres") c.solver_method = SolverMethod::minres;
        else throw ParseError(e.line, "solver.method must be direct or minres");
    };
    set["solver.max_iter"] = integer(c.solver_max_iter, "solver.max_iter");
    set["output.dir"] = [&](const detail::Entry& e) { c.output_dir = e.value; };
    set["output.snapshot_times"] = [&](const detail::Entry& e) {
        c.snapshot_times.clear();
        std::istringstream ts(e.value);
        std::string tok;
        while (std::getline(ts, tok, ','))
            c.snapshot_times.push_back(detail::to_double(detail::trim(tok), e.line, "output.snapshot_times"));
    };
    set["output.dump_matrix"] = boolean(c.dump_matrix, "output.dump_matrix");

    // geometry first so derived defaults see it
    std::vector<std::pair<std::string, detail::Entry>> ordered(kv.begin(), kv.end());
    std::stable_partition(ordered.begin(), ordered.end(), [](const auto& p) {
        return p.first.rfind("domain.", 0) == 0 || p.first.rfind("omega.", 0) == 0;
    });
    for (const auto& [k, e] : ordered) {
        auto it = set.find(k);
        if (it == set.end()) throw ParseError(e.line, "unknown key '" + k + "'");
        it->second(e);
    }
    Rect auto1 = c.domain.omega.inset(0.1);
    double auto_vals[4] = {auto1.x1_lo, auto1.x1_hi, auto1.x2_lo, auto1.x2_hi};
    for (int i = 0; i < 4; ++i)
        if (!omega1_set[i]) *o1[i] = auto_vals[i];
    if (!clamp_set) c.ell_clamp = default_ell_clamp(c.domain.T);
    if (!margin_set) c.cutoff_margin = default_cutoff(c.domain).margin;
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), overrides);
}

inline SetupOptions setup_options(const RunConfig& c) {
    SetupOptions o;
    o.lambda_param = c.lambda;
    o.m_exp = c.m_exp;
    o.ell_clamp = c.ell_clamp;
    o.grid_n = c.grid_n;
    o.s_param = c.s_param;
    return o;
}

inline std::shared_ptr<const Discretization> make_discretization(const RunConfig& c) {
    CarlemanSetup S = build_setup(c.domain, c.domain.omega1, setup_options(c));
    return std::make_shared<const Discretization>(build_mesh(c.domain, c.nx, c.ny, c.nt), c.domain, S,
                                                  CutoffSpec{c.cutoff_margin},
                                                  c.quadrature == 11 ? TetRuleKind::keast11 : TetRuleKind::four_point);
}

inline LinearControlOptions linear_options(const RunConfig& c) {
    LinearControlOptions o;
    o.assembly.nu0 = c.law.nu0;
    o.assembly.stab_delta = c.stab_delta;
    o.solver.tol = c.solver_tol;
    o.solver.method = c.solver_method;
    o.solver.max_iter = c.solver_max_iter;
    return o;
}

// psi0 = amp * f(x1) f(x2) with f(x) = x^2 (c - x)^2; c = 1 as printed, c = a (resp. b) corrected.
inline std::array<double, 2> initial_velocity(const RunConfig& c, double x1, double x2) {
    double c1 = c.psi0 == Psi0Form::printed ? 1.0 : c.domain.a;
    double c2 = c.psi0 == Psi0Form::printed ? 1.0 : c.domain.b;
    auto f = [](double x, double cc) { return x * x * (cc - x) * (cc - x); };
    auto df = [](double x, double cc) { return 2 * x * (cc - x) * (cc - 2 * x); };
    double A = c.psi0_amplitude;
    return {A * f(x1, c1) * df(x2, c2), -A * df(x1, c1) * f(x2, c2)};
}

// y0 = curl psi0 at the t = 0 vertices.
inline FieldFunction initial_state(const RunConfig& c, const SpaceTimeMesh& M) {
    FieldFunction y0 = FieldFunction::zeros(Space::initial, M.per_level(), 2);
    for (int v = 0; v < M.per_level(); ++v) {
        auto y = initial_velocity(c, M.vertices[v][1], M.vertices[v][2]);
        y0.coef(v, 0) = y[0];
        y0.coef(v, 1) = y[1];
    }
    return y0;
}

// Largest |y0| over boundary vertices of the t = 0 plane.
inline double boundary_trace_max(const FieldFunction& y0, const SpaceTimeMesh& M) {
    double mx = 0;
    for (int v = 0; v < M.per_level(); ++v)
        if (M.is_lateral(v)) mx = std::max(mx, std::hypot(y0.coef(v, 0), y0.coef(v, 1)));
    return mx;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    f.precision(12);
    return f;
}

// Value at time tau and vertex (j,k) of the spatial grid; linear in t along vertical edges.
inline double value_at(const Discretization& D, const FieldFunction& F, double tau, int j, int k, int c) {
    const auto& M = D.mesh();
    double s = std::clamp(tau / M.T * M.nt, 0.0, static_cast<double>(M.nt));
    int i = std::min(static_cast<int>(std::floor(s)), M.nt - 1);
    double th = s - i;
    double coef = (1 - th) * F.coef(M.vid(i, j, k), c) + th * F.coef(M.vid(i + 1, j, k), c);
    const auto& CS = D.setup();
    int v = M.vid(0, j, k);
    switch (F.space) {
    case Space::state: return coef * std::exp(-scaled_mu_log(kRho3, tau, CS));
    case Space::control: return -D.node_chi(v) * coef * std::exp(-scaled_mu_log(kRho4, tau, CS));
    default: return coef;
    }
}

} // namespace detail

inline std::string snapshot_name(const std::string& field, double tau) {
    std::ostringstream os;
    os << field << "_t" << tau << ".csv";
    return os.str();
}

// norms.csv, convergence.csv, snapshots and manifest.txt in `dir`.
inline void write_outputs(const std::filesystem::path& dir, const Discretization& D, const StateTriple& s,
                          const IterationReport* rep, const RunConfig& cfg, const std::string& extra_manifest = "") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const auto& M = D.mesh();
    {
        auto f = detail::open_out(dir / "norms.csv");
        f << "t,v1,v2,v_modulus,y1,y2,y_modulus\n";
        for (int i = 0; i <= M.nt; ++i) {
            double v1 = level_norm(D, s.v, i, 0), v2 = level_norm(D, s.v, i, 1);
            double y1 = level_norm(D, s.y, i, 0), y2 = level_norm(D, s.y, i, 1);
            f << M.time_of_level(i) << ',' << v1 << ',' << v2 << ',' << v1 + v2 << ',' << y1 << ',' << y2 << ','
              << y1 + y2 << '\n';
        }
    }
    {
        auto f = detail::open_out(dir / "convergence.csv");
        f << "n,rel_change,residual,terminal_norm,seconds\n";
        if (rep)
            for (const auto& r : rep->iterations)
                f << r.n << ',' << r.rel_change << ',' << r.residual << ',' << r.terminal_norm << ',' << r.seconds
                  << '\n';
    }
    for (double tau : cfg.snapshot_times) {
        for (const auto* fld : {&s.y, &s.v}) {
            auto f = detail::open_out(dir / snapshot_name(fld == &s.y ? "y" : "v", tau));
            f << "x1,x2,value1,value2\n";
            for (int j = 0; j <= M.nx; ++j)
                for (int k = 0; k <= M.ny; ++k) {
                    int v = M.vid(0, j, k);
                    f << M.vertices[v][1] << ',' << M.vertices[v][2] << ','
                      << detail::value_at(D, *fld, tau, j, k, 0) << ',' << detail::value_at(D, *fld, tau, j, k, 1)
                      << '\n';
                }
        }
    }
    {
        auto f = detail::open_out(dir / "manifest.txt");
        f << "# resolved configuration\n" << cfg.to_text();
        const auto& S = D.setup();
        f.precision(17);
        f << "# derived\n";
        f << "# carleman.s_resolved = " << S.s_param << "\n";
        f << "# carleman.alpha1 = " << S.alpha1 << "\n";
        f << "# carleman.alpha2 = " << S.alpha2 << "\n";
        f << "# carleman.gamma1 = " << S.gamma1 << "\n";
        f << "# carleman.gamma2 = " << S.gamma2 << "\n";
        f << "# mesh.vertices = " << M.num_vertices() << "\n";
        f << "# mesh.tets = " << M.num_tets() << "\n";
        if (rep) {
            f << "# run.converged = " << (rep->converged ? "true" : "false") << "\n";
            f << "# run.iterations = " << rep->iterations.size() << "\n";
            f << "# run.rate_estimate = " << rep->rate_estimate << "\n";
            f << "# run.decay_factor = " << rep->decay_factor << "\n";
            f << "# run.log_slope = " << rep->slope << "\n";
        }
        f << extra_manifest;
    }
}

} // namespace nullctl
