#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace nullctl {

enum class FaceTag : std::uint8_t { lateral = 0, initial = 1, terminal = 2 };

inline const char* to_string(FaceTag t) {
    switch (t) {
    case FaceTag::lateral: return "lateral";
    case FaceTag::initial: return "initial";
    case FaceTag::terminal: return "terminal";
    }
    return "?";
}

struct BoundaryFace {
    std::array<int, 3> v;
    FaceTag tag;
};

// Structured Kuhn-split mesh of ]0,T[ x ]0,a[ x ]0,b[. Coordinates are (t, x1, x2).
struct SpaceTimeMesh {
    int nx = 0, ny = 0, nt = 0;
    double a = 0, b = 0, T = 0;
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<int, 4>> tets;
    std::vector<BoundaryFace> faces;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_tets() const { return static_cast<int>(tets.size()); }
    int vid(int i, int j, int k) const { return (i * (nx + 1) + j) * (ny + 1) + k; }
    int per_level() const { return (nx + 1) * (ny + 1); }
    int level_of(int v) const { return v / per_level(); }
    double dt() const { return T / nt; }
    double time_of_level(int i) const { return T * i / nt; }

    bool is_lateral(int v) const {
        int r = v % per_level();
        int j = r / (ny + 1), k = r % (ny + 1);
        return j == 0 || j == nx || k == 0 || k == ny;
    }

    // Triangulation of the plane t = t_i induced by the tets (diagonal split).
    std::vector<std::array<int, 3>> level_triangles(int i) const {
        std::vector<std::array<int, 3>> tri;
        tri.reserve(2 * nx * ny);
        for (int j = 0; j < nx; ++j)
            for (int k = 0; k < ny; ++k) {
                tri.push_back({vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1)});
                tri.push_back({vid(i, j, k), vid(i, j, k + 1), vid(i, j + 1, k + 1)});
            }
        return tri;
    }
};

inline double tet_volume(const SpaceTimeMesh& M, const std::array<int, 4>& t) {
    const auto& p0 = M.vertices[t[0]];
    double d[3][3];
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) d[c][r] = M.vertices[t[c + 1]][r] - p0[r];
    double det = d[0][0] * (d[1][1] * d[2][2] - d[1][2] * d[2][1]) -
                 d[0][1] * (d[1][0] * d[2][2] - d[1][2] * d[2][0]) +
                 d[0][2] * (d[1][0] * d[2][1] - d[1][1] * d[2][0]);
    return std::abs(det) / 6.0;
}

inline SpaceTimeMesh build_mesh(const BoxDomain& dom, int nx, int ny, int nt) {
    if (nx < 2 || ny < 2 || nt < 2) throw ValidationError("mesh resolution must be at least 2 per axis");
    SpaceTimeMesh M;
    M.nx = nx;
    M.ny = ny;
    M.nt = nt;
    M.a = dom.a;
    M.b = dom.b;
    M.T = dom.T;
    M.vertices.reserve(static_cast<size_t>(nt + 1) * (nx + 1) * (ny + 1));
    for (int i = 0; i <= nt; ++i)
        for (int j = 0; j <= nx; ++j)
            for (int k = 0; k <= ny; ++k)
                M.vertices.push_back({dom.T * i / nt, dom.a * j / nx, dom.b * k / ny});

    static constexpr std::array<std::array<int, 3>, 6> perms = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    M.tets.reserve(6 * static_cast<size_t>(nx) * ny * nt);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nx; ++j)
            for (int k = 0; k < ny; ++k)
                for (const auto& p : perms) {
                    std::array<int, 3> c{i, j, k};
                    std::array<int, 4> tet;
                    tet[0] = M.vid(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[p[s]];
                        tet[s + 1] = M.vid(c[0], c[1], c[2]);
                    }
                    M.tets.push_back(tet);
                }

    // boundary faces: all three vertices on one bounding plane
    auto on_plane = [&](int v, int axis, double val) { return M.vertices[v][axis] == val; };
    static constexpr int face_of[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    const double planes[3][2] = {{0.0, dom.T}, {0.0, dom.a}, {0.0, dom.b}};
    for (const auto& tet : M.tets) {
        for (const auto& f : face_of) {
            std::array<int, 3> fv{tet[f[0]], tet[f[1]], tet[f[2]]};
            for (int axis = 0; axis < 3; ++axis)
                for (int side = 0; side < 2; ++side) {
                    double val = planes[axis][side];
                    if (on_plane(fv[0], axis, val) && on_plane(fv[1], axis, val) &&
                        on_plane(fv[2], axis, val)) {
                        FaceTag tag = axis != 0 ? FaceTag::lateral
                                      : side == 0 ? FaceTag::initial
                                                  : FaceTag::terminal;
                        M.faces.push_back({fv, tag});
                    }
                }
        }
    }
    return M;
}

struct CutoffSpec {
    double margin = 0.1;
};

inline CutoffSpec default_cutoff(const BoxDomain& dom) {
    double gap = std::min({dom.omega1.x1_lo - dom.omega.x1_lo, dom.omega.x1_hi - dom.omega1.x1_hi,
                           dom.omega1.x2_lo - dom.omega.x2_lo, dom.omega.x2_hi - dom.omega1.x2_hi});
    return {0.5 * gap};
}

inline double chi_omega(double x1, double x2, const BoxDomain& dom) {
    return dom.omega.contains_open(x1, x2) ? 1.0 : 0.0;
}

inline void validate_cutoff(const BoxDomain& dom, const CutoffSpec& c) {
    double gap = std::min({dom.omega1.x1_lo - dom.omega.x1_lo, dom.omega.x1_hi - dom.omega1.x1_hi,
                           dom.omega1.x2_lo - dom.omega.x2_lo, dom.omega.x2_hi - dom.omega1.x2_hi});
    if (!(c.margin > 0) || c.margin > gap * (1 + 1e-12))
        throw ValidationError("cutoff margin must lie in ]0, gap between omega1 and the boundary of omega]");
}

namespace detail {
inline double ramp(double x, double lo, double hi, double margin) {
    double d = x < lo ? lo - x : (x > hi ? x - hi : 0.0);
    if (d <= 0) return 1.0;
    if (d >= margin) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * d / margin));
}
} // namespace detail

inline double chi_smooth(double x1, double x2, const BoxDomain& dom, const CutoffSpec& c) {
    validate_cutoff(dom, c);
    return detail::ramp(x1, dom.omega1.x1_lo, dom.omega1.x1_hi, c.margin) *
           detail::ramp(x2, dom.omega1.x2_lo, dom.omega1.x2_hi, c.margin);
}

// Plain-text mesh export:
//   nullctl-mesh 1
//   vertices N      then N lines "t x1 x2"
//   tets M          then M lines "v0 v1 v2 v3"
//   faces F         then F lines "v0 v1 v2 tag"   (tag: lateral|initial|terminal)
inline void write_mesh(std::ostream& os, const SpaceTimeMesh& M) {
    os.precision(17);
    os << "nullctl-mesh 1\n";
    os << "vertices " << M.vertices.size() << "\n";
    for (const auto& v : M.vertices) os << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    os << "tets " << M.tets.size() << "\n";
    for (const auto& t : M.tets) os << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    os << "faces " << M.faces.size() << "\n";
    for (const auto& f : M.faces)
        os << f.v[0] << ' ' << f.v[1] << ' ' << f.v[2] << ' ' << to_string(f.tag) << '\n';
}

} // namespace nullctl
