#pragma once

#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace nullctl {

// Axis-aligned rectangle ]x1_lo,x1_hi[ x ]x2_lo,x2_hi[.
struct Rect {
    double x1_lo = 0, x1_hi = 0, x2_lo = 0, x2_hi = 0;

    double width() const { return x1_hi - x1_lo; }
    double height() const { return x2_hi - x2_lo; }
    bool contains_open(double x1, double x2) const {
        return x1 > x1_lo && x1 < x1_hi && x2 > x2_lo && x2 < x2_hi;
    }
    bool contains_closed(double x1, double x2) const {
        return x1 >= x1_lo && x1 <= x1_hi && x2 >= x2_lo && x2 <= x2_hi;
    }
    // closure of *this inside the open rectangle `outer`
    bool strictly_inside(const Rect& outer) const {
        return x1_lo > outer.x1_lo && x1_hi < outer.x1_hi && x2_lo > outer.x2_lo &&
               x2_hi < outer.x2_hi && x1_lo < x1_hi && x2_lo < x2_hi;
    }
    Rect inset(double fraction) const {
        double dx = fraction * width(), dy = fraction * height();
        return {x1_lo + dx, x1_hi - dx, x2_lo + dy, x2_hi - dy};
    }
    bool operator==(const Rect&) const = default;
};

// Q = ]0,T[ x ]0,a[ x ]0,b[ with control set omega and inner set omega1.
struct BoxDomain {
    double a = 3.0, b = 3.0, T = 1.0;
    Rect omega{0.5, 2.5, 0.5, 2.5};
    Rect omega1{0.7, 2.3, 0.7, 2.3};

    Rect space() const { return {0.0, a, 0.0, b}; }
    double measure() const { return a * b * T; }

    void validate() const {
        if (!(a > 0 && b > 0 && T > 0))
            throw ValidationError("domain: a, b, T must be positive");
        if (!omega.strictly_inside(space()))
            throw ValidationError("omega must lie strictly inside ]0,a[x]0,b[");
        if (!omega1.strictly_inside(omega))
            throw ValidationError("omega1 must lie strictly inside omega");
    }
};

inline BoxDomain make_domain(double a, double b, double T, const Rect& omega) {
    BoxDomain d;
    d.a = a;
    d.b = b;
    d.T = T;
    d.omega = omega;
    d.omega1 = omega.inset(0.1);
    return d;
}

} // namespace nullctl
