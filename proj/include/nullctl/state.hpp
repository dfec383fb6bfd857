#pragma once

#include "discretization.hpp"

namespace nullctl {

// (y, p, v) on the space-time mesh. Coefficients are those of the weighted
// generators: y = rho3^-1 u, p = rho3^-1 mu, v = -chi rho4^-1 m.
struct StateTriple {
    FieldFunction y{Space::state, {}};
    FieldFunction p{Space::state, {}};
    FieldFunction v{Space::control, {}};

    static StateTriple zeros(int nv) {
        return {FieldFunction::zeros(Space::state, nv, 2), FieldFunction::zeros(Space::state, nv, 1),
                FieldFunction::zeros(Space::control, nv, 2)};
    }
    StateTriple operator-(const StateTriple& o) const {
        StateTriple r = *this;
        r.y.coef -= o.y.coef;
        r.p.coef -= o.p.coef;
        r.v.coef -= o.v.coef;
        return r;
    }
    StateTriple operator+(const StateTriple& o) const {
        StateTriple r = *this;
        r.y.coef += o.y.coef;
        r.p.coef += o.p.coef;
        r.v.coef += o.v.coef;
        return r;
    }
    StateTriple operator*(double s) const {
        StateTriple r = *this;
        r.y.coef *= s;
        r.p.coef *= s;
        r.v.coef *= s;
        return r;
    }
};

} // namespace nullctl
