#pragma once

#include <array>
#include <vector>

namespace nullctl {

// Barycentric points; weights sum to 1 and are multiplied by the simplex measure.
struct TetRule {
    std::vector<std::array<double, 4>> points;
    std::vector<double> weights;
};

struct TriRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
};

enum class TetRuleKind { four_point, keast11 };

inline TetRule tet_rule_4() {
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    return {{{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}}, {0.25, 0.25, 0.25, 0.25}};
}

// Keast degree-4 rule
inline TetRule tet_rule_11() {
    TetRule R;
    R.points.push_back({0.25, 0.25, 0.25, 0.25});
    R.weights.push_back(-0.0789333333333333333);
    const double a = 0.7857142857142857143, b = 0.0714285714285714286;
    for (int i = 0; i < 4; ++i) {
        std::array<double, 4> p{b, b, b, b};
        p[i] = a;
        R.points.push_back(p);
        R.weights.push_back(0.0457333333333333333);
    }
    const double c = 0.3994035761667992, d = 0.1005964238332008;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            std::array<double, 4> p{d, d, d, d};
            p[i] = c;
            p[j] = c;
            R.points.push_back(p);
            R.weights.push_back(0.1493333333333333333);
        }
    return R;
}

inline TetRule tet_rule(TetRuleKind k) { return k == TetRuleKind::keast11 ? tet_rule_11() : tet_rule_4(); }

inline TriRule tri_rule_3() {
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    return {{{a, b, b}, {b, a, b}, {b, b, a}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
}

// Dunavant degree-5 rule
inline TriRule tri_rule_7() {
    TriRule R;
    R.points.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
    R.weights.push_back(0.225);
    const double a1 = 0.0597158717897698, b1 = 0.4701420641051151;
    const double a2 = 0.7974269853530873, b2 = 0.1012865073234563;
    for (int i = 0; i < 3; ++i) {
        std::array<double, 3> p{b1, b1, b1};
        p[i] = a1;
        R.points.push_back(p);
        R.weights.push_back(0.1323941527885062);
    }
    for (int i = 0; i < 3; ++i) {
        std::array<double, 3> p{b2, b2, b2};
        p[i] = a2;
        R.points.push_back(p);
        R.weights.push_back(0.1259391805448271);
    }
    return R;
}

} // namespace nullctl
