#include <microdarcy/quadrature.hpp>

namespace microdarcy {

const TetRule &tet_rule() {
    static const TetRule rule = [] {
        TetRule r;
        auto group4 = [&r](double a, double w) {
            double b = 1 - 3 * a;
            r.points.push_back({b, a, a, a});
            r.points.push_back({a, b, a, a});
            r.points.push_back({a, a, b, a});
            r.points.push_back({a, a, a, b});
            for (int i = 0; i < 4; ++i) r.weights.push_back(6 * w);
        };
        group4(0.0927352503108912264, 0.01224884051939365827);
        group4(0.3108859192633006097, 0.01878132095300264180);
        const double b = 0.4544962958743503727, c = 0.5 - b, w = 0.007091003462846911;
        const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        for (const auto &p : pairs) {
            std::array<double, 4> x{c, c, c, c};
            x[p[0]] = b;
            x[p[1]] = b;
            r.points.push_back(x);
            r.weights.push_back(6 * w);
        }
        return r;
    }();
    return rule;
}

const TriRule &tri_rule() {
    static const TriRule rule = [] {
        TriRule r;
        auto group3 = [&r](double a, double w) {
            double b = 1 - 2 * a;
            r.points.push_back({b, a, a});
            r.points.push_back({a, b, a});
            r.points.push_back({a, a, b});
            for (int i = 0; i < 3; ++i) r.weights.push_back(w);
        };
        group3(0.44594849091596488632, 0.22338158967801146570);
        group3(0.09157621350977074346, 0.10995174365532186764);
        return r;
    }();
    return rule;
}

} // namespace microdarcy
