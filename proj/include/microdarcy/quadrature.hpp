#pragma once

#include <array>
#include <vector>

namespace microdarcy {

// Barycentric points; weights sum to one (multiply by the simplex measure).
struct TetRule {
    std::vector<std::array<double, 4>> points;
    std::vector<double> weights;
};
struct TriRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
};

// 14 points, exact to degree 5
const TetRule &tet_rule();
// 6 points, exact to degree 4
const TriRule &tri_rule();

} // namespace microdarcy
