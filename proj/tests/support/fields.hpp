#pragma once

// random discrete fields shared by the unit tests and the acceptance run

#include <cstdint>

#include <microdarcy/analysis.hpp>
#include <microdarcy/cell.hpp>

namespace support {

microdarcy::Vec random_vector(int n, std::uint64_t seed);

// discretely divergence free field in spaces.V nearest (in the rot+div energy) to a random one
microdarcy::Vec divergence_free(const microdarcy::MixedSpaces &spaces, std::uint64_t seed);

struct CoercivitySample {
    double form = 0, Dphi2 = 0, Dpsi2 = 0;
    double defect(double A, double B) const { return form - A * Dphi2 - B * Dpsi2; }
};

// A(phi,psi;phi,psi) and the two H1 seminorms for count random admissible pairs
std::vector<CoercivitySample> coercivity_samples(const microdarcy::CellProblem &problem, int count,
                                                 std::uint64_t seed);

} // namespace support
