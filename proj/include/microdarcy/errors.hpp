#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace microdarcy {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MICRODARCY_ERROR(name)                          \
    class name : public Error {                         \
    public:                                             \
        explicit name(const std::string &what)          \
            : Error(std::string(#name) + ": " + what) {} \
    }

MICRODARCY_ERROR(ObstacleTouchesBoundary);
MICRODARCY_ERROR(ResolutionTooCoarse);
MICRODARCY_ERROR(NonIntegerTiling);
MICRODARCY_ERROR(DegenerateMesh);
MICRODARCY_ERROR(IncompatibleConstraints);
MICRODARCY_ERROR(MeshMismatch);
MICRODARCY_ERROR(SingularSystem);
MICRODARCY_ERROR(ZeroDenominator);
MICRODARCY_ERROR(EigSolverFailure);
MICRODARCY_ERROR(WellPosednessViolated);
MICRODARCY_ERROR(InconsistentSolutions);
MICRODARCY_ERROR(IndefiniteTensor);
MICRODARCY_ERROR(TooFewSamples);
MICRODARCY_ERROR(NonPositiveViscosity);
MICRODARCY_ERROR(ConfigInvalid);

#undef MICRODARCY_ERROR

// carries the final relative residual
class SolverBreakdown : public Error {
public:
    SolverBreakdown(const std::string &what, double residual)
        : Error("SolverBreakdown: " + what + " (residual " + format(residual) + ")"),
          residual(residual) {}
    double residual;

private:
    static std::string format(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", r);
        return buf;
    }
};

} // namespace microdarcy
