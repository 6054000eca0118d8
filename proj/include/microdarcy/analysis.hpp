#pragma once

#include <cstdint>
#include <string>

#include <microdarcy/femcore.hpp>
#include <microdarcy/params.hpp>

namespace microdarcy {

DimensionlessParams nondimensionalize(double nu, double nu_r, double ca, double cd, double epsilon);
// R_M = (ca + cd)/(nu + nu_r)
double micro_number(double nu, double nu_r, double ca, double cd);

struct ConstantsReport {
    double Cp = 0;   // ||v|| <= Cp ||Dv||
    double Ct = 0;   // ||v||_dF <= Ct (||v||^2 + ||Dv||^2)^1/2
    double Cpt = 0;  // ||v||^2_dF <= Cpt ||Dv||^2
    double Cg = 0;   // ||Dv||^2 <= Cg (||div v||^2 + ||rot v||^2)
    double K = 0;    // Cpt * Cg
    double delta_infsup = 0;
    double Cpt_composed = 0; // Ct^2 (Cp^2 + 1)^2
    std::uint64_t mesh_fingerprint = 0;
    int resolution = 0;
};

struct ConstantsOptions {
    double tolerance = 1e-6;
    bool infsup = true;
    std::uint64_t seed = 12345;
};

// vector P2 space with the periodic and normal constraints on a cell mesh
ConstantsReport estimate_constants(const Space &cell_space, const ConstantsOptions &opts = {});

struct InfSupResult {
    double delta = 0;
    double residual = 0; // eigen residual of the singular triplet
};
// smallest nonzero singular value of the divergence, H1 seminorm on velocity, L2 on pressure
InfSupResult discrete_infsup(const Space &velocity, const Space &pressure, double tolerance = 1e-10);

struct WellPosednessVerdict {
    double gamma = 0;
    double bound = 0;  // Rc (1 - N2) / (s K)^2
    bool satisfied = false;
    double margin = 0; // bound - gamma^2
    double A = 0, B = 0, c1 = 0, c2 = 0;
    bool coercivity_certified = false; // A > 0 and B > 0
    double safety_factor = 1.25;
    double K = 0;
};

WellPosednessVerdict check_wellposedness(const DimensionlessParams &params, const ConstantsReport &constants,
                                         double safety_factor = 1.25);

std::uint64_t mesh_fingerprint(const TetMesh &mesh);

std::string constants_json(const ConstantsReport &c);
std::string verdict_json(const WellPosednessVerdict &v, const DimensionlessParams &p);

} // namespace microdarcy
