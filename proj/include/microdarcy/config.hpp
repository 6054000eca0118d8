#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <microdarcy/darcy.hpp>
#include <microdarcy/mesh.hpp>
#include <microdarcy/params.hpp>

namespace microdarcy {

// Flat "section.key = value" text, '#' starts a comment. Vectors are comma
// lists, epsilons are written 1/m.
struct Config {
    int resolution = 8;
    ObstacleSpec obstacle;

    std::optional<double> N2;
    std::optional<std::array<double, 4>> viscosities; // nu, nu_r, ca, cd
    double Rc = 1.0;
    double epsilon = 1.0; // scale used to turn viscosities into Rc
    std::optional<double> alpha; // default: 1/alpha = N2 (1 + beta)
    double beta = 1.0;

    std::string f = "1,0,0";
    std::string g = "0,0,0";

    std::vector<int> inverse_epsilons{2, 3, 4};
    int sweep_resolution = 6;
    int darcy_resolution = 12;

    std::string directory = "out";
    std::vector<std::string> formats{"json", "csv", "vtk"};

    double safety_factor = 1.25;

    // throws ConfigInvalid
    void validate() const;
    DimensionlessParams params() const;
    std::vector<double> epsilons() const;
    bool emits(const std::string &format) const;
};

// throws ConfigInvalid on unknown keys or malformed values
Config parse_config(const std::string &text, Config base = {});
Config load_config(const std::string &path);
// apply one "key=value" override
void set_config_value(Config &c, const std::string &key, const std::string &value);
std::string default_config_text();

// constant "a,b,c" or a named field: zero, e1, e2, e3, shear (sin(pi x2) e1)
VectorField parse_field(const std::string &spec);

} // namespace microdarcy
