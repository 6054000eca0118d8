#include <microdarcy/analysis.hpp>
#include <microdarcy/config.hpp>
#include <microdarcy/errors.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace microdarcy {

namespace {

std::string trim(const std::string &s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

double number(const std::string &key, const std::string &v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception &) {
        throw ConfigInvalid(key + ": not a number: '" + v + "'");
    }
}

int integer(const std::string &key, const std::string &v) {
    const double x = number(key, v);
    if (x != std::floor(x) || std::abs(x) > 1e6) throw ConfigInvalid(key + ": not an integer: '" + v + "'");
    return int(x);
}

Vec3 vec3(const std::string &key, const std::string &v) {
    auto parts = split(v);
    if (parts.size() != 3) throw ConfigInvalid(key + ": expected three comma separated numbers");
    return {number(key, parts[0]), number(key, parts[1]), number(key, parts[2])};
}

int inverse_epsilon(const std::string &key, const std::string &v) {
    if (v.rfind("1/", 0) != 0) throw ConfigInvalid(key + ": epsilons are written 1/m, got '" + v + "'");
    const int m = integer(key, v.substr(2));
    if (m < 2) throw ConfigInvalid(key + ": 1/m needs m >= 2");
    return m;
}

} // namespace

void set_config_value(Config &c, const std::string &key, const std::string &v) {
    auto visc = [&](int i) {
        if (!c.viscosities) c.viscosities = std::array<double, 4>{0, 0, 0, 0};
        (*c.viscosities)[i] = number(key, v);
    };
    if (key == "geometry.resolution") c.resolution = integer(key, v);
    else if (key == "geometry.obstacle_radius") c.obstacle.radius = number(key, v);
    else if (key == "geometry.obstacle_center") c.obstacle.center = vec3(key, v);
    else if (key == "params.N2") c.N2 = number(key, v);
    else if (key == "params.nu") visc(0);
    else if (key == "params.nu_r") visc(1);
    else if (key == "params.ca") visc(2);
    else if (key == "params.cd") visc(3);
    else if (key == "params.Rc") c.Rc = number(key, v);
    else if (key == "params.epsilon") c.epsilon = number(key, v);
    else if (key == "params.alpha") c.alpha = number(key, v);
    else if (key == "params.beta") c.beta = number(key, v);
    else if (key == "forcing.f") { parse_field(v); c.f = v; }
    else if (key == "forcing.g") { parse_field(v); c.g = v; }
    else if (key == "sweep.epsilons") {
        c.inverse_epsilons.clear();
        for (const auto &s : split(v)) c.inverse_epsilons.push_back(inverse_epsilon(key, s));
    }
    else if (key == "sweep.resolution") c.sweep_resolution = integer(key, v);
    else if (key == "darcy.resolution") c.darcy_resolution = integer(key, v);
    else if (key == "output.directory") c.directory = v;
    else if (key == "output.formats") c.formats = split(v);
    else if (key == "check.safety_factor") c.safety_factor = number(key, v);
    else throw ConfigInvalid("unknown key '" + key + "'");
}

Config parse_config(const std::string &text, Config c) {
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigInvalid("line " + std::to_string(n) + ": expected key = value");
        set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

Config load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void Config::validate() const {
    if (N2.has_value() == viscosities.has_value())
        throw ConfigInvalid("give exactly one of params.N2 or the viscosities nu, nu_r, ca, cd");
    if (viscosities)
        for (double x : *viscosities)
            if (!(x > 0)) throw ConfigInvalid("all four viscosities must be given and positive");
    if (resolution < 2 || sweep_resolution < 2 || darcy_resolution < 1) throw ConfigInvalid("resolution too small");
    if (inverse_epsilons.empty()) throw ConfigInvalid("sweep.epsilons is empty");
    std::vector<int> e = inverse_epsilons;
    std::sort(e.begin(), e.end());
    if (std::adjacent_find(e.begin(), e.end()) != e.end()) throw ConfigInvalid("sweep.epsilons repeats a value");
    for (int m : inverse_epsilons)
        if (darcy_resolution % m != 0) throw ConfigInvalid("darcy.resolution must be a multiple of every 1/epsilon");
    if (!(safety_factor >= 1)) throw ConfigInvalid("check.safety_factor must be at least 1");
    for (const auto &f : formats)
        if (f != "json" && f != "csv" && f != "vtk") throw ConfigInvalid("unknown output format '" + f + "'");
    params().validate();
}

DimensionlessParams Config::params() const {
    DimensionlessParams p;
    if (viscosities) {
        const auto &v = *viscosities;
        p = nondimensionalize(v[0], v[1], v[2], v[3], epsilon);
        p.epsilon = 1;
    } else {
        p.N2 = *N2;
        p.Rc = Rc;
    }
    p.beta = beta;
    p.alpha = alpha ? *alpha : 1.0 / (p.N2 * (1 + beta));
    return p;
}

std::vector<double> Config::epsilons() const {
    std::vector<double> e;
    for (int m : inverse_epsilons) e.push_back(1.0 / m);
    return e;
}

bool Config::emits(const std::string &format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

VectorField parse_field(const std::string &spec) {
    const std::string s = trim(spec);
    if (s == "zero") return [](const Vec3 &) { return Vec3(0, 0, 0); };
    if (s == "e1" || s == "e2" || s == "e3") {
        const Vec3 e = Vec3::Unit(s[1] - '1');
        return [e](const Vec3 &) { return e; };
    }
    if (s == "shear") return [](const Vec3 &x) { return Vec3(std::sin(M_PI * x[1]), 0, 0); };
    const Vec3 c = vec3("forcing", s);
    return [c](const Vec3 &) { return c; };
}

std::string default_config_text() {
    return "# cell geometry\n"
           "geometry.resolution = 8\n"
           "geometry.obstacle_radius = 0.25\n"
           "geometry.obstacle_center = 0.5, 0.5, 0.5\n"
           "\n"
           "# either N2 or nu, nu_r, ca, cd (with params.epsilon)\n"
           "params.N2 = 0.25\n"
           "params.Rc = 1\n"
           "params.alpha = 2   # 1/alpha = N2 (1 + beta), gamma = 0\n"
           "params.beta = 1\n"
           "\n"
           "forcing.f = 1, 0, 0\n"
           "forcing.g = 0, 0, 0\n"
           "\n"
           "sweep.epsilons = 1/2, 1/3, 1/4\n"
           "sweep.resolution = 6\n"
           "darcy.resolution = 12\n"
           "\n"
           "check.safety_factor = 1.25\n"
           "output.directory = out\n"
           "output.formats = json, csv, vtk\n";
}

} // namespace microdarcy
