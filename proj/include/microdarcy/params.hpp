#pragma once

namespace microdarcy {

struct DimensionlessParams {
    double N2 = 0.25;
    double Rc = 1.0;
    double alpha = 2.0;
    double beta = 1.0;
    double epsilon = 1.0; // macro problems only

    double gamma() const { return 1.0 / alpha - N2 - N2 * beta; }
    // throws ConfigInvalid
    void validate() const;
    // alpha with 1/alpha = N2 (1 + beta), so that gamma = 0
    static DimensionlessParams gamma_zero(double N2, double Rc = 1.0, double beta = 1.0);
};

} // namespace microdarcy
