// fitting.hpp - Least-squares fits used by the scaling experiments

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace spinorbit::fit {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    std::size_t points = 0;
};

inline LineFit linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit::linear: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit::linear: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.points = x.size();
    if (x.size() > 2) {
        double ss = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double r = y[i] - f.intercept - f.slope * x[i];
            ss += r * r;
        }
        f.slope_stderr = std::sqrt(ss / (n - 2.0) / sxx);
    }
    return f;
}

// Slope of log(y) against log(x).
inline LineFit loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("fit::loglog: non-positive value");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return linear(lx, ly);
}

struct ProportionalFit {
    double coefficient = 0.0;
    double stderr_ = 0.0;
    double relative_residual = 0.0;  // ||y - c x|| / ||y||
};

// y ~ c * x through the origin.
inline ProportionalFit proportional(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("fit::proportional: bad input");
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    if (sxx == 0.0) throw std::invalid_argument("fit::proportional: zero abscissae");
    ProportionalFit f;
    f.coefficient = sxy / sxx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - f.coefficient * x[i];
        ss += r * r;
    }
    f.relative_residual = syy > 0 ? std::sqrt(ss / syy) : 0.0;
    if (x.size() > 1) f.stderr_ = std::sqrt(ss / static_cast<double>(x.size() - 1) / sxx);
    return f;
}

}  // namespace spinorbit::fit
