#pragma once

// Independent reference implementations used as test oracles. These must not
// share code with the library paths they check.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>

#include "qdscope/constants.hpp"
#include "qdscope/qdot.hpp"

namespace oracles {

// Composite Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t n_intervals) {
    if (n_intervals % 2 == 1) ++n_intervals;
    const double h = (b - a) / static_cast<double>(n_intervals);
    double acc = f(a) + f(b);
    for (std::size_t k = 1; k < n_intervals; ++k)
        acc += f(a + h * static_cast<double>(k)) * (k % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Fixed-step classical RK4 integration of the five-state Bloch cascade,
// written out independently of the library's adaptive path.
struct BlochRef {
    std::array<double, 7> y{1, 0, 0, 0, 0, 0, 0}; // gg, xx, e, h, re, im, q
};

inline std::array<double, 7> bloch_rhs_ref(const qdscope::QDParams& qd,
                                           const qdscope::LaserSpec& laser,
                                           const std::function<double(double)>& bias,
                                           double t, const std::array<double, 7>& y) {
    const double v = bias(t);
    const double dv = v - qd.v_bias_res;
    const double ge = qd.gamma_e0_per_ps * std::exp(dv / qd.v_e);
    const double gh = qd.gamma_h0_per_ps * std::exp(dv / qd.v_h);
    const double g_sum = ge + gh;
    const double gamma = 0.5 * g_sum + qd.gamma_pure0_per_ps;
    const double dw = qd.stark_slope_mev_per_v * dv / qdscope::kHbarMeVps;
    const double sig = laser.fwhm_ps * std::sqrt(2.0) / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const double z = (t - laser.arrival_time_ps) / sig;
    const double om =
        laser.pulse_area_rad / (sig * std::sqrt(2.0 * M_PI)) * std::exp(-0.5 * z * z);
    const double gg = y[0], xx = y[1], e = y[2], h = y[3], re = y[4], im = y[5];
    return {om * im + gh * e + ge * h,
            -om * im - g_sum * xx,
            gh * xx - gh * e,
            ge * xx - ge * h,
            -dw * im - gamma * re,
            dw * re - gamma * im - 0.5 * om * (gg - xx),
            g_sum * xx};
}

inline std::array<double, 7> integrate_bloch_rk4(const qdscope::QDParams& qd,
                                                 const qdscope::LaserSpec& laser,
                                                 const std::function<double(double)>& bias,
                                                 double t0, double t1, double dt) {
    std::array<double, 7> y{1, 0, 0, 0, 0, 0, 0};
    const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt));
    const double h = (t1 - t0) / static_cast<double>(n);
    double t = t0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto k1 = bloch_rhs_ref(qd, laser, bias, t, y);
        std::array<double, 7> ytmp;
        for (int i = 0; i < 7; ++i) ytmp[i] = y[i] + 0.5 * h * k1[i];
        const auto k2 = bloch_rhs_ref(qd, laser, bias, t + 0.5 * h, ytmp);
        for (int i = 0; i < 7; ++i) ytmp[i] = y[i] + 0.5 * h * k2[i];
        const auto k3 = bloch_rhs_ref(qd, laser, bias, t + 0.5 * h, ytmp);
        for (int i = 0; i < 7; ++i) ytmp[i] = y[i] + h * k3[i];
        const auto k4 = bloch_rhs_ref(qd, laser, bias, t + h, ytmp);
        for (int i = 0; i < 7; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t += h;
    }
    return y;
}

} // namespace oracles
