#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "qdscope/errors.hpp"

namespace qdscope {

struct OdeOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    double h_init = 0.0; // 0: span/1000
    double h_max = 0.0;  // 0: unrestricted
    std::size_t max_steps = 2'000'000;
};

// Adaptive Dormand-Prince 5(4) with FSAL and a plain step-halving controller.
// rhs(t, y, dydt); observer(t, y) is called for the initial point and every
// accepted step. Throws integration_error (carrying the last good time) if
// the step size underflows or the step budget is exhausted.
template <std::size_t N, typename Rhs, typename Observer>
void integrate_adaptive(Rhs&& rhs, std::array<double, N>& y, double t0, double t1,
                        const OdeOptions& opt, Observer&& observer) {
    using State = std::array<double, N>;

    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 35.0 / 384.0 - 5179.0 / 57600.0,
                            e3 = 500.0 / 1113.0 - 7571.0 / 16695.0,
                            e4 = 125.0 / 192.0 - 393.0 / 640.0,
                            e5 = -2187.0 / 6784.0 + 92097.0 / 339200.0,
                            e6 = 11.0 / 84.0 - 187.0 / 2100.0, e7 = -1.0 / 40.0;
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0,
                            c5 = 8.0 / 9.0;

    const double span = t1 - t0;
    if (!(span > 0.0)) throw config_error("integrate: t_span must be increasing");

    double h = opt.h_init > 0.0 ? opt.h_init : span / 1000.0;
    const double h_max = opt.h_max > 0.0 ? opt.h_max : span;
    const double h_min = span * 1e-14;
    if (h > h_max) h = h_max;

    double t = t0;
    State k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
    rhs(t, y, k1);
    observer(t, y);

    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > opt.max_steps)
            throw integration_error("integrate: step budget exhausted", t);
        if (h < h_min)
            throw integration_error("integrate: step size underflow", t);
        if (t + h > t1) h = t1 - t;

        for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        rhs(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                  a64 * k4[i] + a65 * k5[i]);
        rhs(t + h, ytmp, k6);
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                  b6 * k6[i]);
        rhs(t + h, ynew, k7);

        double err2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                  e6 * k6[i] + e7 * k7[i]);
            const double scale =
                opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double r = e / scale;
            err2 += r * r;
        }
        const double err = std::sqrt(err2 / static_cast<double>(N));

        if (err <= 1.0) {
            t += h;
            y = ynew;
            k1 = k7; // FSAL
            observer(t, y);
            double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
            if (fac > 5.0) fac = 5.0;
            h = std::min(h * fac, h_max);
        } else {
            double fac = 0.9 * std::pow(err, -0.2);
            if (fac < 0.2) fac = 0.2;
            h *= fac;
        }
    }
}

} // namespace qdscope
