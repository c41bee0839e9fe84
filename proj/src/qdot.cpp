#include "qdscope/qdot.hpp"

#include <array>
#include <cmath>

#include "qdscope/constants.hpp"
#include "qdscope/errors.hpp"
#include "qdscope/ode.hpp"

namespace qdscope {

namespace {

// State layout for the integrator.
enum : std::size_t { iGG, iXX, iE, iH, iRE, iIM, iQ, kNState };

BlochState to_state(const std::array<double, kNState>& y) {
    return BlochState{y[iGG], y[iXX], y[iE], y[iH], y[iRE], y[iIM], y[iQ]};
}

struct BlochRhs {
    const QDParams& qd;
    const LaserSpec& laser;
    const BiasFn& bias;

    void operator()(double t, const std::array<double, kNState>& y,
                    std::array<double, kNState>& dy) const {
        const double v = bias(t);
        const auto [ge, gh] = tunneling_rates(qd, v);
        const double g_sum = ge + gh;
        const double gamma = 0.5 * g_sum + qd.gamma_pure0_per_ps;
        const double dw = stark_detuning(qd, v) / kHbarMeVps; // rad/ps
        const double om = rabi_envelope(laser, t);

        // rho_gx' = (i*dw - gamma) rho_gx - i (om/2)(rho_gg - rho_xx)
        dy[iRE] = -dw * y[iIM] - gamma * y[iRE];
        dy[iIM] = dw * y[iRE] - gamma * y[iIM] - 0.5 * om * (y[iGG] - y[iXX]);
        dy[iXX] = -om * y[iIM] - g_sum * y[iXX];
        dy[iGG] = om * y[iIM] + gh * y[iE] + ge * y[iH];
        dy[iE] = gh * y[iXX] - gh * y[iE];
        dy[iH] = ge * y[iXX] - ge * y[iH];
        dy[iQ] = g_sum * y[iXX];
    }
};

} // namespace

void QDParams::validate() const {
    auto fail = [](const char* what) { throw config_error(std::string("qd: ") + what); };
    if (!(stark_slope_mev_per_v > 0.0)) fail("stark_slope must be > 0");
    if (!(gamma_e0_per_ps >= 0.0) || !(gamma_h0_per_ps >= 0.0)) fail("rates must be >= 0");
    if (!(v_e > 0.0) || !(v_h > 0.0)) fail("voltage scales must be > 0");
    if (!(gamma_pure0_per_ps >= 0.0)) fail("gamma_pure0 must be >= 0");
    if (!(f_rep_per_ps > 0.0)) fail("f_rep must be > 0");
    if (!(period_ps > 0.0)) fail("period must be > 0");
    // The dot must empty between pulses for the per-cycle charge accounting.
    const auto [ge, gh] = tunneling_rates(*this, v_bias_res);
    if (!(ge * period_ps > 10.0 && gh * period_ps > 10.0))
        fail("tunneling too slow: dot does not empty between pulses");
}

void LaserSpec::validate() const {
    if (!(fwhm_ps > 0.0)) throw config_error("laser: fwhm must be > 0");
    if (!(pulse_area_rad >= 0.0)) throw config_error("laser: pulse_area must be >= 0");
}

double LaserSpec::envelope_sigma_ps() const {
    // fwhm is the intensity FWHM; the field envelope is sqrt(2) wider.
    return fwhm_ps * 1.4142135623730951 / kGaussFwhm;
}

double stark_detuning(const QDParams& qd, double v_bias) {
    return qd.stark_slope_mev_per_v * (v_bias - qd.v_bias_res);
}

double rabi_envelope(const LaserSpec& laser, double t_ps) {
    if (laser.pulse_area_rad == 0.0) return 0.0;
    const double sig = laser.envelope_sigma_ps();
    const double z = (t_ps - laser.arrival_time_ps) / sig;
    return laser.pulse_area_rad / (sig * 2.5066282746310002) * std::exp(-0.5 * z * z);
}

std::pair<double, double> tunneling_rates(const QDParams& qd, double v_bias) {
    const double dv = v_bias - qd.v_bias_res;
    return {qd.gamma_e0_per_ps * std::exp(dv / qd.v_e),
            qd.gamma_h0_per_ps * std::exp(dv / qd.v_h)};
}

BlochTrajectory integrate_bloch(const QDParams& qd, const LaserSpec& laser,
                                const BiasFn& bias_fn,
                                std::pair<double, double> t_span_ps, double rel_tol) {
    qd.validate();
    laser.validate();
    const double pad = 5.0 * laser.fwhm_ps;
    if (t_span_ps.first > laser.arrival_time_ps - pad + 1e-9 ||
        t_span_ps.second < laser.arrival_time_ps + pad - 1e-9)
        throw config_error("integrate_bloch: t_span must cover arrival +/- 5 fwhm");

    BlochRhs rhs{qd, laser, bias_fn};
    std::array<double, kNState> y{1.0, 0, 0, 0, 0, 0, 0};
    OdeOptions opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = rel_tol * 1e-3;
    opt.h_init = laser.fwhm_ps / 50.0;

    BlochTrajectory traj;
    integrate_adaptive<kNState>(rhs, y, t_span_ps.first, t_span_ps.second, opt,
                                [&](double t, const std::array<double, kNState>& s) {
                                    traj.times_ps.push_back(t);
                                    traj.states.push_back(to_state(s));
                                });
    traj.final = traj.states.back();
    return traj;
}

double photocurrent_single(const QDParams& qd, const LaserSpec& laser,
                           const PulseSpec& pulse, double v_n, double dt_oe_ps,
                           double rel_tol) {
    qd.validate();
    laser.validate();
    pulse.validate();

    const double t_laser = dt_oe_ps + laser.arrival_time_ps;
    const double t0 = t_laser - 6.0 * laser.fwhm_ps;
    const double t1 = t0 + pulse.period_ps;

    std::array<double, kNState> y{1.0, 0, 0, 0, 0, 0, 0};
    OdeOptions opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = rel_tol * 1e-3;
    opt.h_init = laser.fwhm_ps / 50.0;

    auto direct_rhs = [&](double t, const std::array<double, kNState>& s,
                          std::array<double, kNState>& ds) {
        const double v = eval_pulse(pulse, t) - v_n;
        const auto [ge, gh] = tunneling_rates(qd, v);
        const double g_sum = ge + gh;
        const double gamma = 0.5 * g_sum + qd.gamma_pure0_per_ps;
        const double dw = stark_detuning(qd, v) / kHbarMeVps;
        const double om = rabi_envelope(laser, t);
        ds[iRE] = -dw * s[iIM] - gamma * s[iRE];
        ds[iIM] = dw * s[iRE] - gamma * s[iIM] - 0.5 * om * (s[iGG] - s[iXX]);
        ds[iXX] = -om * s[iIM] - g_sum * s[iXX];
        ds[iGG] = om * s[iIM] + gh * s[iE] + ge * s[iH];
        ds[iE] = gh * s[iXX] - gh * s[iE];
        ds[iH] = ge * s[iXX] - ge * s[iH];
        ds[iQ] = g_sum * s[iXX];
    };
    integrate_adaptive<kNState>(direct_rhs, y, t0, t1, opt,
                                [](double, const std::array<double, kNState>&) {});

    const double f_rep_hz = qd.f_rep_per_ps * 1e12;
    return kElementaryCharge * f_rep_hz * y[iQ];
}

double chirp_at(const QDParams& qd, const PulseSpec& pulse, double t_ps) {
    return qd.stark_slope_mev_per_v * pulse_slope(pulse, t_ps);
}

} // namespace qdscope
