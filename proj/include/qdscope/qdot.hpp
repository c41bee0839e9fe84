#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qdscope/pulse.hpp"

namespace qdscope {

// Stark transduction, tunneling-rate law and dephasing of the single-QD
// photodiode. The rate law is exponential in the reverse bias (WKB-like);
// the prefactors are calibration constants.
struct QDParams {
    double stark_slope_mev_per_v = 2.52; // k_S
    double v_bias_res = -1.1;            // reverse bias at which the laser is resonant
    double gamma_e0_per_ps = 0.02;
    double gamma_h0_per_ps = 0.005;
    double v_e = 0.5; // voltage scale of the electron rate law; +inf = constant
    double v_h = 0.5;
    double gamma_pure0_per_ps = 0.001;
    double f_rep_per_ps = 8e-5; // 80 MHz
    double period_ps = 12500.0; // used only by the emptying-between-pulses check

    void validate() const;
};

// Resonant ps excitation pulse; fwhm_ps is the *intensity* FWHM of the
// transform limited pulse, so the linear-response spectral width follows the
// 0.44 time-bandwidth product.
struct LaserSpec {
    double fwhm_ps = 4.5;
    double pulse_area_rad = 0.75 * 3.14159265358979323846;
    double arrival_time_ps = 0.0;

    void validate() const;
    // Standard deviation of the Rabi-frequency envelope.
    double envelope_sigma_ps() const;
};

// Two-level system + single-carrier dark states; q_extracted accumulates the
// e-h pair extraction probability for the running cycle.
struct BlochState {
    double rho_gg = 1.0;
    double rho_xx = 0.0;
    double rho_e = 0.0;
    double rho_h = 0.0;
    double coh_re = 0.0;
    double coh_im = 0.0;
    double q_extracted = 0.0;
};

struct BlochTrajectory {
    std::vector<double> times_ps;
    std::vector<BlochState> states;
    BlochState final;
};

using BiasFn = std::function<double(double)>;

// Transition-energy shift relative to the fixed laser, in meV.
double stark_detuning(const QDParams& qd, double v_bias);

// Gaussian Rabi-frequency envelope in rad/ps; integrates to the pulse area.
double rabi_envelope(const LaserSpec& laser, double t_ps);

// (gamma_e, gamma_h) in 1/ps at the given reverse bias.
std::pair<double, double> tunneling_rates(const QDParams& qd, double v_bias);

// Integrates the driven-dissipative Bloch system in the laser rotating frame
// over t_span, starting from the empty dot. rel_tol controls the local error.
BlochTrajectory integrate_bloch(const QDParams& qd, const LaserSpec& laser,
                                const BiasFn& bias_fn,
                                std::pair<double, double> t_span_ps,
                                double rel_tol = 1e-8);

// Per-cycle photocurrent for one (v_n, dt_oe) sampling point. The bias seen
// by the dot is V_P(t) - V_N; the laser arrives at dt_oe + arrival_time.
double photocurrent_single(const QDParams& qd, const LaserSpec& laser,
                           const PulseSpec& pulse, double v_n, double dt_oe_ps,
                           double rel_tol = 1e-8);

// Instantaneous electric chirp of the transition, meV/ps.
double chirp_at(const QDParams& qd, const PulseSpec& pulse, double t_ps);

} // namespace qdscope
