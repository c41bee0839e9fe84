#pragma once

#include <optional>
#include <vector>

namespace qdscope {

// Capacitive feed-through undershoot: a negative Gaussian dip placed shortly
// before the rising edge (gate-to-drain displacement current of the output
// inverters).
struct Feedthrough {
    double t_center_ps = -30.0; // relative to the rising edge start
    double width_sigma_ps = 6.0;
    double depth_v = 0.0; // >= 0; 0 disables the dip
};

// One damped ringing mode excited by the fast leading edge.
struct RingingMode {
    double amplitude_v = 0.0;
    double frequency_per_ps = 0.0; // ordinary frequency, cycles per ps
    double damping_per_ps = 0.0;
    double phase_rad = 0.0;
};

// Parametric model of the periodic electric transient V_P(t) on the anode.
// Segments are stitched continuously: the falling edge starts from the value
// the rising segment reached at the end of the plateau window.
struct PulseSpec {
    double v_low = 0.0;  // logic-low level V_SS
    double v_high = 1.2; // logic-high level V_DD
    double t_rise_start_ps = 0.0;
    double tau_rise_ps = 15.0;
    double plateau_width_ps = 1357.0; // rising segment duration (edge + plateau)
    double tau_fall_ps = 12.0;
    std::optional<Feedthrough> feedthrough;
    std::vector<RingingMode> ringing;
    double period_ps = 12500.0; // 80 MHz repetition

    // Throws config_error naming the violated invariant.
    void validate() const;
};

// V_P(t) in volts; t is evaluated modulo the period.
double eval_pulse(const PulseSpec& spec, double t_ps);

// Analytic dV_P/dt in V/ps; right-hand derivative at segment junctions.
double pulse_slope(const PulseSpec& spec, double t_ps);

struct PulseExtras {
    std::optional<Feedthrough> feedthrough;
    std::vector<RingingMode> ringing;
};

// CMOS output stage pulse: swing v_dd from a 0 V baseline, inverted for
// negative polarity, repetition fixed by the 80 MHz laser.
PulseSpec make_cmos_pulse(double v_dd, int polarity, double tau_rise_ps,
                          double tau_fall_ps, double width_ps,
                          const PulseExtras& extras = {});

// Degenerate spec holding a constant level (zero swing); used for static
// calibration runs.
PulseSpec make_constant_pulse(double level_v);

} // namespace qdscope
