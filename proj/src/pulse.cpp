#include "qdscope/pulse.hpp"

#include <cmath>
#include <string>

#include "qdscope/errors.hpp"

namespace qdscope {

namespace {

// Phase inside one period, in [0, period).
double wrap_phase(const PulseSpec& s, double t) {
    double u = std::fmod(t - s.t_rise_start_ps, s.period_ps);
    if (u < 0.0) u += s.period_ps;
    return u;
}

// Signed distance to the feed-through center, wrapped to [-P/2, P/2).
double wrapped_dist(double u, double center, double period) {
    double d = std::fmod(u - center, period);
    if (d < -0.5 * period) d += period;
    if (d >= 0.5 * period) d -= period;
    return d;
}

double feedthrough_value(const PulseSpec& s, double u) {
    if (!s.feedthrough || s.feedthrough->depth_v == 0.0) return 0.0;
    const auto& ft = *s.feedthrough;
    double uc = std::fmod(ft.t_center_ps, s.period_ps);
    if (uc < 0.0) uc += s.period_ps;
    const double d = wrapped_dist(u, uc, s.period_ps);
    const double z = d / ft.width_sigma_ps;
    return -ft.depth_v * std::exp(-0.5 * z * z);
}

double feedthrough_slope(const PulseSpec& s, double u) {
    if (!s.feedthrough || s.feedthrough->depth_v == 0.0) return 0.0;
    const auto& ft = *s.feedthrough;
    double uc = std::fmod(ft.t_center_ps, s.period_ps);
    if (uc < 0.0) uc += s.period_ps;
    const double d = wrapped_dist(u, uc, s.period_ps);
    const double s2 = ft.width_sigma_ps * ft.width_sigma_ps;
    return ft.depth_v * (d / s2) * std::exp(-0.5 * d * d / s2);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Ringing excited by the leading edge. The RC-shaped turn-on keeps V_P
// continuous at the period wrap for any phase choice.
double ringing_value(const PulseSpec& s, double u) {
    double acc = 0.0;
    for (const auto& m : s.ringing) {
        if (m.amplitude_v == 0.0) continue;
        acc += m.amplitude_v * (1.0 - std::exp(-u / s.tau_rise_ps)) *
               std::exp(-m.damping_per_ps * u) *
               std::sin(kTwoPi * m.frequency_per_ps * u + m.phase_rad);
    }
    return acc;
}

double ringing_slope(const PulseSpec& s, double u) {
    double acc = 0.0;
    for (const auto& m : s.ringing) {
        if (m.amplitude_v == 0.0) continue;
        const double turnon = 1.0 - std::exp(-u / s.tau_rise_ps);
        const double dturnon = std::exp(-u / s.tau_rise_ps) / s.tau_rise_ps;
        const double damp = std::exp(-m.damping_per_ps * u);
        const double arg = kTwoPi * m.frequency_per_ps * u + m.phase_rad;
        acc += m.amplitude_v *
               (dturnon * damp * std::sin(arg) +
                turnon * damp *
                    (kTwoPi * m.frequency_per_ps * std::cos(arg) -
                     m.damping_per_ps * std::sin(arg)));
    }
    return acc;
}

// Value the rising segment reaches at the end of the plateau window; the
// falling segment starts from here.
double rise_end_value(const PulseSpec& s) {
    const double swing = s.v_high - s.v_low;
    return s.v_low + swing * (1.0 - std::exp(-s.plateau_width_ps / s.tau_rise_ps));
}

} // namespace

void PulseSpec::validate() const {
    auto fail = [](const std::string& what) { throw config_error("pulse: " + what); };
    if (!(tau_rise_ps > 0.0)) fail("tau_rise must be > 0");
    if (!(tau_fall_ps > 0.0)) fail("tau_fall must be > 0");
    if (!(plateau_width_ps > 0.0)) fail("plateau_width must be > 0");
    if (!(period_ps > plateau_width_ps)) fail("period must exceed plateau_width");
    if (!std::isfinite(v_low) || !std::isfinite(v_high)) fail("levels must be finite");
    if (feedthrough) {
        if (!(feedthrough->depth_v >= 0.0)) fail("feedthrough.depth must be >= 0");
        if (!(feedthrough->width_sigma_ps > 0.0)) fail("feedthrough.width_sigma must be > 0");
    }
    for (const auto& m : ringing) {
        if (!std::isfinite(m.amplitude_v)) fail("ringing amplitude must be finite");
        if (!(m.damping_per_ps >= 0.0)) fail("ringing damping must be >= 0");
        if (!(m.frequency_per_ps >= 0.0)) fail("ringing frequency must be >= 0");
    }
    // The waveform must settle back to v_low before the next cycle.
    const double swing = std::abs(v_high - v_low);
    if (swing > 0.0) {
        const double u_end = std::nextafter(period_ps, 0.0);
        const double fall_u = u_end - plateau_width_ps;
        const double resid = std::abs((rise_end_value(*this) - v_low) *
                                      std::exp(-fall_u / tau_fall_ps)) +
                             std::abs(ringing_value(*this, u_end));
        if (resid >= 1e-3 * swing)
            fail("waveform does not return to v_low within one period");
    }
}

double eval_pulse(const PulseSpec& spec, double t_ps) {
    if (!std::isfinite(t_ps)) throw config_error("pulse: t must be finite");
    const double u = wrap_phase(spec, t_ps);
    const double swing = spec.v_high - spec.v_low;
    double v;
    if (u < spec.plateau_width_ps) {
        v = spec.v_low + swing * (1.0 - std::exp(-u / spec.tau_rise_ps));
        v += ringing_value(spec, u);
    } else {
        v = spec.v_low + (rise_end_value(spec) - spec.v_low) *
                             std::exp(-(u - spec.plateau_width_ps) / spec.tau_fall_ps);
        v += ringing_value(spec, u);
    }
    v += feedthrough_value(spec, u);
    return v;
}

double pulse_slope(const PulseSpec& spec, double t_ps) {
    if (!std::isfinite(t_ps)) throw config_error("pulse: t must be finite");
    const double u = wrap_phase(spec, t_ps);
    const double swing = spec.v_high - spec.v_low;
    double dv;
    if (u < spec.plateau_width_ps) {
        dv = swing / spec.tau_rise_ps * std::exp(-u / spec.tau_rise_ps);
        dv += ringing_slope(spec, u);
    } else {
        dv = -(rise_end_value(spec) - spec.v_low) / spec.tau_fall_ps *
             std::exp(-(u - spec.plateau_width_ps) / spec.tau_fall_ps);
        dv += ringing_slope(spec, u);
    }
    dv += feedthrough_slope(spec, u);
    return dv;
}

PulseSpec make_cmos_pulse(double v_dd, int polarity, double tau_rise_ps,
                          double tau_fall_ps, double width_ps,
                          const PulseExtras& extras) {
    if (!(v_dd > 0.0)) throw config_error("make_cmos_pulse: v_dd must be > 0");
    if (!(tau_rise_ps > 0.0) || !(tau_fall_ps > 0.0))
        throw config_error("make_cmos_pulse: time constants must be > 0");
    if (!(width_ps > 0.0)) throw config_error("make_cmos_pulse: width must be > 0");
    PulseSpec s;
    s.v_low = 0.0;
    s.v_high = polarity >= 0 ? v_dd : -v_dd;
    s.t_rise_start_ps = 0.0;
    s.tau_rise_ps = tau_rise_ps;
    s.tau_fall_ps = tau_fall_ps;
    s.plateau_width_ps = width_ps;
    s.period_ps = 12500.0;
    s.feedthrough = extras.feedthrough;
    s.ringing = extras.ringing;
    s.validate();
    return s;
}

PulseSpec make_constant_pulse(double level_v) {
    PulseSpec s;
    s.v_low = level_v;
    s.v_high = level_v;
    s.validate();
    return s;
}

} // namespace qdscope
