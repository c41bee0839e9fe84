#pragma once

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "qdscope/fitkit.hpp"

namespace qdscope {

struct WaveformPoint {
    double dt_oe_ps = 0.0;
    double v = 0.0;        // reconstructed pulse voltage
    double stderr_v = 0.0;
    std::optional<double> alt_v;   // secondary mode (bimodal delays)
    std::optional<double> alt_weight;
    int n_peaks = 1;
    double weight_hi = 0.0; // area fraction of the high-level peak
};

struct SampledWaveform {
    std::vector<WaveformPoint> points; // strictly increasing dt_oe
    double v_bias_res_used = 0.0;
};

struct FitEntry {
    double dt_oe_ps = 0.0;
    std::variant<PeakFit, BimodalFit> fit;
};

// v(dt) = mode + v_bias_res; bimodal entries contribute the dominant mode as
// v and the other as alt_v with its weight. Non-converged entries are
// dropped; an empty survivor set is an error.
SampledWaveform reconstruct_waveform(const std::vector<FitEntry>& fits,
                                     const QDParams& qd);

struct WaveformMetrics {
    double rms_v = 0.0;      // over single-peak points
    double max_abs_v = 0.0;  // over single-peak points
    std::vector<double> residuals; // one per point, bimodal included
    std::size_t n_bimodal = 0;
};

WaveformMetrics compare_to_truth(const SampledWaveform& sampled, const PulseSpec& pulse);

struct BimodalClass {
    int n_peaks = 1;
    double weight_hi = 0.0;
};

// Per-delay classification; single peaks count as weight 1/0 by proximity to
// the high/low level resonance voltages.
std::map<double, BimodalClass> classify_bimodal(const std::vector<FitEntry>& fits,
                                                double v_lo_res, double v_hi_res);

// Number of delays where neither level dominates 3:1 (weight_hi strictly
// inside (0.25, 0.75)); the paper's "3 to 4 time steps" jitter width.
std::size_t transition_step_count(const std::map<double, BimodalClass>& cls);

} // namespace qdscope
