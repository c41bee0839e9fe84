#include "qdscope/recon.hpp"

#include <algorithm>
#include <cmath>

#include "qdscope/errors.hpp"

namespace qdscope {

SampledWaveform reconstruct_waveform(const std::vector<FitEntry>& fits,
                                     const QDParams& qd) {
    SampledWaveform out;
    out.v_bias_res_used = qd.v_bias_res;
    for (const auto& entry : fits) {
        WaveformPoint pt;
        pt.dt_oe_ps = entry.dt_oe_ps;
        if (const auto* single = std::get_if<PeakFit>(&entry.fit)) {
            if (!single->converged) continue;
            pt.v = single->mode + qd.v_bias_res;
            pt.stderr_v = single->stderr_mode;
            pt.n_peaks = 1;
        } else {
            const auto& bi = std::get<BimodalFit>(entry.fit);
            const PeakFit& dom = bi.weight_hi >= bi.weight_lo ? bi.peak_hi : bi.peak_lo;
            const PeakFit& alt = bi.weight_hi >= bi.weight_lo ? bi.peak_lo : bi.peak_hi;
            if (!dom.converged) continue;
            pt.v = dom.mode + qd.v_bias_res;
            pt.stderr_v = dom.stderr_mode;
            if (bi.bimodal) {
                pt.alt_v = alt.mode + qd.v_bias_res;
                pt.alt_weight = std::min(bi.weight_lo, bi.weight_hi);
                pt.n_peaks = 2;
            } else {
                pt.n_peaks = 1;
            }
            pt.weight_hi = bi.weight_hi;
        }
        if (!std::isfinite(pt.v)) continue;
        out.points.push_back(pt);
    }
    if (out.points.empty())
        throw empty_reconstruction_error("reconstruct: no converged fits");
    std::sort(out.points.begin(), out.points.end(),
              [](const WaveformPoint& a, const WaveformPoint& b) {
                  return a.dt_oe_ps < b.dt_oe_ps;
              });
    for (std::size_t k = 0; k + 1 < out.points.size(); ++k)
        if (!(out.points[k].dt_oe_ps < out.points[k + 1].dt_oe_ps))
            throw config_error("reconstruct: duplicate optoelectronic delay");
    return out;
}

WaveformMetrics compare_to_truth(const SampledWaveform& sampled,
                                 const PulseSpec& pulse) {
    WaveformMetrics m;
    double acc = 0.0;
    std::size_t n_single = 0;
    for (const auto& pt : sampled.points) {
        const double r = pt.v - eval_pulse(pulse, pt.dt_oe_ps);
        m.residuals.push_back(r);
        if (pt.n_peaks > 1) {
            ++m.n_bimodal;
            continue;
        }
        acc += r * r;
        m.max_abs_v = std::max(m.max_abs_v, std::abs(r));
        ++n_single;
    }
    m.rms_v = n_single > 0 ? std::sqrt(acc / static_cast<double>(n_single)) : 0.0;
    return m;
}

std::map<double, BimodalClass> classify_bimodal(const std::vector<FitEntry>& fits,
                                                double v_lo_res, double v_hi_res) {
    std::map<double, BimodalClass> out;
    for (const auto& entry : fits) {
        BimodalClass c;
        if (const auto* single = std::get_if<PeakFit>(&entry.fit)) {
            c.n_peaks = 1;
            c.weight_hi = std::abs(single->mode - v_hi_res) <
                                  std::abs(single->mode - v_lo_res)
                              ? 1.0
                              : 0.0;
        } else {
            const auto& bi = std::get<BimodalFit>(entry.fit);
            c.n_peaks = bi.bimodal ? 2 : 1;
            c.weight_hi = bi.weight_hi;
        }
        out[entry.dt_oe_ps] = c;
    }
    return out;
}

std::size_t transition_step_count(const std::map<double, BimodalClass>& cls) {
    std::size_t n = 0;
    for (const auto& [dt, c] : cls)
        if (c.weight_hi > 0.25 && c.weight_hi < 0.75) ++n;
    return n;
}

} // namespace qdscope
