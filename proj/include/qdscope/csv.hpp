#pragma once

#include <map>
#include <string>
#include <vector>

#include "qdscope/bench.hpp"
#include "qdscope/qdot.hpp"
#include "qdscope/recon.hpp"

namespace qdscope {

// Provenance comment block carried by every CSV we write.
struct FileMeta {
    std::string kind;
    std::string config_hash; // 16 hex digits
    std::uint64_t seed = 0;
    std::string version;
    std::map<std::string, std::string> extra; // other '# key=value' lines
};

// fits.csv row; bimodal delays produce two rows sharing dt_oe_ps.
struct FitRow {
    double dt_oe_ps = 0.0;
    double mode_v = 0.0;
    double stderr_mode_mv = 0.0;
    double sigma_v = 0.0;
    double tau_v_v = 0.0;
    double amplitude = 0.0;
    double baseline = 0.0;
    int converged = 0;
    int n_peaks = 1;
    double weight_hi = 0.0;
};

void write_scans_csv(const std::string& path, const std::vector<ResonanceScan>& scans,
                     const FileMeta& meta);
std::vector<ResonanceScan> read_scans_csv(const std::string& path, FileMeta& meta);

void write_fits_csv(const std::string& path, const std::vector<FitRow>& rows,
                    const FileMeta& meta);
std::vector<FitRow> read_fits_csv(const std::string& path, FileMeta& meta);

void write_waveform_csv(const std::string& path, const SampledWaveform& wf,
                        const FileMeta& meta);
SampledWaveform read_waveform_csv(const std::string& path, FileMeta& meta);

void write_trajectory_csv(const std::string& path, const BlochTrajectory& traj,
                          const FileMeta& meta);

// Shared numeric formatting (printf %.*g, C locale semantics).
std::string csv_num(double v, int sig_digits);

} // namespace qdscope
