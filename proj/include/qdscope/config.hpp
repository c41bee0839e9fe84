#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdscope/bench.hpp"
#include "qdscope/pulse.hpp"
#include "qdscope/qdot.hpp"

namespace qdscope {

struct FitConfig {
    int max_iter = 200;
    double prominence = 5.0;
    double peak_min_separation_v = 0.3;
    // RC-edge fit window; +/-inf means the full delay range.
    double rc_window_start_ps = -1e300;
    double rc_window_stop_ps = 1e300;

    void validate() const;
};

struct RunSection {
    std::string preset;  // empty: plain defaults
    std::string out_dir = "out";
    double dt_start_ps = -50.0;
    double dt_stop_ps = 50.0;
    double dt_step_ps = 7.0;
    std::vector<double> dt_list; // when nonempty, overrides start/stop/step
    bool dump_trajectory = false;

    void validate() const;
};

// One fully resolved run description: defaults -> preset -> config file ->
// command line overrides.
struct RunConfig {
    PulseSpec pulse;
    LaserSpec laser;
    QDParams qd;
    BenchConfig bench;
    FitConfig fit;
    RunSection run;

    std::vector<double> dt_grid() const;
    void validate() const;
    // Deterministic dump of every physics/fit/grid key (seed, threads and
    // out_dir excluded); fed to the hash below.
    std::string canonical() const;
    std::uint64_t config_hash() const; // FNV-1a over canonical()
    std::string config_hash_hex() const;
    // Resonant cathode voltages of the two logic levels, V_N = V_P - V_B,Res.
    double v_lo_resonance() const;
    double v_hi_resonance() const;
};

// Known presets: fig3, fig4, fig5a, figS1a, figS1b, plateau-stats.
std::vector<std::string> preset_names();
void apply_preset(RunConfig& cfg, const std::string& name);

// Parse + validate; path may be empty (pure defaults). preset_override, when
// nonempty, wins over the file's [run] preset key. The precedence is
// defaults, then preset, then file keys.
RunConfig load_config(const std::string& path, const std::string& preset_override = "");
RunConfig parse_config_text(const std::string& text, const std::string& preset_override = "");

std::uint64_t fnv1a64(const std::string& s);

} // namespace qdscope
