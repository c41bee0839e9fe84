#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qdscope/pulse.hpp"
#include "qdscope/qdot.hpp"
#include "qdscope/rng.hpp"

namespace qdscope {

enum class JitterMethod { monte_carlo, gauss_hermite };

// Virtual instrument settings: delay-line jitter, source-meter noise and the
// cathode-voltage scan grid.
struct BenchConfig {
    double jitter_sigma_ps = 6.5;
    JitterMethod jitter_method = JitterMethod::gauss_hermite;
    std::size_t mc_samples = 200;
    std::size_t gh_order = 20;
    double noise_density_a_rthz = 30e-15; // A/sqrt(Hz)
    double integration_time_s = 0.1;
    double v_n_start = 0.8;
    double v_n_stop = 2.6;
    double v_n_step = 0.015;
    std::uint64_t seed = 1;
    double ode_rel_tol = 1e-8;
    int threads = 0; // 0: hardware concurrency

    void validate() const;
    std::vector<double> v_n_grid() const;
    // Per-point noise std from the spectral density and the equivalent noise
    // bandwidth 1/(2 T_int).
    double readout_sigma_a() const;
};

// One cathode-voltage sweep at fixed optoelectronic delay.
struct ResonanceScan {
    double dt_oe_ps = 0.0;
    std::vector<double> v_n;   // strictly increasing
    std::vector<double> i_pc;  // amperes
    std::uint64_t seed_used = 0;
};

using CurrentFn = std::function<double(double)>; // dt_oe -> amperes

// E[current_fn(dt_oe + xi)], xi ~ N(0, jitter_sigma^2). Monte Carlo draws come
// from the supplied stream; sigma = 0 short-circuits to a single evaluation.
double jitter_average(const CurrentFn& current_fn, double dt_oe_ps,
                      const BenchConfig& cfg, RngStream& rng);

// Adds one Gaussian readout-noise draw from the stream.
double add_readout_noise(double i_pc, const BenchConfig& cfg, RngStream& rng);

// Seed derivation: per-delay seeds hash the delay *value* (not its position
// in the grid), per-point streams hash the grid index. Parallel and
// sequential runs therefore agree bit for bit.
std::uint64_t delay_seed(std::uint64_t master_seed, double dt_oe_ps);
std::uint64_t point_seed(std::uint64_t dseed, std::size_t vn_index);

// Full jitter-averaged, noise-added sweep for one delay.
ResonanceScan resonance_scan(const QDParams& qd, const LaserSpec& laser,
                             const PulseSpec& pulse, const BenchConfig& cfg,
                             double dt_oe_ps);

struct ScanFailure {
    double dt_oe_ps;
    double v_n;
    std::string message;
};

struct SamplingResult {
    std::vector<ResonanceScan> scans;
    std::vector<ScanFailure> failures;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total, double dt_oe_ps)>;

// One scan per delay; failed scans are recorded and the remaining delays
// still run.
SamplingResult run_sampling_experiment(const QDParams& qd, const LaserSpec& laser,
                                       const PulseSpec& pulse, const BenchConfig& cfg,
                                       const std::vector<double>& dt_grid_ps,
                                       const ProgressFn& progress = {});

// Deterministic index-parallel map helper used by the scan loop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

} // namespace qdscope
