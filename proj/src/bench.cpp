#include "qdscope/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "qdscope/errors.hpp"
#include "qdscope/gauss_hermite.hpp"

namespace qdscope {

void BenchConfig::validate() const {
    auto fail = [](const char* what) { throw config_error(std::string("bench: ") + what); };
    if (!(jitter_sigma_ps >= 0.0)) fail("jitter_sigma must be >= 0");
    if (jitter_method == JitterMethod::monte_carlo && mc_samples < 1)
        fail("mc_samples must be >= 1");
    if (jitter_method == JitterMethod::gauss_hermite && gh_order < 1)
        fail("gh_order must be >= 1");
    if (!(noise_density_a_rthz >= 0.0)) fail("noise_density must be >= 0");
    if (!(integration_time_s > 0.0)) fail("integration_time must be > 0");
    if (!(v_n_step > 0.0)) fail("v_n_step must be > 0");
    if (!(v_n_stop > v_n_start)) fail("v_n_stop must exceed v_n_start");
    if (v_n_grid().size() < 8) fail("scan grid needs at least 8 points");
    if (!(ode_rel_tol > 0.0)) fail("ode_rel_tol must be > 0");
    if (threads < 0) fail("threads must be >= 0");
}

std::vector<double> BenchConfig::v_n_grid() const {
    std::vector<double> grid;
    const auto n = static_cast<std::size_t>(
        std::floor((v_n_stop - v_n_start) / v_n_step + 1e-9)) + 1;
    grid.reserve(n);
    for (std::size_t k = 0; k < n; ++k) grid.push_back(v_n_start + static_cast<double>(k) * v_n_step);
    return grid;
}

double BenchConfig::readout_sigma_a() const {
    return noise_density_a_rthz * std::sqrt(1.0 / (2.0 * integration_time_s));
}

double jitter_average(const CurrentFn& current_fn, double dt_oe_ps,
                      const BenchConfig& cfg, RngStream& rng) {
    if (cfg.jitter_sigma_ps == 0.0) return current_fn(dt_oe_ps);
    if (cfg.jitter_method == JitterMethod::monte_carlo) {
        double acc = 0.0;
        for (std::size_t k = 0; k < cfg.mc_samples; ++k)
            acc += current_fn(dt_oe_ps + cfg.jitter_sigma_ps * rng.next_normal());
        return acc / static_cast<double>(cfg.mc_samples);
    }
    const auto& rule = gauss_hermite_rule(cfg.gh_order);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
        acc += rule.prob_weights[k] *
               current_fn(dt_oe_ps + cfg.jitter_sigma_ps * rule.nodes[k]);
    return acc;
}

double add_readout_noise(double i_pc, const BenchConfig& cfg, RngStream& rng) {
    const double sigma = cfg.readout_sigma_a();
    if (sigma == 0.0) return i_pc;
    return i_pc + sigma * rng.next_normal();
}

std::uint64_t delay_seed(std::uint64_t master_seed, double dt_oe_ps) {
    std::uint64_t s = seed_combine(master_seed, 0x64656c6179ULL); // "delay"
    return seed_combine(s, dt_oe_ps);
}

std::uint64_t point_seed(std::uint64_t dseed, std::size_t vn_index) {
    std::uint64_t s = seed_combine(dseed, 0x706f696e74ULL); // "point"
    return seed_combine(s, static_cast<std::uint64_t>(vn_index));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t nthreads = threads > 0 ? static_cast<std::size_t>(threads) : hw;
    nthreads = std::min(nthreads, n);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr eptr;
    std::mutex emtx;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(emtx);
                    if (!eptr) eptr = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (eptr) std::rethrow_exception(eptr);
}

ResonanceScan resonance_scan(const QDParams& qd, const LaserSpec& laser,
                             const PulseSpec& pulse, const BenchConfig& cfg,
                             double dt_oe_ps) {
    cfg.validate();
    qd.validate();
    laser.validate();
    pulse.validate();

    ResonanceScan scan;
    scan.dt_oe_ps = dt_oe_ps;
    scan.v_n = cfg.v_n_grid();
    scan.i_pc.assign(scan.v_n.size(), 0.0);
    scan.seed_used = delay_seed(cfg.seed, dt_oe_ps);

    std::vector<std::string> errors(scan.v_n.size());
    parallel_for(scan.v_n.size(), cfg.threads, [&](std::size_t k) {
        const double v_n = scan.v_n[k];
        RngStream rng(point_seed(scan.seed_used, k));
        auto current = [&](double dt) {
            return photocurrent_single(qd, laser, pulse, v_n, dt, cfg.ode_rel_tol);
        };
        try {
            const double i_mean = jitter_average(current, dt_oe_ps, cfg, rng);
            scan.i_pc[k] = add_readout_noise(i_mean, cfg, rng);
        } catch (const integration_error& e) {
            errors[k] = e.what();
        }
    });
    for (std::size_t k = 0; k < errors.size(); ++k)
        if (!errors[k].empty())
            throw integration_error("scan point (dt_oe=" + std::to_string(dt_oe_ps) +
                                        " ps, v_n=" + std::to_string(scan.v_n[k]) +
                                        " V): " + errors[k],
                                    dt_oe_ps);
    return scan;
}

SamplingResult run_sampling_experiment(const QDParams& qd, const LaserSpec& laser,
                                       const PulseSpec& pulse, const BenchConfig& cfg,
                                       const std::vector<double>& dt_grid_ps,
                                       const ProgressFn& progress) {
    if (dt_grid_ps.empty()) throw config_error("run: dt_grid must be nonempty");
    if (!std::is_sorted(dt_grid_ps.begin(), dt_grid_ps.end()))
        throw config_error("run: dt_grid must be sorted");

    SamplingResult out;
    out.scans.reserve(dt_grid_ps.size());
    std::size_t done = 0;
    for (double dt : dt_grid_ps) {
        try {
            out.scans.push_back(resonance_scan(qd, laser, pulse, cfg, dt));
        } catch (const error& e) {
            out.failures.push_back({dt, 0.0, e.what()});
        }
        ++done;
        if (progress) progress(done, dt_grid_ps.size(), dt);
    }
    return out;
}

} // namespace qdscope
