#include "qdscope/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "qdscope/csv.hpp"
#include "qdscope/errors.hpp"
#include "qdscope/fitkit.hpp"
#include "qdscope/recon.hpp"
#include "qdscope/svg.hpp"

namespace qdscope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_out(const RunConfig& cfg, const std::string& out_dir) {
    return out_dir.empty() ? cfg.run.out_dir : out_dir;
}

FileMeta make_meta(const RunConfig& cfg, const std::string& kind) {
    FileMeta meta;
    meta.kind = kind;
    meta.config_hash = cfg.config_hash_hex();
    meta.seed = cfg.bench.seed;
    meta.version = artifact_version();
    return meta;
}

void check_hash(const RunConfig& cfg, const FileMeta& meta, const std::string& path,
                bool force) {
    if (meta.config_hash != cfg.config_hash_hex() && !force)
        throw config_error("'" + path + "' was produced with config hash " +
                           meta.config_hash + " but the current config hashes to " +
                           cfg.config_hash_hex() + "; pass --force to override");
}

void update_manifest(const fs::path& dir, const std::string& command, json entry) {
    const fs::path path = dir / "manifest.json";
    json manifest = json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        try {
            manifest = json::parse(in);
        } catch (const json::exception&) {
            manifest = json::object();
        }
        if (!manifest.is_object()) manifest = json::object();
    }
    manifest[command] = std::move(entry);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path.string() + "'");
    out << manifest.dump(2) << "\n";
}

json base_manifest(const RunConfig& cfg) {
    json j;
    j["artifact_version"] = artifact_version();
    j["config_hash"] = cfg.config_hash_hex();
    j["seed"] = cfg.bench.seed;
    j["preset"] = cfg.run.preset;
    return j;
}

double wall_seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// mode is translation-equivariant, so mu is recoverable from the stored mode.
double mu_from_mode(double mode, double sigma, double tau_v) {
    return mode - exgauss_mode(0.0, sigma, tau_v);
}

std::vector<FitEntry> entries_from_rows(const std::vector<FitRow>& rows) {
    std::vector<FitEntry> entries;
    std::size_t k = 0;
    while (k < rows.size()) {
        const FitRow& r = rows[k];
        if (r.n_peaks == 2) {
            if (k + 1 >= rows.size() || rows[k + 1].dt_oe_ps != r.dt_oe_ps ||
                rows[k + 1].n_peaks != 2)
                throw io_error("fits: bimodal delay " + std::to_string(r.dt_oe_ps) +
                               " needs two rows");
            const FitRow& r2 = rows[k + 1];
            auto mk = [](const FitRow& row) {
                PeakFit pk;
                pk.sigma = row.sigma_v;
                pk.tau_v = row.tau_v_v;
                pk.mode = row.mode_v;
                pk.mu = mu_from_mode(row.mode_v, row.sigma_v, row.tau_v_v);
                pk.amplitude = row.amplitude;
                pk.baseline = row.baseline;
                pk.stderr_mode = row.stderr_mode_mv * 1e-3;
                pk.converged = row.converged != 0;
                return pk;
            };
            BimodalFit bi;
            const bool first_is_lo = r.mode_v <= r2.mode_v;
            bi.peak_lo = mk(first_is_lo ? r : r2);
            bi.peak_hi = mk(first_is_lo ? r2 : r);
            bi.weight_hi = r.weight_hi;
            bi.weight_lo = 1.0 - r.weight_hi;
            bi.bimodal = true;
            entries.push_back(FitEntry{r.dt_oe_ps, bi});
            k += 2;
        } else {
            PeakFit pk;
            pk.sigma = r.sigma_v;
            pk.tau_v = r.tau_v_v;
            pk.mode = r.mode_v;
            pk.mu = mu_from_mode(r.mode_v, r.sigma_v, r.tau_v_v);
            pk.amplitude = r.amplitude;
            pk.baseline = r.baseline;
            pk.stderr_mode = r.stderr_mode_mv * 1e-3;
            pk.converged = r.converged != 0;
            entries.push_back(FitEntry{r.dt_oe_ps, pk});
            ++k;
        }
    }
    return entries;
}

} // namespace

std::string artifact_version() {
#ifdef QDSCOPE_VERSION
    return QDSCOPE_VERSION;
#else
    return "0.0.0";
#endif
}

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, bool quiet) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    const fs::path dir = resolve_out(cfg, out_dir);
    fs::create_directories(dir);

    ProgressFn progress;
    if (!quiet)
        progress = [](std::size_t done, std::size_t total, double dt) {
            std::fprintf(stderr, "scan %zu/%zu (dt_oe=%g ps)\n", done, total, dt);
        };

    const auto result =
        run_sampling_experiment(cfg.qd, cfg.laser, cfg.pulse, cfg.bench,
                                cfg.dt_grid(), progress);
    if (result.scans.empty()) {
        std::string msg = "simulate: all scans failed";
        if (!result.failures.empty()) msg += "; first: " + result.failures.front().message;
        throw error(msg);
    }

    write_scans_csv((dir / "scans.csv").string(), result.scans, make_meta(cfg, "scans"));

    if (cfg.run.dump_trajectory) {
        // One representative trajectory: first delay, low-level resonance bias.
        const double dt0 = cfg.dt_grid().front();
        const double v_n = cfg.v_lo_resonance();
        const double t_laser = dt0 + cfg.laser.arrival_time_ps;
        const auto traj = integrate_bloch(
            cfg.qd, cfg.laser,
            [&](double t) { return eval_pulse(cfg.pulse, t) - v_n; },
            {t_laser - 6.0 * cfg.laser.fwhm_ps,
             t_laser - 6.0 * cfg.laser.fwhm_ps + cfg.pulse.period_ps},
            cfg.bench.ode_rel_tol);
        write_trajectory_csv((dir / "trajectory.csv").string(), traj,
                             make_meta(cfg, "trajectory"));
    }

    json entry = base_manifest(cfg);
    entry["n_scans"] = result.scans.size();
    entry["n_failures"] = result.failures.size();
    json fails = json::array();
    for (const auto& f : result.failures)
        fails.push_back({{"dt_oe_ps", f.dt_oe_ps}, {"message", f.message}});
    entry["failures"] = fails;
    entry["wall_time_s"] = wall_seconds_since(t_start);
    update_manifest(dir, "simulate", std::move(entry));
}

void cmd_fit(const RunConfig& cfg, const std::string& out_dir, bool force) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    const fs::path dir = resolve_out(cfg, out_dir);
    const std::string scans_path = (dir / "scans.csv").string();
    if (!fs::exists(scans_path)) throw io_error("missing input '" + scans_path + "'");

    FileMeta meta;
    const auto scans = read_scans_csv(scans_path, meta);
    check_hash(cfg, meta, scans_path, force);

    FitOptions opts;
    opts.max_iter = cfg.fit.max_iter;
    opts.prominence = cfg.fit.prominence;

    const double v_lo_res = cfg.v_lo_resonance();
    const double v_hi_res = cfg.v_hi_resonance();
    const bool has_two_levels =
        std::abs(v_hi_res - v_lo_res) > 2.0 * cfg.fit.peak_min_separation_v;

    std::vector<FitRow> rows;
    std::vector<std::string> failures;
    for (const auto& scan : scans) {
        try {
            std::size_t n_candidates = 1;
            if (has_two_levels)
                n_candidates =
                    detect_peaks(scan, cfg.fit.peak_min_separation_v, opts).size();
            if (n_candidates >= 2) {
                const BimodalFit bi =
                    fit_double_exgauss(scan, v_lo_res, v_hi_res, opts);
                if (bi.bimodal) {
                    for (const PeakFit* pk : {&bi.peak_lo, &bi.peak_hi}) {
                        FitRow r;
                        r.dt_oe_ps = scan.dt_oe_ps;
                        r.mode_v = pk->mode;
                        r.stderr_mode_mv = pk->stderr_mode * 1e3;
                        r.sigma_v = pk->sigma;
                        r.tau_v_v = pk->tau_v;
                        r.amplitude = pk->amplitude;
                        r.baseline = pk->baseline;
                        r.converged = pk->converged ? 1 : 0;
                        r.n_peaks = 2;
                        r.weight_hi = bi.weight_hi;
                        rows.push_back(r);
                    }
                    continue;
                }
                // fell back to one significant peak
                const PeakFit& pk = bi.weight_hi > 0.5 ? bi.peak_hi : bi.peak_lo;
                FitRow r;
                r.dt_oe_ps = scan.dt_oe_ps;
                r.mode_v = pk.mode;
                r.stderr_mode_mv = pk.stderr_mode * 1e3;
                r.sigma_v = pk.sigma;
                r.tau_v_v = pk.tau_v;
                r.amplitude = pk.amplitude;
                r.baseline = pk.baseline;
                r.converged = pk.converged ? 1 : 0;
                r.n_peaks = 1;
                r.weight_hi = bi.weight_hi;
                rows.push_back(r);
                continue;
            }
            const PeakFit pk = fit_exgauss(scan, opts);
            FitRow r;
            r.dt_oe_ps = scan.dt_oe_ps;
            r.mode_v = pk.mode;
            r.stderr_mode_mv = pk.stderr_mode * 1e3;
            r.sigma_v = pk.sigma;
            r.tau_v_v = pk.tau_v;
            r.amplitude = pk.amplitude;
            r.baseline = pk.baseline;
            r.converged = pk.converged ? 1 : 0;
            r.n_peaks = 1;
            r.weight_hi = std::abs(pk.mode - v_hi_res) < std::abs(pk.mode - v_lo_res)
                              ? 1.0
                              : 0.0;
            rows.push_back(r);
        } catch (const fit_error& e) {
            failures.push_back("dt_oe=" + std::to_string(scan.dt_oe_ps) + ": " +
                               e.what());
        }
    }
    if (rows.empty())
        throw fit_error("fit: every scan failed; first: " +
                        (failures.empty() ? std::string("?") : failures.front()));

    write_fits_csv((dir / "fits.csv").string(), rows, make_meta(cfg, "fits"));

    json entry = base_manifest(cfg);
    entry["n_rows"] = rows.size();
    entry["n_failures"] = failures.size();
    entry["failures"] = failures;
    entry["wall_time_s"] = wall_seconds_since(t_start);
    update_manifest(dir, "fit", std::move(entry));
}

void cmd_reconstruct(const RunConfig& cfg, const std::string& out_dir, bool force) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    const fs::path dir = resolve_out(cfg, out_dir);
    const std::string fits_path = (dir / "fits.csv").string();
    if (!fs::exists(fits_path)) throw io_error("missing input '" + fits_path + "'");

    FileMeta meta;
    const auto rows = read_fits_csv(fits_path, meta);
    check_hash(cfg, meta, fits_path, force);

    const auto entries = entries_from_rows(rows);
    const SampledWaveform wf = reconstruct_waveform(entries, cfg.qd);
    write_waveform_csv((dir / "waveform.csv").string(), wf, make_meta(cfg, "waveform"));

    const WaveformMetrics metrics = compare_to_truth(wf, cfg.pulse);

    // RC fit of the sampled edge inside the configured window.
    std::vector<double> ts, vs;
    for (const auto& pt : wf.points) {
        ts.push_back(pt.dt_oe_ps);
        vs.push_back(pt.v);
    }
    bool rc_ok = false;
    RCFit rc;
    try {
        rc = fit_rc_edge(ts, vs, {cfg.fit.rc_window_start_ps, cfg.fit.rc_window_stop_ps});
        rc_ok = rc.converged;
    } catch (const fit_error&) {
        rc_ok = false;
    }

    json mj;
    mj["rms_mV"] = metrics.rms_v * 1e3;
    mj["max_abs_mV"] = metrics.max_abs_v * 1e3;
    mj["n_points"] = wf.points.size();
    mj["n_bimodal"] = metrics.n_bimodal;
    mj["config_hash"] = cfg.config_hash_hex();
    if (rc_ok) {
        mj["tau_fit_ps"] = rc.tau_ps;
        mj["tau_stderr_ps"] = rc.stderr_tau_ps;
        mj["rc_t0_ps"] = rc.t0_ps;
        mj["rc_v_lo_V"] = rc.v_lo;
        mj["rc_v_hi_V"] = rc.v_hi;
    } else {
        mj["tau_fit_ps"] = nullptr;
        mj["tau_stderr_ps"] = nullptr;
    }
    {
        std::ofstream out(dir / "metrics.json", std::ios::binary);
        if (!out) throw io_error("cannot write metrics.json");
        out << mj.dump(2) << "\n";
    }

    json entry = base_manifest(cfg);
    entry["n_points"] = wf.points.size();
    entry["rms_mV"] = metrics.rms_v * 1e3;
    entry["wall_time_s"] = wall_seconds_since(t_start);
    update_manifest(dir, "reconstruct", std::move(entry));
}

namespace {

const char* kScanPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                              "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string render_scans_svg(const std::vector<ResonanceScan>& scans,
                             const std::vector<FitRow>& rows) {
    double vmin = 1e300, vmax = -1e300, imax = 0.0;
    for (const auto& s : scans) {
        vmin = std::min(vmin, s.v_n.front());
        vmax = std::max(vmax, s.v_n.back());
        for (double i : s.i_pc) imax = std::max(imax, i / 1e-12);
    }
    SvgFigure fig(840, 520, "Resonance scans", "V_N (V)", "I_PC (pA)");
    fig.set_xrange(vmin, vmax);
    fig.set_yrange(std::min(0.0, -0.05 * imax), imax * 1.1 + 1e-12);

    std::map<double, std::vector<const FitRow*>> by_dt;
    for (const auto& r : rows) by_dt[r.dt_oe_ps].push_back(&r);

    std::size_t ci = 0;
    for (const auto& s : scans) {
        std::vector<double> ipa(s.i_pc.size());
        for (std::size_t k = 0; k < s.i_pc.size(); ++k) ipa[k] = s.i_pc[k] / 1e-12;
        const std::string color = kScanPalette[ci % 10];
        fig.add_polyline(s.v_n, ipa, color, 1.2);
        auto it = by_dt.find(s.dt_oe_ps);
        if (it != by_dt.end()) {
            std::vector<double> xs, ys;
            const double lo = s.v_n.front(), hi = s.v_n.back();
            for (int k = 0; k <= 400; ++k) {
                const double x = lo + (hi - lo) * k / 400.0;
                double y = 0.0;
                for (const FitRow* r : it->second) {
                    const double mu = mu_from_mode(r->mode_v, r->sigma_v, r->tau_v_v);
                    y += r->amplitude * exgauss_density(x, mu, r->sigma_v, r->tau_v_v);
                }
                y += it->second.front()->baseline;
                xs.push_back(x);
                ys.push_back(y / 1e-12);
            }
            fig.add_polyline(xs, ys, "#333333", 1.0, true);
        }
        ++ci;
    }
    fig.add_legend_entry("simulated scans", "#1f77b4");
    fig.add_legend_entry("exGaussian fits", "#333333");
    return fig.render();
}

std::string render_waveform_svg(const SampledWaveform& wf, const RunConfig& cfg,
                                const json& metrics) {
    const double t_lo = wf.points.front().dt_oe_ps;
    const double t_hi = wf.points.back().dt_oe_ps;
    auto truth_curve = [&](double lo, double hi) {
        std::vector<double> xs, ys;
        for (int k = 0; k <= 600; ++k) {
            const double t = lo + (hi - lo) * k / 600.0;
            xs.push_back(t);
            ys.push_back(eval_pulse(cfg.pulse, t));
        }
        return std::pair{xs, ys};
    };

    auto make_panel = [&](double lo, double hi, const std::string& title, bool with_rc) {
        SvgFigure fig(840, 420, title, "dt_OE (ps)", "V_P (V)");
        double vmin = 1e300, vmax = -1e300;
        auto [tx, ty] = truth_curve(lo, hi);
        for (double v : ty) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        for (const auto& pt : wf.points) {
            vmin = std::min(vmin, pt.v);
            vmax = std::max(vmax, pt.v);
        }
        const double pad = 0.08 * (vmax - vmin + 1e-9);
        fig.set_xrange(lo, hi);
        fig.set_yrange(vmin - pad, vmax + pad);
        fig.add_polyline(tx, ty, "#2ca02c", 2.0);
        std::vector<double> xs, ys, es, rs;
        for (const auto& pt : wf.points) {
            if (pt.dt_oe_ps < lo || pt.dt_oe_ps > hi) continue;
            xs.push_back(pt.dt_oe_ps);
            ys.push_back(pt.v);
            es.push_back(pt.stderr_v);
            rs.push_back(3.0);
        }
        fig.add_error_bars(xs, ys, es, "#555555");
        fig.add_circles(xs, ys, rs, "#111111", false);
        if (with_rc && metrics.contains("tau_fit_ps") && !metrics["tau_fit_ps"].is_null()) {
            const double tau = metrics["tau_fit_ps"].get<double>();
            const double t0 = metrics.value("rc_t0_ps", 0.0);
            const double va = metrics.value("rc_v_lo_V", 0.0);
            const double vb = metrics.value("rc_v_hi_V", 0.0);
            std::vector<double> rx, ry;
            for (int k = 0; k <= 300; ++k) {
                const double t = lo + (hi - lo) * k / 300.0;
                rx.push_back(t);
                ry.push_back(t <= t0 ? va : vb + (va - vb) * std::exp(-(t - t0) / tau));
            }
            fig.add_polyline(rx, ry, "#d62728", 1.5, true);
            fig.add_legend_entry("RC fit", "#d62728");
        }
        fig.add_legend_entry("applied pulse", "#2ca02c");
        fig.add_legend_entry("sampled", "#111111");
        return fig.render();
    };

    const std::string main_panel = make_panel(t_lo, t_hi, "Sampled waveform", false);
    const double zl = std::max(t_lo, cfg.fit.rc_window_start_ps);
    const double zh = std::min(t_hi, cfg.fit.rc_window_stop_ps);
    const std::string zoom_panel =
        make_panel(zl, zh < zl ? t_hi : zh, "Edge zoom with RC fit", true);

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" "
                      "height=\"860\" viewBox=\"0 0 840 860\">\n";
    out += "<svg y=\"0\">\n" + main_panel + "</svg>\n";
    out += "<svg y=\"430\">\n" + zoom_panel + "</svg>\n";
    out += "</svg>\n";
    return out;
}

std::string render_weights_svg(const SampledWaveform& wf, const RunConfig& cfg) {
    const double lo_level = std::min(cfg.pulse.v_low, cfg.pulse.v_high);
    const double hi_level = std::max(cfg.pulse.v_low, cfg.pulse.v_high);
    SvgFigure fig(840, 420, "High/low level weights", "dt_OE (ps)", "V_P (V)");
    fig.set_xrange(wf.points.front().dt_oe_ps, wf.points.back().dt_oe_ps);
    const double pad = 0.2 * (hi_level - lo_level + 1e-9);
    fig.set_yrange(lo_level - pad, hi_level + pad);

    std::vector<double> xhi, yhi, rhi, xlo, ylo, rlo;
    for (const auto& pt : wf.points) {
        const double whi = pt.weight_hi;
        if (whi > 0.0) {
            xhi.push_back(pt.dt_oe_ps);
            yhi.push_back(hi_level);
            rhi.push_back(std::max(1.2, 9.0 * std::sqrt(whi)));
        }
        if (whi < 1.0) {
            xlo.push_back(pt.dt_oe_ps);
            ylo.push_back(lo_level);
            rlo.push_back(std::max(1.2, 9.0 * std::sqrt(1.0 - whi)));
        }
    }
    fig.add_circles(xhi, yhi, rhi, "#d62728", true);
    fig.add_circles(xlo, ylo, rlo, "#1f77b4", true);
    fig.add_legend_entry("high level", "#d62728");
    fig.add_legend_entry("low level", "#1f77b4");
    return fig.render();
}

} // namespace

void cmd_report(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const fs::path dir = resolve_out(cfg, out_dir);

    const std::vector<std::string> needed = {"scans.csv", "fits.csv", "waveform.csv",
                                             "metrics.json"};
    std::string missing;
    for (const auto& name : needed)
        if (!fs::exists(dir / name)) missing += missing.empty() ? name : ", " + name;
    if (!missing.empty())
        throw io_error("report: missing inputs in '" + dir.string() + "': " + missing);

    FileMeta meta;
    const auto scans = read_scans_csv((dir / "scans.csv").string(), meta);
    const auto rows = read_fits_csv((dir / "fits.csv").string(), meta);
    const auto wf = read_waveform_csv((dir / "waveform.csv").string(), meta);
    json metrics;
    {
        std::ifstream in(dir / "metrics.json");
        try {
            metrics = json::parse(in);
        } catch (const json::exception& e) {
            throw io_error(std::string("metrics.json: ") + e.what());
        }
    }

    auto write_file = [&](const char* name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw io_error(std::string("cannot write ") + name);
        out << content;
    };
    write_file("scans.svg", render_scans_svg(scans, rows));
    write_file("waveform.svg", render_waveform_svg(wf, cfg, metrics));
    write_file("weights.svg", render_weights_svg(wf, cfg));

    json entry = base_manifest(cfg);
    entry["figures"] = {"scans.svg", "waveform.svg", "weights.svg"};
    update_manifest(dir, "report", std::move(entry));
}

} // namespace qdscope
