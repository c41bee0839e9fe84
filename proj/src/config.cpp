#include "qdscope/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <variant>

#include "qdscope/errors.hpp"

namespace qdscope {

namespace {

// ---------------------------------------------------------------------------
// Tiny TOML-ish reader: [section.sub] headers, key = value lines, values are
// numbers, booleans, quoted strings or (nested) single-line arrays.

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<double, bool, std::string, Array> v;
    std::string raw; // original token, for exact u64 parsing
    int line = 0;
};

struct Entry {
    Value value;
    int line = 0;
    bool used = false;
};

using Flat = std::map<std::string, Entry>;

[[noreturn]] void parse_fail(int line, int col, const std::string& msg) {
    throw config_error("config: line " + std::to_string(line) + ", col " +
                       std::to_string(col) + ": " + msg);
}

struct LineParser {
    const std::string& s;
    int line;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    bool eol() {
        skip_ws();
        return pos >= s.size() || s[pos] == '#';
    }
    int col() const { return static_cast<int>(pos) + 1; }

    Value parse_value() {
        skip_ws();
        if (pos >= s.size()) parse_fail(line, col(), "expected a value");
        const char c = s[pos];
        if (c == '[') {
            ++pos;
            Array arr;
            skip_ws();
            if (pos < s.size() && s[pos] == ']') {
                ++pos;
                return Value{arr, "", line};
            }
            for (;;) {
                arr.push_back(parse_value());
                skip_ws();
                if (pos < s.size() && s[pos] == ',') {
                    ++pos;
                    continue;
                }
                if (pos < s.size() && s[pos] == ']') {
                    ++pos;
                    return Value{arr, "", line};
                }
                parse_fail(line, col(), "expected ',' or ']' in array");
            }
        }
        if (c == '"') {
            ++pos;
            std::string out;
            while (pos < s.size() && s[pos] != '"') out.push_back(s[pos++]);
            if (pos >= s.size()) parse_fail(line, col(), "unterminated string");
            ++pos;
            return Value{out, out, line};
        }
        // bare token: number, bool, inf
        std::size_t start = pos;
        while (pos < s.size() && s[pos] != ',' && s[pos] != ']' && s[pos] != '#' &&
               s[pos] != ' ' && s[pos] != '\t')
            ++pos;
        std::string tok = s.substr(start, pos - start);
        if (tok.empty()) parse_fail(line, col(), "expected a value");
        if (tok == "true") return Value{true, tok, line};
        if (tok == "false") return Value{false, tok, line};
        if (tok == "inf" || tok == "+inf")
            return Value{std::numeric_limits<double>::infinity(), tok, line};
        if (tok == "-inf")
            return Value{-std::numeric_limits<double>::infinity(), tok, line};
        char* end = nullptr;
        const double d = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size())
            parse_fail(line, static_cast<int>(start) + 1,
                       "cannot parse value '" + tok + "'");
        return Value{d, tok, line};
    }
};

Flat parse_flat(const std::string& text) {
    Flat flat;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        LineParser lp{raw, lineno};
        if (lp.eol()) continue;
        if (raw[lp.pos] == '[') {
            ++lp.pos;
            std::size_t start = lp.pos;
            while (lp.pos < raw.size() && raw[lp.pos] != ']') ++lp.pos;
            if (lp.pos >= raw.size()) parse_fail(lineno, lp.col(), "unterminated section header");
            section = raw.substr(start, lp.pos - start);
            ++lp.pos;
            if (!lp.eol()) parse_fail(lineno, lp.col(), "trailing characters after section header");
            if (section.empty()) parse_fail(lineno, 2, "empty section name");
            continue;
        }
        std::size_t start = lp.pos;
        while (lp.pos < raw.size() && (std::isalnum(static_cast<unsigned char>(raw[lp.pos])) ||
                                       raw[lp.pos] == '_' || raw[lp.pos] == '.'))
            ++lp.pos;
        const std::string key = raw.substr(start, lp.pos - start);
        if (key.empty()) parse_fail(lineno, lp.col(), "expected a key");
        lp.skip_ws();
        if (lp.pos >= raw.size() || raw[lp.pos] != '=')
            parse_fail(lineno, lp.col(), "expected '=' after key '" + key + "'");
        ++lp.pos;
        Value v = lp.parse_value();
        if (!lp.eol()) parse_fail(lineno, lp.col(), "trailing characters after value");
        const std::string path = section.empty() ? key : section + "." + key;
        if (flat.count(path))
            parse_fail(lineno, 1, "duplicate key '" + path + "'");
        flat[path] = Entry{v, lineno, false};
    }
    return flat;
}

// Typed consumption helpers; every consumed key is flagged so unknown keys
// can be reported afterwards.

class Consumer {
public:
    explicit Consumer(Flat& flat) : flat_(flat) {}

    std::optional<Value> take(const std::string& path) {
        auto it = flat_.find(path);
        if (it == flat_.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    void number(const std::string& path, double& dst) {
        if (auto v = take(path)) {
            const double* d = std::get_if<double>(&v->v);
            if (!d) throw config_error("config: key '" + path + "' must be a number");
            dst = *d;
        }
    }
    void integer(const std::string& path, int& dst) {
        if (auto v = take(path)) {
            const double* d = std::get_if<double>(&v->v);
            if (!d || *d != std::floor(*d))
                throw config_error("config: key '" + path + "' must be an integer");
            dst = static_cast<int>(*d);
        }
    }
    void size(const std::string& path, std::size_t& dst) {
        if (auto v = take(path)) {
            const double* d = std::get_if<double>(&v->v);
            if (!d || *d < 0 || *d != std::floor(*d))
                throw config_error("config: key '" + path + "' must be a nonnegative integer");
            dst = static_cast<std::size_t>(*d);
        }
    }
    void u64(const std::string& path, std::uint64_t& dst) {
        if (auto v = take(path)) {
            // parse from the raw token so 64-bit seeds survive untruncated
            const std::string& raw = v->raw;
            std::uint64_t out = 0;
            auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
            if (ec != std::errc{} || p != raw.data() + raw.size())
                throw config_error("config: key '" + path + "' must be an unsigned integer");
            dst = out;
        }
    }
    void boolean(const std::string& path, bool& dst) {
        if (auto v = take(path)) {
            const bool* b = std::get_if<bool>(&v->v);
            if (!b) throw config_error("config: key '" + path + "' must be true or false");
            dst = *b;
        }
    }
    void string(const std::string& path, std::string& dst) {
        if (auto v = take(path)) {
            const std::string* s = std::get_if<std::string>(&v->v);
            if (!s) throw config_error("config: key '" + path + "' must be a string");
            dst = *s;
        }
    }
    void number_list(const std::string& path, std::vector<double>& dst) {
        if (auto v = take(path)) {
            const Array* a = std::get_if<Array>(&v->v);
            if (!a) throw config_error("config: key '" + path + "' must be an array");
            dst.clear();
            for (const auto& el : *a) {
                const double* d = std::get_if<double>(&el.v);
                if (!d)
                    throw config_error("config: key '" + path +
                                       "' must contain only numbers");
                dst.push_back(*d);
            }
        }
    }

    void finish() const {
        for (const auto& [path, entry] : flat_)
            if (!entry.used)
                throw config_error("config: unknown key '" + path + "' (line " +
                                   std::to_string(entry.line) + ")");
    }

private:
    Flat& flat_;
};

void apply_flat(RunConfig& cfg, Flat& flat) {
    Consumer c(flat);

    c.number("pulse.v_low_v", cfg.pulse.v_low);
    c.number("pulse.v_high_v", cfg.pulse.v_high);
    c.number("pulse.t_rise_start_ps", cfg.pulse.t_rise_start_ps);
    c.number("pulse.tau_rise_ps", cfg.pulse.tau_rise_ps);
    c.number("pulse.plateau_width_ps", cfg.pulse.plateau_width_ps);
    c.number("pulse.tau_fall_ps", cfg.pulse.tau_fall_ps);
    c.number("pulse.period_ps", cfg.pulse.period_ps);
    if (auto v = c.take("pulse.ringing")) {
        const Array* a = std::get_if<Array>(&v->v);
        if (!a) throw config_error("config: key 'pulse.ringing' must be an array");
        cfg.pulse.ringing.clear();
        for (const auto& el : *a) {
            const Array* mode = std::get_if<Array>(&el.v);
            if (!mode || mode->size() != 4)
                throw config_error("config: 'pulse.ringing' entries must be "
                                   "[amplitude_v, frequency_per_ps, damping_per_ps, phase_rad]");
            RingingMode m;
            const double* f[4];
            for (int i = 0; i < 4; ++i) {
                f[i] = std::get_if<double>(&(*mode)[static_cast<std::size_t>(i)].v);
                if (!f[i])
                    throw config_error("config: 'pulse.ringing' entries must be numbers");
            }
            m.amplitude_v = *f[0];
            m.frequency_per_ps = *f[1];
            m.damping_per_ps = *f[2];
            m.phase_rad = *f[3];
            cfg.pulse.ringing.push_back(m);
        }
    }
    {
        Feedthrough ft = cfg.pulse.feedthrough.value_or(Feedthrough{});
        bool any = false;
        if (auto v = c.take("pulse.feedthrough.t_center_ps")) {
            const double* d = std::get_if<double>(&v->v);
            if (!d) throw config_error("config: key 'pulse.feedthrough.t_center_ps' must be a number");
            ft.t_center_ps = *d;
            any = true;
        }
        if (auto v = c.take("pulse.feedthrough.width_sigma_ps")) {
            const double* d = std::get_if<double>(&v->v);
            if (!d) throw config_error("config: key 'pulse.feedthrough.width_sigma_ps' must be a number");
            ft.width_sigma_ps = *d;
            any = true;
        }
        if (auto v = c.take("pulse.feedthrough.depth_v")) {
            const double* d = std::get_if<double>(&v->v);
            if (!d) throw config_error("config: key 'pulse.feedthrough.depth_v' must be a number");
            ft.depth_v = *d;
            any = true;
        }
        if (any) cfg.pulse.feedthrough = ft;
    }

    c.number("laser.fwhm_ps", cfg.laser.fwhm_ps);
    {
        double area_pi = cfg.laser.pulse_area_rad / 3.14159265358979323846;
        c.number("laser.pulse_area_pi", area_pi);
        cfg.laser.pulse_area_rad = area_pi * 3.14159265358979323846;
    }
    c.number("laser.arrival_time_ps", cfg.laser.arrival_time_ps);

    c.number("qd.stark_slope_mev_per_v", cfg.qd.stark_slope_mev_per_v);
    c.number("qd.v_bias_res_v", cfg.qd.v_bias_res);
    c.number("qd.gamma_e0_per_ps", cfg.qd.gamma_e0_per_ps);
    c.number("qd.gamma_h0_per_ps", cfg.qd.gamma_h0_per_ps);
    c.number("qd.v_e_v", cfg.qd.v_e);
    c.number("qd.v_h_v", cfg.qd.v_h);
    c.number("qd.gamma_pure0_per_ps", cfg.qd.gamma_pure0_per_ps);
    c.number("qd.f_rep_per_ps", cfg.qd.f_rep_per_ps);

    c.number("bench.jitter_sigma_ps", cfg.bench.jitter_sigma_ps);
    {
        std::string method = cfg.bench.jitter_method == JitterMethod::monte_carlo
                                 ? "monte_carlo"
                                 : "gauss_hermite";
        c.string("bench.jitter_method", method);
        if (method == "monte_carlo")
            cfg.bench.jitter_method = JitterMethod::monte_carlo;
        else if (method == "gauss_hermite")
            cfg.bench.jitter_method = JitterMethod::gauss_hermite;
        else
            throw config_error("config: key 'bench.jitter_method' must be "
                               "'monte_carlo' or 'gauss_hermite'");
    }
    c.size("bench.mc_samples", cfg.bench.mc_samples);
    c.size("bench.gh_order", cfg.bench.gh_order);
    {
        double fa = cfg.bench.noise_density_a_rthz / 1e-15;
        c.number("bench.noise_density_fa_rthz", fa);
        cfg.bench.noise_density_a_rthz = fa * 1e-15;
    }
    c.number("bench.integration_time_s", cfg.bench.integration_time_s);
    c.number("bench.v_n_start_v", cfg.bench.v_n_start);
    c.number("bench.v_n_stop_v", cfg.bench.v_n_stop);
    c.number("bench.v_n_step_v", cfg.bench.v_n_step);
    c.number("bench.ode_rel_tol", cfg.bench.ode_rel_tol);

    c.integer("fit.max_iter", cfg.fit.max_iter);
    c.number("fit.prominence", cfg.fit.prominence);
    c.number("fit.peak_min_separation_v", cfg.fit.peak_min_separation_v);
    c.number("fit.rc_window_start_ps", cfg.fit.rc_window_start_ps);
    c.number("fit.rc_window_stop_ps", cfg.fit.rc_window_stop_ps);

    std::string preset = cfg.run.preset;
    c.string("run.preset", preset); // recorded; applied by the caller
    cfg.run.preset = preset;
    c.string("run.out_dir", cfg.run.out_dir);
    c.number("run.dt_start_ps", cfg.run.dt_start_ps);
    c.number("run.dt_stop_ps", cfg.run.dt_stop_ps);
    c.number("run.dt_step_ps", cfg.run.dt_step_ps);
    c.number_list("run.dt_list", cfg.run.dt_list);
    c.boolean("run.dump_trajectory", cfg.run.dump_trajectory);
    c.u64("run.seed", cfg.bench.seed);
    c.integer("run.threads", cfg.bench.threads);

    c.finish();
}

std::string format_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void FitConfig::validate() const {
    if (max_iter < 1) throw config_error("fit: max_iter must be >= 1");
    if (!(prominence > 0.0)) throw config_error("fit: prominence must be > 0");
    if (!(peak_min_separation_v > 0.0))
        throw config_error("fit: peak_min_separation must be > 0");
    if (!(rc_window_stop_ps > rc_window_start_ps))
        throw config_error("fit: rc_window must be increasing");
}

void RunSection::validate() const {
    if (dt_list.empty()) {
        if (!(dt_step_ps > 0.0)) throw config_error("run: dt_step must be > 0");
        if (!(dt_stop_ps >= dt_start_ps))
            throw config_error("run: dt_stop must be >= dt_start");
    }
    if (out_dir.empty()) throw config_error("run: out_dir must be nonempty");
}

std::vector<double> RunConfig::dt_grid() const {
    if (!run.dt_list.empty()) {
        std::vector<double> grid = run.dt_list;
        std::sort(grid.begin(), grid.end());
        return grid;
    }
    std::vector<double> grid;
    const auto n = static_cast<std::size_t>(
        std::floor((run.dt_stop_ps - run.dt_start_ps) / run.dt_step_ps + 1e-9)) + 1;
    grid.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        grid.push_back(run.dt_start_ps + static_cast<double>(k) * run.dt_step_ps);
    return grid;
}

void RunConfig::validate() const {
    pulse.validate();
    laser.validate();
    qd.validate();
    bench.validate();
    fit.validate();
    run.validate();
    if (dt_grid().empty()) throw config_error("run: empty delay grid");
}

double RunConfig::v_lo_resonance() const {
    return std::min(pulse.v_low, pulse.v_high) - qd.v_bias_res;
}

double RunConfig::v_hi_resonance() const {
    return std::max(pulse.v_low, pulse.v_high) - qd.v_bias_res;
}

std::string RunConfig::canonical() const {
    std::ostringstream os;
    os << "pulse.v_low_v=" << format_num(pulse.v_low) << '\n'
       << "pulse.v_high_v=" << format_num(pulse.v_high) << '\n'
       << "pulse.t_rise_start_ps=" << format_num(pulse.t_rise_start_ps) << '\n'
       << "pulse.tau_rise_ps=" << format_num(pulse.tau_rise_ps) << '\n'
       << "pulse.plateau_width_ps=" << format_num(pulse.plateau_width_ps) << '\n'
       << "pulse.tau_fall_ps=" << format_num(pulse.tau_fall_ps) << '\n'
       << "pulse.period_ps=" << format_num(pulse.period_ps) << '\n';
    if (pulse.feedthrough) {
        os << "pulse.feedthrough.t_center_ps=" << format_num(pulse.feedthrough->t_center_ps)
           << '\n'
           << "pulse.feedthrough.width_sigma_ps="
           << format_num(pulse.feedthrough->width_sigma_ps) << '\n'
           << "pulse.feedthrough.depth_v=" << format_num(pulse.feedthrough->depth_v)
           << '\n';
    }
    for (const auto& m : pulse.ringing)
        os << "pulse.ringing=" << format_num(m.amplitude_v) << ','
           << format_num(m.frequency_per_ps) << ',' << format_num(m.damping_per_ps)
           << ',' << format_num(m.phase_rad) << '\n';
    os << "laser.fwhm_ps=" << format_num(laser.fwhm_ps) << '\n'
       << "laser.pulse_area_rad=" << format_num(laser.pulse_area_rad) << '\n'
       << "laser.arrival_time_ps=" << format_num(laser.arrival_time_ps) << '\n'
       << "qd.stark_slope_mev_per_v=" << format_num(qd.stark_slope_mev_per_v) << '\n'
       << "qd.v_bias_res_v=" << format_num(qd.v_bias_res) << '\n'
       << "qd.gamma_e0_per_ps=" << format_num(qd.gamma_e0_per_ps) << '\n'
       << "qd.gamma_h0_per_ps=" << format_num(qd.gamma_h0_per_ps) << '\n'
       << "qd.v_e_v=" << format_num(qd.v_e) << '\n'
       << "qd.v_h_v=" << format_num(qd.v_h) << '\n'
       << "qd.gamma_pure0_per_ps=" << format_num(qd.gamma_pure0_per_ps) << '\n'
       << "qd.f_rep_per_ps=" << format_num(qd.f_rep_per_ps) << '\n'
       << "bench.jitter_sigma_ps=" << format_num(bench.jitter_sigma_ps) << '\n'
       << "bench.jitter_method="
       << (bench.jitter_method == JitterMethod::monte_carlo ? "monte_carlo"
                                                            : "gauss_hermite")
       << '\n'
       << "bench.mc_samples=" << bench.mc_samples << '\n'
       << "bench.gh_order=" << bench.gh_order << '\n'
       << "bench.noise_density_a_rthz=" << format_num(bench.noise_density_a_rthz)
       << '\n'
       << "bench.integration_time_s=" << format_num(bench.integration_time_s) << '\n'
       << "bench.v_n_start_v=" << format_num(bench.v_n_start) << '\n'
       << "bench.v_n_stop_v=" << format_num(bench.v_n_stop) << '\n'
       << "bench.v_n_step_v=" << format_num(bench.v_n_step) << '\n'
       << "bench.ode_rel_tol=" << format_num(bench.ode_rel_tol) << '\n'
       << "fit.max_iter=" << fit.max_iter << '\n'
       << "fit.prominence=" << format_num(fit.prominence) << '\n'
       << "fit.peak_min_separation_v=" << format_num(fit.peak_min_separation_v)
       << '\n'
       << "fit.rc_window_start_ps=" << format_num(fit.rc_window_start_ps) << '\n'
       << "fit.rc_window_stop_ps=" << format_num(fit.rc_window_stop_ps) << '\n';
    os << "run.dt=";
    bool first = true;
    for (double dt : dt_grid()) {
        if (!first) os << ',';
        os << format_num(dt);
        first = false;
    }
    os << '\n';
    os << "run.dump_trajectory=" << (run.dump_trajectory ? "true" : "false") << '\n';
    return os.str();
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(canonical()); }

std::string RunConfig::config_hash_hex() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash()));
    return buf;
}

std::vector<std::string> preset_names() {
    return {"fig3", "fig4", "fig5a", "figS1a", "figS1b", "plateau-stats"};
}

void apply_preset(RunConfig& cfg, const std::string& name) {
    if (name.empty()) return;
    if (name == "fig3" || name == "figS1a") {
        // Rising edge sampling: 15 ps RC edge, 6.5 ps jitter, 7 ps steps.
        cfg.pulse.tau_rise_ps = 15.0;
        cfg.bench.jitter_sigma_ps = 6.5;
        cfg.run.dt_start_ps = -50.0;
        cfg.run.dt_stop_ps = 50.0;
        cfg.run.dt_step_ps = 7.0;
        cfg.fit.rc_window_start_ps = -50.0;
        cfg.fit.rc_window_stop_ps = 50.0;
    } else if (name == "fig4") {
        // Full 1.3 ns pulse with the 16.7 ps fitted edge; illustrative
        // feed-through dip and one ringing mode (the paper gives no values).
        cfg.pulse.tau_rise_ps = 16.7;
        cfg.pulse.feedthrough = Feedthrough{-30.0, 6.0, 0.05};
        cfg.pulse.ringing = {RingingMode{0.02, 0.08, 0.01, 0.0}};
        cfg.bench.jitter_sigma_ps = 6.5;
        cfg.run.dt_start_ps = -100.0;
        cfg.run.dt_stop_ps = 1450.0;
        cfg.run.dt_step_ps = 7.0;
        cfg.fit.rc_window_start_ps = -10.0;
        cfg.fit.rc_window_stop_ps = 120.0;
    } else if (name == "fig5a") {
        // Five scans across the rising edge.
        cfg.pulse.tau_rise_ps = 15.0;
        cfg.bench.jitter_sigma_ps = 6.5;
        cfg.run.dt_list = {-43.0, -22.0, -1.0, 20.0, 41.0};
        cfg.fit.rc_window_start_ps = -50.0;
        cfg.fit.rc_window_stop_ps = 50.0;
    } else if (name == "figS1b") {
        // Falling edge: enhanced jitter, 12 ps fall constant.
        cfg.pulse.tau_rise_ps = 15.0;
        cfg.pulse.tau_fall_ps = 12.0;
        cfg.bench.jitter_sigma_ps = 20.0;
        cfg.run.dt_start_ps = 1315.0;
        cfg.run.dt_stop_ps = 1415.0;
        cfg.run.dt_step_ps = 7.0;
        cfg.fit.rc_window_start_ps = 1315.0;
        cfg.fit.rc_window_stop_ps = 1415.0;
    } else if (name == "plateau-stats") {
        // Static low-level delay for mode-statistics studies.
        cfg.pulse.tau_rise_ps = 15.0;
        cfg.bench.jitter_sigma_ps = 6.5;
        cfg.run.dt_list = {-43.0};
    } else {
        throw config_error("config: unknown preset '" + name + "'");
    }
    cfg.run.preset = name;
}

RunConfig parse_config_text(const std::string& text, const std::string& preset_override) {
    Flat flat = parse_flat(text);

    // Peek the preset before applying anything else.
    std::string preset = preset_override;
    if (preset.empty()) {
        auto it = flat.find("run.preset");
        if (it != flat.end()) {
            const std::string* s = std::get_if<std::string>(&it->second.value.v);
            if (!s) throw config_error("config: key 'run.preset' must be a string");
            preset = *s;
        }
    }

    RunConfig cfg;
    apply_preset(cfg, preset);
    apply_flat(cfg, flat);
    if (!preset_override.empty()) cfg.run.preset = preset_override;
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path, const std::string& preset_override) {
    std::string text;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw io_error("config: cannot read '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return parse_config_text(text, preset_override);
}

} // namespace qdscope
