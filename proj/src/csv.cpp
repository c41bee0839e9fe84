#include "qdscope/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qdscope/errors.hpp"

namespace qdscope {

namespace {

void write_meta(std::ostream& os, const FileMeta& meta) {
    os << "# qdscope " << meta.kind << "\n";
    os << "# config_hash=" << meta.config_hash << "\n";
    os << "# seed=" << meta.seed << "\n";
    os << "# version=" << meta.version << "\n";
}

struct Reader {
    std::ifstream in;
    std::string path;
    int lineno = 0;

    explicit Reader(const std::string& p) : in(p), path(p) {
        if (!in) throw io_error("cannot open '" + p + "' for reading");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw io_error(path + ": row " + std::to_string(lineno) + ": " + msg);
    }

    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        return false;
    }
};

FileMeta read_meta(Reader& r, std::string& header_line, const std::string& expect_kind) {
    FileMeta meta;
    std::string line;
    while (r.next(line)) {
        if (line.empty()) continue;
        if (line[0] != '#') {
            header_line = line;
            break;
        }
        std::string body = line.substr(1);
        while (!body.empty() && body.front() == ' ') body.erase(body.begin());
        if (body.rfind("qdscope ", 0) == 0) {
            meta.kind = body.substr(8);
        } else if (body.rfind("config_hash=", 0) == 0) {
            meta.config_hash = body.substr(12);
        } else if (body.rfind("seed=", 0) == 0) {
            meta.seed = std::strtoull(body.c_str() + 5, nullptr, 10);
        } else if (body.rfind("version=", 0) == 0) {
            meta.version = body.substr(8);
        } else {
            const auto eq = body.find('=');
            if (eq != std::string::npos)
                meta.extra[body.substr(0, eq)] = body.substr(eq + 1);
        }
    }
    if (header_line.empty()) r.fail("missing column header");
    if (!expect_kind.empty() && meta.kind != expect_kind)
        throw io_error(r.path + ": expected a '" + expect_kind + "' file, found '" +
                       meta.kind + "'");
    return meta;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field(Reader& r, const std::string& field, const char* name) {
    if (field == "nan") return std::nan("");
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || field.empty())
        r.fail(std::string("cannot parse ") + name + " from '" + field + "'");
    return v;
}

int parse_int_field(Reader& r, const std::string& field, const char* name) {
    int out = 0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    if (ec != std::errc{} || p != field.data() + field.size())
        r.fail(std::string("cannot parse ") + name + " from '" + field + "'");
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // '\n' endings on every platform
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    return out;
}

} // namespace

std::string csv_num(double v, int sig_digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, v);
    return buf;
}

void write_scans_csv(const std::string& path, const std::vector<ResonanceScan>& scans,
                     const FileMeta& meta) {
    auto out = open_out(path);
    write_meta(out, meta);
    out << "dt_oe_ps,v_n_V,i_pc_pA\n";
    for (const auto& scan : scans)
        for (std::size_t k = 0; k < scan.v_n.size(); ++k)
            out << csv_num(scan.dt_oe_ps, 10) << ',' << csv_num(scan.v_n[k], 10) << ','
                << csv_num(scan.i_pc[k] / 1e-12, 6) << '\n';
}

std::vector<ResonanceScan> read_scans_csv(const std::string& path, FileMeta& meta) {
    Reader r(path);
    std::string header;
    meta = read_meta(r, header, "scans");
    if (header != "dt_oe_ps,v_n_V,i_pc_pA") r.fail("unexpected scans header");
    std::vector<ResonanceScan> scans;
    std::string line;
    while (r.next(line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_row(line);
        if (fields.size() != 3) r.fail("expected 3 fields");
        const double dt = parse_field(r, fields[0], "dt_oe_ps");
        const double vn = parse_field(r, fields[1], "v_n_V");
        const double ipc = parse_field(r, fields[2], "i_pc_pA") * 1e-12;
        if (scans.empty() || scans.back().dt_oe_ps != dt) {
            scans.push_back(ResonanceScan{});
            scans.back().dt_oe_ps = dt;
        }
        scans.back().v_n.push_back(vn);
        scans.back().i_pc.push_back(ipc);
    }
    if (scans.empty()) throw io_error(path + ": no scan rows");
    return scans;
}

void write_fits_csv(const std::string& path, const std::vector<FitRow>& rows,
                    const FileMeta& meta) {
    auto out = open_out(path);
    write_meta(out, meta);
    out << "dt_oe_ps,mode_V,stderr_mode_mV,sigma_V,tau_v_V,amplitude,baseline,"
           "converged,n_peaks,weight_hi\n";
    for (const auto& f : rows)
        out << csv_num(f.dt_oe_ps, 10) << ',' << csv_num(f.mode_v, 10) << ','
            << csv_num(f.stderr_mode_mv, 6) << ',' << csv_num(f.sigma_v, 8) << ','
            << csv_num(f.tau_v_v, 8) << ',' << csv_num(f.amplitude, 8) << ','
            << csv_num(f.baseline, 8) << ',' << f.converged << ',' << f.n_peaks << ','
            << csv_num(f.weight_hi, 6) << '\n';
}

std::vector<FitRow> read_fits_csv(const std::string& path, FileMeta& meta) {
    Reader r(path);
    std::string header;
    meta = read_meta(r, header, "fits");
    if (header !=
        "dt_oe_ps,mode_V,stderr_mode_mV,sigma_V,tau_v_V,amplitude,baseline,"
        "converged,n_peaks,weight_hi")
        r.fail("unexpected fits header");
    std::vector<FitRow> rows;
    std::string line;
    while (r.next(line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_row(line);
        if (fields.size() != 10) r.fail("expected 10 fields");
        FitRow f;
        f.dt_oe_ps = parse_field(r, fields[0], "dt_oe_ps");
        f.mode_v = parse_field(r, fields[1], "mode_V");
        f.stderr_mode_mv = parse_field(r, fields[2], "stderr_mode_mV");
        f.sigma_v = parse_field(r, fields[3], "sigma_V");
        f.tau_v_v = parse_field(r, fields[4], "tau_v_V");
        f.amplitude = parse_field(r, fields[5], "amplitude");
        f.baseline = parse_field(r, fields[6], "baseline");
        f.converged = parse_int_field(r, fields[7], "converged");
        f.n_peaks = parse_int_field(r, fields[8], "n_peaks");
        f.weight_hi = parse_field(r, fields[9], "weight_hi");
        rows.push_back(f);
    }
    if (rows.empty()) throw io_error(path + ": no fit rows");
    return rows;
}

void write_waveform_csv(const std::string& path, const SampledWaveform& wf,
                        const FileMeta& meta) {
    auto out = open_out(path);
    write_meta(out, meta);
    out << "# v_bias_res_V=" << csv_num(wf.v_bias_res_used, 10) << "\n";
    out << "dt_oe_ps,v_V,stderr_mV,alt_v_V,weight_hi,n_peaks\n";
    for (const auto& pt : wf.points)
        out << csv_num(pt.dt_oe_ps, 10) << ',' << csv_num(pt.v, 10) << ','
            << csv_num(pt.stderr_v * 1e3, 6) << ','
            << (pt.alt_v ? csv_num(*pt.alt_v, 10) : "nan") << ','
            << csv_num(pt.weight_hi, 6) << ',' << pt.n_peaks << '\n';
}

SampledWaveform read_waveform_csv(const std::string& path, FileMeta& meta) {
    Reader r(path);
    std::string header;
    meta = read_meta(r, header, "waveform");
    SampledWaveform wf;
    if (auto it = meta.extra.find("v_bias_res_V"); it != meta.extra.end())
        wf.v_bias_res_used = std::strtod(it->second.c_str(), nullptr);
    if (header != "dt_oe_ps,v_V,stderr_mV,alt_v_V,weight_hi,n_peaks")
        r.fail("unexpected waveform header");
    std::string line;
    while (r.next(line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_row(line);
        if (fields.size() != 6) r.fail("expected 6 fields");
        WaveformPoint pt;
        pt.dt_oe_ps = parse_field(r, fields[0], "dt_oe_ps");
        pt.v = parse_field(r, fields[1], "v_V");
        pt.stderr_v = parse_field(r, fields[2], "stderr_mV") * 1e-3;
        const double alt = parse_field(r, fields[3], "alt_v_V");
        pt.weight_hi = parse_field(r, fields[4], "weight_hi");
        pt.n_peaks = parse_int_field(r, fields[5], "n_peaks");
        if (!std::isnan(alt)) {
            pt.alt_v = alt;
            pt.alt_weight = std::min(pt.weight_hi, 1.0 - pt.weight_hi);
        }
        wf.points.push_back(pt);
    }
    if (wf.points.empty()) throw io_error(path + ": no waveform rows");
    return wf;
}

void write_trajectory_csv(const std::string& path, const BlochTrajectory& traj,
                          const FileMeta& meta) {
    auto out = open_out(path);
    write_meta(out, meta);
    out << "t_ps,rho_gg,rho_xx,rho_e,rho_h,coh_re,coh_im,q_extracted\n";
    for (std::size_t k = 0; k < traj.times_ps.size(); ++k) {
        const BlochState& s = traj.states[k];
        out << csv_num(traj.times_ps[k], 10) << ',' << csv_num(s.rho_gg, 9) << ','
            << csv_num(s.rho_xx, 9) << ',' << csv_num(s.rho_e, 9) << ','
            << csv_num(s.rho_h, 9) << ',' << csv_num(s.coh_re, 9) << ','
            << csv_num(s.coh_im, 9) << ',' << csv_num(s.q_extracted, 9) << '\n';
    }
}

} // namespace qdscope
