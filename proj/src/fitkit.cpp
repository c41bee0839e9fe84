#include "qdscope/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qdscope/errors.hpp"
#include "qdscope/rng.hpp"

namespace qdscope {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrtPi = 0.5641895835477563;
constexpr double kSqrt2Pi = 2.5066282746310002;

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

} // namespace

double erfcx_nonneg(double z) {
    if (z < 0.0) throw fit_error("erfcx_nonneg: z must be >= 0");
    if (z < 5.0) return std::exp(z * z) * std::erfc(z);
    // Laplace continued fraction, evaluated backwards.
    double f = z;
    for (int k = 30; k >= 1; --k) f = z + 0.5 * static_cast<double>(k) / f;
    return kInvSqrtPi / f;
}

double exgauss_density(double x, double mu, double sigma, double tau_v) {
    if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(tau_v))
        throw fit_error("exgauss: sigma must be > 0 and parameters finite");
    if (tau_v == 0.0) {
        const double u = (x - mu) / sigma;
        return std::exp(-0.5 * u * u) / (sigma * kSqrt2Pi);
    }
    // Mirror the negative-tail case onto the positive-tail formula.
    double u, tau;
    if (tau_v > 0.0) {
        u = (x - mu) / sigma;
        tau = tau_v;
    } else {
        u = (mu - x) / sigma;
        tau = -tau_v;
    }
    const double r = sigma / tau;
    const double z = (r - u) / kSqrt2;
    if (z >= 0.0) return erfcx_nonneg(z) * std::exp(-0.5 * u * u) / (2.0 * tau);
    // Deep in the exponential tail: erfcx(z) = 2 exp(z^2) - erfcx(-z).
    return std::exp(0.5 * r * r - u * r) / tau -
           erfcx_nonneg(-z) * std::exp(-0.5 * u * u) / (2.0 * tau);
}

double exgauss_value(double x, double mu, double sigma, double tau_v,
                     double amplitude, double baseline) {
    return baseline + amplitude * exgauss_density(x, mu, sigma, tau_v);
}

double exgauss_mode(double mu, double sigma, double tau_v) {
    if (!(sigma > 0.0)) throw fit_error("exgauss_mode: sigma must be > 0");
    if (tau_v == 0.0) return mu;
    const double at = std::abs(tau_v);
    double lo = mu - 3.0 * sigma - 3.0 * at;
    double hi = mu + 3.0 * sigma + 3.0 * at;
    // Golden-section maximization; the density is unimodal.
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = exgauss_density(x1, mu, sigma, tau_v);
    double f2 = exgauss_density(x2, mu, sigma, tau_v);
    while (b - a > 1e-9 * std::max(1.0, sigma + at)) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = exgauss_density(x2, mu, sigma, tau_v);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = exgauss_density(x1, mu, sigma, tau_v);
        }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt

namespace {

double fd_step(double v) { return 1e-6 * std::max(std::abs(v), 1e-3); }

void residuals(const ModelFn& model, const std::vector<double>& xs,
               const std::vector<double>& ys, const Eigen::VectorXd& p,
               Eigen::VectorXd& r) {
    for (Eigen::Index i = 0; i < r.size(); ++i)
        r(i) = ys[static_cast<std::size_t>(i)] -
               model(p, xs[static_cast<std::size_t>(i)]);
}

void jacobian(const ModelFn& model, const std::vector<double>& xs,
              const std::vector<double>& ys, const Eigen::VectorXd& p,
              Eigen::MatrixXd& J, Eigen::VectorXd& rp, Eigen::VectorXd& rm) {
    Eigen::VectorXd pt = p;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        const double h = fd_step(p(j));
        pt(j) = p(j) + h;
        residuals(model, xs, ys, pt, rp);
        pt(j) = p(j) - h;
        residuals(model, xs, ys, pt, rm);
        pt(j) = p(j);
        J.col(j) = (rp - rm) / (2.0 * h);
    }
}

} // namespace

NllsResult nlls_fit(const ModelFn& model, const std::vector<double>& xs,
                    const std::vector<double>& ys, const Eigen::VectorXd& p0,
                    const NllsOptions& opts) {
    const auto m = static_cast<Eigen::Index>(xs.size());
    const auto n = p0.size();
    if (xs.size() != ys.size()) throw fit_error("nlls: x/y size mismatch");
    if (m <= n) throw fit_error("nlls: needs more data points than parameters");
    if (!p0.allFinite()) throw fit_error("nlls: p0 must be finite");

    Eigen::VectorXd p = p0, r(m), rt(m), rp(m), rm(m), g(n), delta(n);
    Eigen::MatrixXd J(m, n), A(n, n), Ad(n, n);

    residuals(model, xs, ys, p, r);
    double cost = r.squaredNorm();
    jacobian(model, xs, ys, p, J, rp, rm);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    if (qr.rank() < n)
        throw rank_deficiency_error("nlls: Jacobian is rank deficient at the start point");

    NllsResult out;
    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    for (; it < opts.max_iter && !converged; ++it) {
        A.noalias() = J.transpose() * J;
        g.noalias() = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, cost)) {
            converged = true;
            break;
        }
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            Ad = A;
            for (Eigen::Index k = 0; k < n; ++k)
                Ad(k, k) += lambda * std::max(A(k, k), 1e-30);
            delta = Ad.ldlt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            Eigen::VectorXd pt = p + delta;
            residuals(model, xs, ys, pt, rt);
            const double ct = rt.squaredNorm();
            if (std::isfinite(ct) && ct <= cost) {
                const double dcost = cost - ct;
                p = pt;
                r = rt;
                cost = ct;
                lambda = std::max(lambda / 3.0, 1e-14);
                accepted = true;
                if (dcost <= opts.ftol * std::max(cost, 1e-300) ||
                    delta.norm() <= opts.xtol * (p.norm() + opts.xtol))
                    converged = true;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e15) break;
        }
        if (!accepted) break;
        if (!converged) jacobian(model, xs, ys, p, J, rp, rm);
    }

    jacobian(model, xs, ys, p, J, rp, rm);
    A.noalias() = J.transpose() * J;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    Eigen::MatrixXd cov = cod.pseudoInverse();
    const double dof = static_cast<double>(m - n);
    cov *= cost / dof;

    out.params = p;
    out.covariance = cov;
    out.residual_norm = std::sqrt(cost);
    out.converged = converged;
    out.iterations = it;
    return out;
}

// ---------------------------------------------------------------------------
// Scan fitting

namespace {

struct SortedScan {
    std::vector<double> v;
    std::vector<double> y; // normalized by y_scale
    double y_scale;
    double step;
    double baseline0;   // normalized
    double noise_mad;   // normalized
};

SortedScan prepare_scan(const ResonanceScan& scan) {
    const std::size_t n = scan.v_n.size();
    if (n < 8) throw fit_error("fit: scan needs at least 8 points");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scan.v_n[a] != scan.v_n[b]) return scan.v_n[a] < scan.v_n[b];
        return scan.i_pc[a] < scan.i_pc[b];
    });

    SortedScan s;
    s.v.resize(n);
    s.y.resize(n);
    double ymax = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        s.v[k] = scan.v_n[idx[k]];
        s.y[k] = scan.i_pc[idx[k]];
        if (!std::isfinite(s.v[k]) || !std::isfinite(s.y[k]))
            throw fit_error("fit: scan contains non-finite values");
        ymax = std::max(ymax, std::abs(s.y[k]));
    }
    if (ymax == 0.0) throw no_peak_error("fit: scan is identically zero");
    s.y_scale = ymax;
    for (auto& y : s.y) y /= ymax;

    std::vector<double> steps(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) steps[k] = s.v[k + 1] - s.v[k];
    std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
    s.step = steps[steps.size() / 2];

    std::vector<double> low = s.y;
    const std::size_t kl = std::max<std::size_t>(3, n / 8);
    std::nth_element(low.begin(), low.begin() + kl, low.end());
    s.baseline0 = std::accumulate(low.begin(), low.begin() + kl, 0.0) /
                  static_cast<double>(kl);

    // Robust noise from linearly detrended tails.
    const std::size_t nt = std::max<std::size_t>(3, (n * 15) / 100);
    std::vector<double> resid;
    auto detrend = [&](std::size_t begin, std::size_t end) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double cnt = static_cast<double>(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
            sx += s.v[k];
            sy += s.y[k];
            sxx += s.v[k] * s.v[k];
            sxy += s.v[k] * s.y[k];
        }
        const double den = cnt * sxx - sx * sx;
        const double a = den != 0.0 ? (cnt * sxy - sx * sy) / den : 0.0;
        const double b = (sy - a * sx) / cnt;
        for (std::size_t k = begin; k < end; ++k) resid.push_back(s.y[k] - (a * s.v[k] + b));
    };
    detrend(0, nt);
    detrend(n - nt, n);
    std::vector<double> ab(resid.size());
    std::nth_element(resid.begin(), resid.begin() + resid.size() / 2, resid.end());
    const double med = resid[resid.size() / 2];
    for (std::size_t k = 0; k < resid.size(); ++k) ab[k] = std::abs(resid[k] - med);
    std::nth_element(ab.begin(), ab.begin() + ab.size() / 2, ab.end());
    s.noise_mad = 1.4826 * ab[ab.size() / 2];
    return s;
}

struct MomentInit {
    double mu, sigma, tau, area;
};

// exGaussian moment relations: mean = mu + tau, var = sigma^2 + tau^2,
// skew = 2 tau^3 / var^(3/2).
MomentInit moments_init(const std::vector<double>& v, const std::vector<double>& y,
                        double baseline, double step) {
    double wsum = 0, m1 = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double w = std::max(y[k] - baseline, 0.0);
        wsum += w;
        m1 += w * v[k];
    }
    MomentInit mi{0, 0, 0, 0};
    if (!(wsum > 0.0)) return mi;
    m1 /= wsum;
    double var = 0, m3 = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double w = std::max(y[k] - baseline, 0.0);
        const double d = v[k] - m1;
        var += w * d * d;
        m3 += w * d * d * d;
    }
    var /= wsum;
    m3 /= wsum;
    const double sd = std::sqrt(std::max(var, 0.25 * step * step));
    double skew = m3 / (sd * sd * sd);
    skew = std::clamp(skew, -1.5, 1.5);
    double tau = std::cbrt(0.5 * std::abs(skew)) * sd;
    if (skew < 0.0) tau = -tau;
    if (std::abs(tau) > 0.85 * sd) tau = (tau > 0 ? 0.85 : -0.85) * sd;
    const double sig2 = var - tau * tau;
    mi.sigma = std::sqrt(std::max(sig2, 0.25 * step * step));
    mi.tau = tau;
    mi.mu = m1 - tau;
    mi.area = wsum * step;
    return mi;
}

ModelFn exgauss_model(double sigma_floor) {
    return [sigma_floor](const Eigen::VectorXd& p, double x) {
        const double sig = std::max(std::abs(p(1)), sigma_floor);
        return p(4) + p(3) * exgauss_density(x, p(0), sig, p(2));
    };
}

// stderr of the mode by propagating the (mu, sigma, tau) covariance block
// through exgauss_mode with finite differences.
double mode_stderr(const Eigen::VectorXd& p, const Eigen::MatrixXd& cov) {
    const double sigma = std::abs(p(1));
    const double hs = std::max(1e-4 * sigma, 1e-9);
    const double ht = std::max(1e-4 * std::max(std::abs(p(2)), sigma), 1e-9);
    Eigen::Vector3d grad;
    grad(0) = 1.0; // translation equivariance
    grad(1) = (exgauss_mode(p(0), sigma + hs, p(2)) -
               exgauss_mode(p(0), std::max(sigma - hs, 0.5 * hs), p(2))) /
              (sigma + hs - std::max(sigma - hs, 0.5 * hs));
    grad(2) = (exgauss_mode(p(0), sigma, p(2) + ht) -
               exgauss_mode(p(0), sigma, p(2) - ht)) /
              (2.0 * ht);
    const Eigen::Matrix3d block = cov.topLeftCorner<3, 3>();
    const double var = grad.transpose() * block * grad;
    return var > 0.0 ? std::sqrt(var) : 0.0;
}

PeakFit build_peak(const SortedScan& s, const NllsResult& res) {
    PeakFit pk;
    pk.mu = res.params(0);
    pk.sigma = std::abs(res.params(1));
    pk.tau_v = res.params(2);
    pk.amplitude = res.params(3) * s.y_scale;
    pk.baseline = res.params(4) * s.y_scale;
    pk.mode = exgauss_mode(pk.mu, pk.sigma, pk.tau_v);
    pk.stderr_mode = mode_stderr(res.params, res.covariance);
    pk.residual_norm = res.residual_norm * s.y_scale;
    pk.converged = res.converged && pk.amplitude > 0.0;
    return pk;
}

void gate_prominence(const SortedScan& s, double prominence) {
    const double peak = *std::max_element(s.y.begin(), s.y.end()) - s.baseline0;
    const double floor = std::max(s.noise_mad, 1e-9);
    if (peak < prominence * floor)
        throw no_peak_error("fit: no prominent peak (max-baseline below noise gate)");
}

} // namespace

PeakFit fit_exgauss(const ResonanceScan& scan, const FitOptions& opts) {
    SortedScan s = prepare_scan(scan);
    gate_prominence(s, opts.prominence);

    NllsOptions nopts;
    nopts.max_iter = opts.max_iter;
    const double sigma_floor = 0.25 * s.step;
    const ModelFn model = exgauss_model(sigma_floor);

    const MomentInit mi = moments_init(s.v, s.y, s.baseline0, s.step);
    std::vector<Eigen::VectorXd> starts;
    if (mi.area > 0.0 && std::isfinite(mi.mu)) {
        Eigen::VectorXd p0(5);
        p0 << mi.mu, mi.sigma, mi.tau, mi.area, s.baseline0;
        starts.push_back(p0);
    }

    NllsResult best;
    bool have = false;
    auto consider = [&](const Eigen::VectorXd& p0) {
        NllsResult r;
        try {
            r = nlls_fit(model, s.v, s.y, p0, nopts);
        } catch (const fit_error&) {
            return;
        }
        if (!have || (r.converged && !best.converged) ||
            (r.converged == best.converged &&
             (r.residual_norm < best.residual_norm ||
              (r.residual_norm == best.residual_norm &&
               std::abs(r.params(2)) < std::abs(best.params(2)))))) {
            best = r;
            have = true;
        }
    };

    for (const auto& p0 : starts) consider(p0);
    if (!have || !best.converged) {
        // Fixed fallback starts around the raw maximum.
        const std::size_t imax = static_cast<std::size_t>(
            std::max_element(s.y.begin(), s.y.end()) - s.y.begin());
        const double vpk = s.v[imax];
        const double sd = mi.sigma > 0.0 ? std::hypot(mi.sigma, mi.tau) : 8.0 * s.step;
        const double area = mi.area > 0.0
                                ? mi.area
                                : (s.y[imax] - s.baseline0) * sd * kSqrt2Pi;
        for (double tf : {-1.0, -0.33, 0.0, 0.33, 1.0}) {
            Eigen::VectorXd p0(5);
            const double tau = tf * sd;
            p0 << vpk - tau, 0.8 * sd, tau, area, s.baseline0;
            consider(p0);
        }
    }
    if (!have) throw fit_error("fit_exgauss: all starting points failed");
    return build_peak(s, best);
}

BimodalFit fit_double_exgauss(const ResonanceScan& scan, double v_lo_hint,
                              double v_hi_hint, const FitOptions& opts) {
    if (!(v_hi_hint > v_lo_hint))
        throw fit_error("fit_double_exgauss: hints must satisfy lo < hi");
    SortedScan s = prepare_scan(scan);
    gate_prominence(s, opts.prominence);

    const double mid = 0.5 * (v_lo_hint + v_hi_hint);
    std::vector<double> vl, yl, vh, yh;
    for (std::size_t k = 0; k < s.v.size(); ++k) {
        if (s.v[k] < mid) {
            vl.push_back(s.v[k]);
            yl.push_back(s.y[k]);
        } else {
            vh.push_back(s.v[k]);
            yh.push_back(s.y[k]);
        }
    }
    MomentInit lo = vl.size() >= 4 ? moments_init(vl, yl, s.baseline0, s.step)
                                   : MomentInit{0, 0, 0, 0};
    MomentInit hi = vh.size() >= 4 ? moments_init(vh, yh, s.baseline0, s.step)
                                   : MomentInit{0, 0, 0, 0};
    const double sd_default = 8.0 * s.step;
    const double area_total = lo.area + hi.area;
    auto patch = [&](MomentInit& m, double hint) {
        if (!(m.area > 0.02 * area_total) || !(m.sigma > 0.0)) {
            m.mu = hint;
            m.sigma = sd_default;
            m.tau = 0.0;
            m.area = std::max(0.05 * area_total, 0.05 * sd_default);
        }
    };
    patch(lo, v_lo_hint);
    patch(hi, v_hi_hint);
    if (4.0 * std::max(lo.sigma, hi.sigma) >= v_hi_hint - v_lo_hint)
        throw fit_error("fit_double_exgauss: hints closer than 4 expected sigma");

    const double sigma_floor = 0.25 * s.step;
    const ModelFn model = [sigma_floor](const Eigen::VectorXd& p, double x) {
        const double s1 = std::max(std::abs(p(1)), sigma_floor);
        const double s2 = std::max(std::abs(p(5)), sigma_floor);
        return p(8) + p(3) * exgauss_density(x, p(0), s1, p(2)) +
               p(7) * exgauss_density(x, p(4), s2, p(6));
    };
    Eigen::VectorXd p0(9);
    p0 << lo.mu, lo.sigma, lo.tau, lo.area, hi.mu, hi.sigma, hi.tau, hi.area,
        s.baseline0;

    NllsOptions nopts;
    nopts.max_iter = opts.max_iter;
    NllsResult res = nlls_fit(model, s.v, s.y, p0, nopts);

    auto component = [&](int base) {
        PeakFit pk;
        pk.mu = res.params(base);
        pk.sigma = std::max(std::abs(res.params(base + 1)), sigma_floor);
        pk.tau_v = res.params(base + 2);
        pk.amplitude = res.params(base + 3) * s.y_scale;
        pk.baseline = res.params(8) * s.y_scale;
        pk.mode = exgauss_mode(pk.mu, pk.sigma, pk.tau_v);
        Eigen::VectorXd psub(5);
        psub << pk.mu, pk.sigma, pk.tau_v, res.params(base + 3), res.params(8);
        Eigen::MatrixXd csub = res.covariance.block(base, base, 3, 3);
        Eigen::MatrixXd cfull = Eigen::MatrixXd::Zero(5, 5);
        cfull.topLeftCorner(3, 3) = csub;
        pk.stderr_mode = mode_stderr(psub, cfull);
        pk.residual_norm = res.residual_norm * s.y_scale;
        pk.converged = res.converged;
        return pk;
    };
    const double area1 = res.params(3) * s.y_scale;
    const double area2 = res.params(7) * s.y_scale;
    const int imin = area1 <= area2 ? 3 : 7;
    const double minor = std::min(area1, area2);
    const double minor_err =
        std::sqrt(std::max(res.covariance(imin, imin), 0.0)) * s.y_scale;

    PeakFit a = component(0);
    PeakFit b = component(4);
    if (a.mode > b.mode) std::swap(a, b);
    const double area_a = a.amplitude, area_b = b.amplitude;

    BimodalFit out;
    if (!res.converged || area_a + area_b <= 0.0 || minor < 2.0 * minor_err ||
        minor <= 0.0) {
        // Second component consistent with zero: refit a single peak.
        PeakFit single = fit_exgauss(scan, opts);
        const bool is_hi = std::abs(single.mode - v_hi_hint) <
                           std::abs(single.mode - v_lo_hint);
        PeakFit placeholder;
        placeholder.mu = is_hi ? v_lo_hint : v_hi_hint;
        placeholder.sigma = single.sigma;
        placeholder.tau_v = 0.0;
        placeholder.amplitude = 0.0;
        placeholder.baseline = single.baseline;
        placeholder.mode = placeholder.mu;
        placeholder.converged = single.converged;
        out.peak_lo = is_hi ? placeholder : single;
        out.peak_hi = is_hi ? single : placeholder;
        out.weight_lo = is_hi ? 0.0 : 1.0;
        out.weight_hi = is_hi ? 1.0 : 0.0;
        out.bimodal = false;
        return out;
    }
    out.peak_lo = a;
    out.peak_hi = b;
    out.weight_lo = area_a / (area_a + area_b);
    out.weight_hi = area_b / (area_a + area_b);
    out.bimodal = true;
    return out;
}

RCFit fit_rc_edge(const std::vector<double>& t_ps, const std::vector<double>& v,
                  std::pair<double, double> window_ps, const FitOptions& opts) {
    if (t_ps.size() != v.size()) throw fit_error("fit_rc_edge: size mismatch");
    std::vector<double> ts, vs;
    for (std::size_t k = 0; k < t_ps.size(); ++k)
        if (t_ps[k] >= window_ps.first && t_ps[k] <= window_ps.second) {
            ts.push_back(t_ps[k]);
            vs.push_back(v[k]);
        }
    if (ts.size() < 5) throw fit_error("fit_rc_edge: fewer than 5 points in window");
    std::vector<std::size_t> idx(ts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return ts[a] < ts[b];
    });
    std::vector<double> tss(ts.size()), vss(ts.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        tss[k] = ts[idx[k]];
        vss[k] = vs[idx[k]];
    }

    const double span = tss.back() - tss.front();
    const double tau_floor = std::max(1e-6 * span, 1e-9);
    const ModelFn model = [tau_floor](const Eigen::VectorXd& p, double t) {
        const double tau = std::max(std::abs(p(1)), tau_floor);
        if (t <= p(0)) return p(2);
        return p(3) + (p(2) - p(3)) * std::exp(-(t - p(0)) / tau);
    };

    const double va0 = vss.front();
    const double vb0 = (vss[vss.size() - 1] + vss[vss.size() - 2]) / 2.0;
    double t0_guess = tss.front();
    double t63 = tss.front() + span / 5.0;
    const double swing = vb0 - va0;
    if (std::abs(swing) > 0.0) {
        for (std::size_t k = 0; k + 1 < vss.size(); ++k) {
            const double f0 = (vss[k] - va0) / swing;
            const double f1 = (vss[k + 1] - va0) / swing;
            if (f0 < 0.1 && f1 >= 0.1) {
                t0_guess = tss[k] + (0.1 - f0) / (f1 - f0) * (tss[k + 1] - tss[k]);
            }
            if (f0 < 0.632 && f1 >= 0.632) {
                t63 = tss[k] + (0.632 - f0) / (f1 - f0) * (tss[k + 1] - tss[k]);
                break;
            }
        }
    }
    double tau0 = std::max(t63 - t0_guess, 2.0 * tau_floor);

    Eigen::VectorXd p0(4);
    p0 << t0_guess, tau0, va0, vb0;
    NllsOptions nopts;
    nopts.max_iter = opts.max_iter;
    NllsResult res = nlls_fit(model, tss, vss, p0, nopts);

    RCFit out;
    out.t0_ps = res.params(0);
    out.tau_ps = std::abs(res.params(1));
    out.v_lo = res.params(2);
    out.v_hi = res.params(3);
    out.stderr_tau_ps = std::sqrt(std::max(res.covariance(1, 1), 0.0));
    out.residual_norm = res.residual_norm;
    out.converged = res.converged;
    return out;
}

double bootstrap_mode_std(const std::function<ResonanceScan(std::uint64_t)>& scan_generator,
                          std::size_t n, std::uint64_t base_seed,
                          const FitOptions& opts) {
    if (n < 30) throw config_error("bootstrap: n must be >= 30");
    const std::uint64_t root = seed_combine(base_seed, 0x626f6f74ULL); // "boot"
    std::vector<double> modes;
    modes.reserve(n);
    std::size_t failures = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t seed = seed_combine(root, static_cast<std::uint64_t>(i));
        try {
            PeakFit pk = fit_exgauss(scan_generator(seed), opts);
            if (pk.converged)
                modes.push_back(pk.mode);
            else
                ++failures;
        } catch (const fit_error&) {
            ++failures;
        }
    }
    if (modes.size() < (9 * n) / 10)
        throw fit_error("bootstrap: fewer than 90% of fits converged");
    double mean = std::accumulate(modes.begin(), modes.end(), 0.0) /
                  static_cast<double>(modes.size());
    double acc = 0.0;
    for (double m : modes) acc += (m - mean) * (m - mean);
    return std::sqrt(acc / static_cast<double>(modes.size() - 1));
}

std::vector<double> detect_peaks(const ResonanceScan& scan, double min_separation_v,
                                 const FitOptions& opts) {
    SortedScan s = prepare_scan(scan);
    const std::size_t n = s.v.size();
    std::vector<double> smooth(n);
    for (std::size_t k = 0; k < n; ++k) {
        double acc = s.y[k];
        double cnt = 1.0;
        if (k > 0) {
            acc += s.y[k - 1];
            cnt += 1.0;
        }
        if (k + 1 < n) {
            acc += s.y[k + 1];
            cnt += 1.0;
        }
        smooth[k] = acc / cnt;
    }
    const double ymax = *std::max_element(smooth.begin(), smooth.end());
    const double gate = s.baseline0 +
                        std::max(opts.prominence * std::max(s.noise_mad, 1e-9),
                                 0.15 * (ymax - s.baseline0));
    const auto w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(0.5 * min_separation_v / s.step)));
    std::vector<double> peaks;
    for (std::size_t k = 0; k < n; ++k) {
        if (smooth[k] < gate) continue;
        bool is_max = true;
        const std::size_t lo = k >= w ? k - w : 0;
        const std::size_t hi = std::min(n - 1, k + w);
        for (std::size_t j = lo; j <= hi && is_max; ++j) {
            if (j == k) continue;
            if (smooth[j] > smooth[k] ||
                (smooth[j] == smooth[k] && j < k)) // ties go to the left point
                is_max = false;
        }
        if (is_max) peaks.push_back(s.v[k]);
    }
    return peaks;
}

} // namespace qdscope
