#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdscope/bench.hpp"

namespace qdscope {

// One exGaussian resonance. tau_v is signed: its sign selects the tail side,
// its magnitude is the exponential scale. amplitude is the peak area.
struct PeakFit {
    double mu = 0.0;       // volts
    double sigma = 0.0;    // volts
    double tau_v = 0.0;    // volts, signed
    double amplitude = 0.0; // amperes*volts
    double baseline = 0.0;  // amperes
    double mode = 0.0;      // volts
    double stderr_mode = 0.0;
    double residual_norm = 0.0; // amperes
    bool converged = false;
};

struct BimodalFit {
    PeakFit peak_lo;
    PeakFit peak_hi; // peak_lo.mode < peak_hi.mode
    double weight_lo = 0.0;
    double weight_hi = 0.0; // area fractions, sum to 1
    bool bimodal = true;    // false after fallback to a single peak
};

struct RCFit {
    double t0_ps = 0.0;
    double tau_ps = 0.0;
    double v_lo = 0.0; // level before the edge
    double v_hi = 0.0; // asymptote after the edge
    double stderr_tau_ps = 0.0;
    double residual_norm = 0.0;
    bool converged = false;
};

// Unit-area exGaussian density (Gaussian (x) one-sided exponential).
// tau_v == 0 degenerates to the pure Gaussian. Stable for |tau_v| << sigma
// and |tau_v| >> sigma via scaled-erfc evaluation.
double exgauss_density(double x, double mu, double sigma, double tau_v);
double exgauss_value(double x, double mu, double sigma, double tau_v,
                     double amplitude, double baseline);

// Argmax of the density, to 1e-8 V (bracketed golden section).
double exgauss_mode(double mu, double sigma, double tau_v);

// Scaled complementary error function exp(z^2) erfc(z) for z >= 0.
double erfcx_nonneg(double z);

struct NllsOptions {
    int max_iter = 200;
    double ftol = 1e-14;
    double xtol = 1e-13;
};

struct NllsResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance; // scaled by residual variance
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
};

using ModelFn = std::function<double(const Eigen::VectorXd&, double)>;

// Damped least squares (Levenberg-Marquardt) with a numeric central-difference
// Jacobian. Throws rank_deficiency_error when the Jacobian at p0 has no full
// column rank; an exhausted iteration budget returns converged = false.
NllsResult nlls_fit(const ModelFn& model, const std::vector<double>& xs,
                    const std::vector<double>& ys, const Eigen::VectorXd& p0,
                    const NllsOptions& opts = {});

struct FitOptions {
    int max_iter = 200;
    double prominence = 5.0; // peak gate in robust-noise units
};

// Moment-initialized exGaussian fit of one resonance scan.
PeakFit fit_exgauss(const ResonanceScan& scan, const FitOptions& opts = {});

// Sum of two exGaussians with a shared baseline; falls back to a single peak
// when the minor amplitude is consistent with zero at 2 sigma.
BimodalFit fit_double_exgauss(const ResonanceScan& scan, double v_lo_hint,
                              double v_hi_hint, const FitOptions& opts = {});

// RC edge fit v_lo + (v_hi - v_lo)(1 - exp(-(t-t0)/tau)) for t > t0, flat
// before t0; points outside the window are ignored.
RCFit fit_rc_edge(const std::vector<double>& t_ps, const std::vector<double>& v,
                  std::pair<double, double> window_ps, const FitOptions& opts = {});

// Sample standard deviation of fitted modes over n independently seeded
// synthetic scans; needs >= 90% of the fits to converge.
double bootstrap_mode_std(const std::function<ResonanceScan(std::uint64_t)>& scan_generator,
                          std::size_t n, std::uint64_t base_seed,
                          const FitOptions& opts = {});

// Candidate peak positions (v values of prominent local maxima), used to
// route scans to the single or double fit.
std::vector<double> detect_peaks(const ResonanceScan& scan, double min_separation_v,
                                 const FitOptions& opts = {});

} // namespace qdscope
