#pragma once

#include <vector>

#include "pndkit/pnd.hpp"

namespace pndkit {

/// Bhattacharyya fidelity sum_n sqrt(p_n q_n) between distributions on
/// the same truncated grid.
double fidelity(const Pnd& p, const Pnd& q);
double fidelity(const JointPnd& p, const JointPnd& q);

struct Moments {
    double mean_s = 0.0;
    double mean_i = 0.0;
    double var_s = 0.0;
    double var_i = 0.0;
    double cross = 0.0; // <n_s n_i>
    double cov = 0.0;   // <n_s n_i> - <n_s><n_i>
};

Moments joint_moments(const JointPnd& joint);

/// Photon-number-difference noise: V(n_s - n_i) against the shot-noise
/// reference <n_s + n_i>. nrf < 1 certifies nonclassical correlations.
struct NrfReport {
    double v_diff = 0.0;
    double n_tot = 0.0;
    double nrf = 0.0;
    double nrf_db = 0.0;
};

NrfReport noise_reduction(const JointPnd& joint);

double mandel_q(const Pnd& pnd);

struct FitBounds {
    double r_lo = 0.0;
    double r_hi = 1.5;
    double n_th_lo = 0.0;
    double n_th_hi = 0.5;
};

struct GridConfig {
    std::size_t points_per_axis = 50;
    double refine_tol = 1e-4;
};

struct SourceModelFit {
    double r = 0.0;
    double n_th_s = 0.0;
    double n_th_i = 0.0;
    double fidelity = 0.0;
};

/// Best-fidelity (r, n_th_s, n_th_i) source-model match to a joint
/// distribution: coarse grid search then coordinate descent with step
/// halving. Deterministic: grid ties resolve to the lexicographically
/// smallest parameter triple.
SourceModelFit fit_source_model(const JointPnd& target, const FitBounds& bounds = {},
                                const GridConfig& grid = {});

struct PowerPoint {
    double power_mw = 0.0;
    double p11 = 0.0;
};

struct PowerFitBounds {
    double a_lo = 0.0;
    double a_hi = 1.0;
    double b_lo = 0.0;
    double b_hi = 0.5;
};

struct PowerScalingFit {
    double a = 0.0;
    double b_s = 0.0;
    double b_i = 0.0;
    double rss = 0.0;
};

/// Least-squares fit of the linear-slope source model to measured
/// coincidence-click probabilities versus pump power at fixed
/// efficiency. The two thermal slopes are interchangeable at equal arm
/// efficiencies, so only the sorted pair is identified.
PowerScalingFit fit_power_scaling(const std::vector<PowerPoint>& points, double eta,
                                  std::size_t trunc = 9,
                                  const PowerFitBounds& bounds = {},
                                  const GridConfig& grid = {});

/// Quadrature squeezing implied by a squeezing parameter, reported as
/// 20 r log10(e) decibels.
double squeezing_db(double r);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_err = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Fraction of cavity loss through the extraction port inferred from
/// loaded and intrinsic quality factors.
double escape_efficiency(double q_loaded, double q_intrinsic);

} // namespace pndkit
