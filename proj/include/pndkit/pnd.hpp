#pragma once

#include <cstddef>
#include <vector>

#include "pndkit/util.hpp"

namespace pndkit {

/// Photon-number distribution over Fock levels 0..trunc.
/// Invariant: entries are non-negative and sum to 1 (renormalized on
/// construction; inputs must be non-negative with positive total mass).
class Pnd {
public:
    explicit Pnd(std::vector<double> weights);

    std::size_t trunc() const { return probs_.size() - 1; }
    std::size_t dim() const { return probs_.size(); }
    double operator[](std::size_t n) const { return probs_[n]; }
    const std::vector<double>& probs() const { return probs_; }

    double mean() const;
    double variance() const;

    /// Point mass at Fock level `at` on levels 0..trunc.
    static Pnd delta(std::size_t trunc, std::size_t at = 0);

private:
    std::vector<double> probs_;
};

/// Joint photon-number distribution over (n_s, n_i), 0..trunc each arm,
/// stored row-major with the signal index major. Same normalization
/// invariant as Pnd.
class JointPnd {
public:
    JointPnd(std::size_t trunc, std::vector<double> weights);

    std::size_t trunc() const { return trunc_; }
    std::size_t dim() const { return trunc_ + 1; }
    double at(std::size_t n_s, std::size_t n_i) const {
        return probs_[n_s * (trunc_ + 1) + n_i];
    }
    const std::vector<double>& probs() const { return probs_; }

    static JointPnd delta(std::size_t trunc, std::size_t n_s = 0, std::size_t n_i = 0);
    static JointPnd product(const Pnd& signal, const Pnd& idler);

private:
    std::size_t trunc_;
    std::vector<double> probs_;
};

/// Thermal state, p_n = mean^n / (1+mean)^{n+1}, renormalized on 0..trunc.
Pnd thermal_pnd(double mean, std::size_t trunc);

/// Coherent state, Poissonian p_n = e^{-mean} mean^n / n!, renormalized.
Pnd coherent_pnd(double mean, std::size_t trunc);

/// Two-mode squeezed vacuum: diagonal joint distribution
/// p_{nn} = tanh^{2n}(r) / cosh^2(r), renormalized on the truncated grid.
JointPnd tms_joint_pnd(double r, std::size_t trunc);

/// Convolve each arm of `base` with an independent thermal background
/// (means n_th_s, n_th_i). Thermal factors are truncated to the output
/// dimension and renormalized before convolving.
JointPnd convolve_with_thermal(const JointPnd& base, double n_th_s, double n_th_i);

/// Binomial loss channel applied to one arm: each photon survives
/// independently with probability eta.
Pnd apply_loss(const Pnd& input, double eta);

/// Independent binomial loss on both arms.
JointPnd apply_loss_joint(const JointPnd& input, double eta_s, double eta_i);

Pnd marginal(const JointPnd& joint, Arm arm);

/// Phenomenological source model: two-mode squeezing r with independent
/// thermal backgrounds on each arm, all scaling linearly with pump power
/// (r = a P, n_th = b P).
struct SourceModelParams {
    double r = 0.0;
    double n_th_s = 0.0;
    double n_th_i = 0.0;
    double a = 0.0;   // squeezing slope, 1/mW
    double b_s = 0.0; // signal thermal slope, 1/mW
    double b_i = 0.0; // idler thermal slope, 1/mW

    static SourceModelParams device_defaults();
    SourceModelParams at_power(double power_mw) const;
};

JointPnd source_model_state(const SourceModelParams& params, std::size_t trunc);

} // namespace pndkit
