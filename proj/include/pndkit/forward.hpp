#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pndkit/pnd.hpp"
#include "pndkit/util.hpp"

namespace pndkit {

/// Ordered set of overall detection efficiencies (one per attenuation
/// setting). Invariant: every entry lies in (0, 1] and there are at
/// least two settings.
class EfficiencyLadder {
public:
    explicit EfficiencyLadder(std::vector<double> etas);

    std::size_t size() const { return etas_.size(); }
    double operator[](std::size_t i) const { return etas_[i]; }
    const std::vector<double>& etas() const { return etas_; }

    /// `count` equally spaced transmissions from lo to hi inclusive.
    static EfficiencyLadder uniform(double lo, double hi, std::size_t count);

    /// Every entry multiplied by `factor` (e.g. a fixed setup efficiency
    /// in front of a variable attenuator).
    EfficiencyLadder scaled(double factor) const;

private:
    std::vector<double> etas_;
};

/// One attenuation setting of a two-detector on/off measurement:
/// counts of (no,no), (no,yes), (yes,no), (yes,yes) click outcomes
/// over `trials` pulses. Outcome order is (signal, idler).
struct ClickRow {
    double eta = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t c00 = 0;
    std::uint64_t c01 = 0;
    std::uint64_t c10 = 0;
    std::uint64_t c11 = 0;
};

struct ClickTable {
    std::vector<ClickRow> rows;

    /// Throws std::invalid_argument unless every row has trials >= 1,
    /// counts summing to trials, and eta in (0, 1].
    void validate() const;
};

struct ClickProbs {
    double p00 = 0.0;
    double p01 = 0.0;
    double p10 = 0.0;
    double p11 = 0.0;
};

/// No-click probability of one on/off detector with efficiency eta:
/// sum_n (1-eta)^n p_n.
double p_off(const Pnd& pnd, double eta);

/// Joint click outcome probabilities for a two-arm state with per-arm
/// efficiencies (eta_s, eta_i).
ClickProbs click_probs_joint(const JointPnd& joint, double eta_s, double eta_i);
inline ClickProbs click_probs_joint(const JointPnd& joint, double eta) {
    return click_probs_joint(joint, eta, eta);
}

/// M x (trunc+1) matrix with entries (1 - eta_mu)^n.
Matrix b_matrix_single(const std::vector<double>& etas, std::size_t trunc);

/// 3M x (trunc+1)^2 matrix mapping a flattened joint distribution to the
/// stacked outcome probabilities (p00 rows, then p01, then p10; p11 is
/// the complement and carries no independent information).
Matrix b_matrix_joint(const std::vector<double>& etas, std::size_t trunc);

/// Simulate an on/off click experiment: for each ladder setting, draw a
/// multinomial sample of `trials` pulses from the exact click
/// probabilities. Deterministic in (seed); rows use independent streams.
ClickTable sample_click_table(const JointPnd& joint, const EfficiencyLadder& ladder,
                              std::uint64_t trials, std::uint64_t seed);

/// Per-setting no-click frequency of one arm: (c00+c01)/trials for the
/// signal, (c00+c10)/trials for the idler.
std::vector<std::pair<double, double>> off_frequencies(const ClickTable& table, Arm arm);

} // namespace pndkit
