#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "pndkit/forward.hpp"
#include "pndkit/pnd.hpp"

namespace pndkit {

struct EmConfig {
    std::size_t trunc = 9;
    double rel_tol = 1e-3;
    std::size_t max_iters = 100000;
    /// Multiplies every supplied efficiency before reconstruction; moving
    /// the reconstruction plane past a transmissive segment divides it.
    double plane_scale = 1.0;
};

struct EmDiagnostics {
    std::size_t iterations = 0;
    std::vector<double> epsilon_history;
    double final_epsilon = 0.0;
    bool converged = false;
    /// True when the reconstructed state keeps more than ~1% of its mass
    /// above Fock level 5, where few-setting on/off data constrains poorly.
    bool mass_outside_reliable_window = false;
};

struct EmResultSingle {
    Pnd pnd;
    EmDiagnostics diagnostics;
};

struct EmResultJoint {
    JointPnd pnd;
    EmDiagnostics diagnostics;
};

/// Mean absolute deviation between measured frequencies and model
/// probabilities, (1/M) sum |f - p|.
double error_metric(const std::vector<double>& frequencies,
                    const std::vector<double>& model_probs);

/// Reconstruct a single-mode distribution from (eta, no-click frequency)
/// pairs by expectation-maximization from a flat ansatz.
EmResultSingle em_single(const std::vector<std::pair<double, double>>& data,
                         const EmConfig& config = {});

/// Joint reconstruction from the three informative outcome frequencies
/// (f00, f01, f10) per attenuation setting.
EmResultJoint em_joint_frequencies(const std::vector<double>& etas,
                                   const std::vector<double>& f00,
                                   const std::vector<double>& f01,
                                   const std::vector<double>& f10,
                                   const EmConfig& config = {});

EmResultJoint em_joint(const ClickTable& table, const EmConfig& config = {});

/// Move the reconstruction plane downstream past a segment of
/// transmission eta_seg (the reported state then excludes that loss).
/// Efficiencies that would exceed 1 at the new plane are rejected when a
/// ladder is supplied, and always when the adjusted config is used.
EmConfig rescale_plane(const EmConfig& config, double eta_seg,
                       const std::optional<EfficiencyLadder>& ladder = std::nullopt);

} // namespace pndkit
