#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "pndkit/dynamics.hpp"
#include "pndkit/em.hpp"
#include "pndkit/forward.hpp"
#include "pndkit/metrics.hpp"
#include "pndkit/pnd.hpp"

namespace pndkit::io {

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; keeps rewrites bit-identical.
std::string format_double(double x);

void write_click_table(const std::filesystem::path& path, const ClickTable& table);
ClickTable read_click_table(const std::filesystem::path& path);

void write_pnd(const std::filesystem::path& path, const Pnd& pnd);
Pnd read_pnd(const std::filesystem::path& path);

void write_joint_pnd(const std::filesystem::path& path, const JointPnd& pnd);
JointPnd read_joint_pnd(const std::filesystem::path& path);

void write_trajectories(const std::filesystem::path& path, const TrajectoryRecord& record);
TrajectoryRecord read_trajectories(const std::filesystem::path& path);

json diagnostics_json(const EmDiagnostics& diag, const EmConfig& config);

/// Metric block with the reconstruction-facing scalar summaries.
json metrics_json(const JointPnd& pnd, const SourceModelFit& fit);

json params_json(const ResonatorParams& res, const PulseParams& pulse);
void parse_params(const json& j, ResonatorParams& res, PulseParams& pulse);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

} // namespace pndkit::io
