#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shrinkerlab/curvegeo.hpp"
#include "shrinkerlab/flowcore.hpp"

namespace shrinkerlab {

/// 17 significant digits ("%.17g"); round-trips every double.
std::string format_double(double v);

/// Writes `content` verbatim, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);

/// Header `x,y`, one row per node, no closing duplicate.
std::string curve_csv(const DiscreteCurve& curve);
/// Parses curve CSV text and validates it as a DiscreteCurve. Throws
/// InvalidCurve on malformed rows.
DiscreteCurve parse_curve_csv(const std::string& text);
DiscreteCurve read_curve(const std::filesystem::path& path);

/// {picture, times, m, singularData}
nlohmann::json trajectory_index(const FlowTrajectory& traj);

/// `<dir>/<stem>_NNNNN.csv` per frame and `<dir>/<stem>.json` for the index.
/// Returns the written paths in order.
std::vector<std::filesystem::path> write_trajectory(const std::filesystem::path& dir, const std::string& stem,
                                                    const FlowTrajectory& traj);

}  // namespace shrinkerlab
