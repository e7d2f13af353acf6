#pragma once

#include "tdcr/chain_geometry.hpp"
#include "tdcr/evaluation.hpp"
#include "tdcr/gait_planner.hpp"
#include "tdcr/statics_solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tdcr {

inline constexpr int kFormatVersion = 1;

// Contents of a robot description file. Friction and stretch are optional
// defaults for solves; unknown keys are kept so the caller can warn about them.
struct RobotDescription {
    RobotGeometry geometry;
    std::optional<double> mu;
    std::optional<double> stretch_compliance;
    std::vector<std::string> unknown_keys;
};

// Throws ParseError (syntax, with line and column; missing keys; wrong types),
// DimensionError (array sizes versus n, naming the tendon) or InvariantError.
RobotDescription parse_robot(const std::string& text);
RobotDescription load_robot(const std::filesystem::path& path);

std::string robot_to_json(const RobotGeometry& geom, std::optional<double> mu = std::nullopt,
                          std::optional<double> stretch_compliance = std::nullopt);
void write_robot(const std::filesystem::path& path, const RobotGeometry& geom, std::optional<double> mu = std::nullopt,
                 std::optional<double> stretch_compliance = std::nullopt);

// frame_index,x_m,y_m,z_m rows; with way points, an extra tendon column is -1
// for frame rows and the tendon index for way point rows (frame_index then
// counts way points of that tendon).
struct ShapeRecord {
    std::vector<Vec3> frames;
    std::vector<std::vector<Vec3>> tendon_waypoints;  // empty when not exported
};

ShapeRecord shape_record(const RobotGeometry& geom, const JointState& q, bool with_waypoints);
void write_shape_csv(const std::filesystem::path& path, const ShapeRecord& shape);
ShapeRecord read_shape_csv(const std::filesystem::path& path);

void write_ground_truth_csv(const std::filesystem::path& path, const GroundTruthShape& shape);
GroundTruthShape read_ground_truth_csv(const std::filesystem::path& path);

// step,tendon_0_m,...,tendon_{m-1}_m
void write_gait_csv(const std::filesystem::path& path, const GaitSequence& gait);
std::vector<std::vector<double>> read_gait_csv(const std::filesystem::path& path);

// {"format_version": 1, "displacements_m": [...]}
std::string command_to_json(const ActuationCommand& cmd);
ActuationCommand parse_command(const std::string& text);
void write_command(const std::filesystem::path& path, const ActuationCommand& cmd);
ActuationCommand load_command(const std::filesystem::path& path);

// Every NAME.cmd.json in dir paired with NAME.truth.csv, in name order. A
// command without its truth file is a DomainError naming the missing file.
// names, when given, receives NAME per sample.
std::vector<CalibrationSample> load_dataset(const std::filesystem::path& dir,
                                             std::vector<std::string>* names = nullptr);

std::string read_text_file(const std::filesystem::path& path);
std::string format_real(double v);  // 17 significant digits

}  // namespace tdcr
