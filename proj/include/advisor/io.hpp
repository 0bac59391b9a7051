#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "advisor/driver.hpp"
#include "advisor/scenario.hpp"

namespace advisor {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Parse failures and missing files raise InputError.
[[nodiscard]] json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

[[nodiscard]] ordered_json to_json(const GeneralizedSteeringParams& p);
[[nodiscard]] GeneralizedSteeringParams steering_params_from_json(const json& j);

// {"model", "orders", "coefficients", "rmse", "r2"[, "gains"]}
[[nodiscard]] ordered_json to_json(const FitReport& rep);
[[nodiscard]] FitReport fit_report_from_json(const json& j);

[[nodiscard]] ordered_json to_json(const ScenarioConfig& cfg);
// Missing fields take their defaults; wrong types raise InputError.
[[nodiscard]] ScenarioConfig scenario_from_json(const json& j);

[[nodiscard]] ordered_json to_json(const TrajectoryRow& row);
[[nodiscard]] TrajectoryRow trajectory_row_from_json(const json& j);
[[nodiscard]] ordered_json to_json(const EstimationRow& row);
[[nodiscard]] EstimationRow estimation_row_from_json(const json& j);

// JSON Lines, one object per sample.
void write_trajectory_log(const std::filesystem::path& path, const TrajectoryLog& log);
[[nodiscard]] TrajectoryLog read_trajectory_log(const std::filesystem::path& path);
void write_estimation_log(const std::filesystem::path& path, const EstimationLog& log);
[[nodiscard]] EstimationLog read_estimation_log(const std::filesystem::path& path);

[[nodiscard]] std::string jacobian_mode_name(JacobianMode mode);
[[nodiscard]] JacobianMode parse_jacobian_mode(const std::string& name);

}  // namespace advisor
