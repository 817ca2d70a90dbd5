#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "paydiff/arm_model.hpp"

namespace paydiff {

/// JSON form of a model. Transforms are written as {"xyz": [..], "rotation": 3x3}
/// so round trips are exact; the reader also accepts "rpy" (fixed-axis roll,
/// pitch, yaw). Inertia tensors are 3x3 row arrays.
nlohmann::json model_to_json(const RobotModel& model);

/// Parses and validates a model. Errors carry the offending field path,
/// e.g. "joints[2].axis: not unit norm".
RobotModel model_from_json(const nlohmann::json& j);

RobotModel load_model(const std::filesystem::path& path);
void save_model(const RobotModel& model, const std::filesystem::path& path);

/// Resolves a preset name or a JSON file path.
RobotModel resolve_model(const std::string& preset_or_path);

}  // namespace paydiff
