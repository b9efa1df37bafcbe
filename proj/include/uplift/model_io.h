#ifndef UPLIFT_MODEL_IO_H_
#define UPLIFT_MODEL_IO_H_

// JSON forms of specs and trained models. Doubles are written with
// round-trip precision, so save/load reproduces parameters bit for bit.

#include <filesystem>

#include "json.hpp"

#include "uplift/datagen.h"
#include "uplift/model.h"

namespace uplift {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json spec_to_json(const ModelSpec& spec);
// Missing fields keep their defaults. Throws ConfigError on bad values.
ModelSpec spec_from_json(const nlohmann::json& j);

nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const UpliftModel& model);
UpliftModel model_from_json(const nlohmann::json& j);

void save_model(const UpliftModel& model, const std::filesystem::path& path);
UpliftModel load_model(const std::filesystem::path& path);

// Reads a whole JSON file; IoError / ParseError on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
// Writes `j` pretty-printed with a trailing newline.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace uplift

#endif  // UPLIFT_MODEL_IO_H_
