#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ocgec/zoo/tiny_model.hpp"

namespace ocgec::zoo {

enum class ModelRole { benign, backdoor };

const char* to_string(ModelRole role);
ModelRole model_role_from_string(const std::string& s);

struct StoredModel {
  std::string id;
  std::uint64_t seed = 0;
  ModelRole role = ModelRole::benign;
  TinyModel model;
};

/// `.tmod`: JSON header (format, id, seed, role, architecture, parameter
/// shapes) followed by every weight and bias tensor, row-major, in layer order.
void save_model(const std::filesystem::path& path, const StoredModel& stored);
StoredModel load_model(const std::filesystem::path& path);

}  // namespace ocgec::zoo
