#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocgec/zoo/model_io.hpp"
#include "ocgec/zoo/training.hpp"
#include "ocgec/zoo/trigger.hpp"

namespace ocgec::zoo {

/// Cartesian grid of training hyperparameters, assigned round-robin: model i
/// gets combination i mod (|inits|·|lrs|·|epochs|), inits varying fastest.
struct HyperGrid {
  std::vector<InitScheme> inits = {InitScheme::uniform_fan_in, InitScheme::normal_002, InitScheme::orthogonal};
  std::vector<double> lrs = {1e-3, 3e-3};
  std::vector<std::size_t> epochs = {10};
  std::size_t batch_size = 16;

  std::size_t combinations() const noexcept { return inits.size() * lrs.size() * epochs.size(); }
  TrainHyperParams at(std::size_t index) const;
  void validate() const;
};

struct ZooSpec {
  std::string id_prefix = "model";
  std::size_t benign_count = 0;
  std::size_t backdoor_count = 0;
  /// Backdoor model j uses triggers[j mod triggers.size()].
  std::vector<TriggerSpec> triggers;
  HyperGrid benign_grid;
  HyperGrid backdoor_grid;
  Architecture arch;
  /// Model i (benign first, then backdoor) trains with seed base_seed + i.
  std::uint64_t base_seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct ZooData {
  Dataset clean_small;  // benign training split
  Dataset attacker;     // clean split the attacker poisons
  Dataset eval;         // held-out clean evaluation set
};

struct ZooRecord {
  std::string id;
  std::uint64_t seed = 0;
  ModelRole role = ModelRole::benign;
  TrainHyperParams hp;
  std::optional<TriggerSpec> trigger;
  double clean_accuracy = 0.0;
  std::optional<double> attack_success_rate;
  std::string file;  // relative to the manifest directory
};

using ZooManifest = std::vector<ZooRecord>;

nlohmann::json to_json(const ZooRecord& record);
ZooRecord zoo_record_from_json(const nlohmann::json& j);

/// One JSON object per line.
void write_manifest(const std::filesystem::path& path, const ZooManifest& manifest);
ZooManifest read_manifest(const std::filesystem::path& path);

struct TrainedModel {
  ZooRecord record;
  TinyModel model;
};

/// Trains every model the ZooSpec describes, in memory (no files are written).
std::vector<TrainedModel> train_zoo(const ZooSpec& spec, const ZooData& data);

/// Trains the zoo, writes `<id>.tmod` files and `manifest.jsonl` into out_dir.
/// On an I/O failure the files written so far and the manifest are removed
/// before the IoError propagates.
std::vector<TrainedModel> generate_zoo(const ZooSpec& spec, const ZooData& data,
                                       const std::filesystem::path& out_dir);

}  // namespace ocgec::zoo
