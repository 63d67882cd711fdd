#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocgec/gae/gae.hpp"
#include "ocgec/occ/occ.hpp"
#include "ocgec/zoo/zoo.hpp"

namespace ocgec::harness {

struct DatasetConfig {
  /// "synthetic" or "idx". IDX reads a pool pair and an evaluation pair.
  std::string source = "synthetic";
  std::size_t num_classes = 10;
  std::size_t samples_per_class = 200;
  std::size_t eval_per_class = 30;
  zoo::ImageShape image{1, 16, 16};
  double noise = 0.2;
  std::filesystem::path idx_images, idx_labels, idx_eval_images, idx_eval_labels;
  /// Benign tiny models train on the first fraction of the shuffled pool, the
  /// attacker poisons the next one.
  double clean_fraction = 0.02;
  double attacker_fraction = 0.5;
};

struct ZooConfig {
  std::size_t train_benign = 256;
  std::size_t test_benign = 64;
  std::size_t test_backdoor = 64;
  /// Empty layer list means Architecture::standard for the dataset.
  zoo::Architecture architecture;
  zoo::HyperGrid benign_grid;
  zoo::HyperGrid backdoor_grid;
};

struct AttackConfig {
  /// Tags the backdoor model ids and their seed stream.
  std::string name = "modification";
  zoo::TriggerKind trigger = zoo::TriggerKind::patch;
  zoo::LabelMap label_map;
  double poison_rate = 0.1;
  std::size_t patch_size = 2;
  std::size_t patch_margin = 2;
  double alpha = 0.2;
  std::uint64_t pattern_seed = 7;

  zoo::TriggerSpec make_trigger(zoo::ImageShape shape) const;
};

struct GaeConfig {
  std::vector<std::size_t> encoder_widths{64, 32};
  std::vector<std::size_t> decoder_hidden{64};
  /// Seed and thread fields are filled in from the experiment.
  gae::PretrainConfig pretrain;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  /// 0 uses every hardware thread.
  unsigned threads = 0;
  std::filesystem::path output_dir = "ocgec-run";
  /// Write the .lgr graph of every model next to its .tmod.
  bool persist_graphs = true;
  DatasetConfig dataset;
  ZooConfig zoo;
  AttackConfig attack;
  GaeConfig gae;
  occ::OccConfig occ;
  /// "loss" (default) or "test-auc". The second early-stops hypersphere
  /// fitting on the AUC over the labelled test models, which leaks test
  /// labels into training; it exists only for comparison with numbers
  /// reported that way.
  std::string occ_stop_on = "loss";

  ExperimentConfig();

  unsigned worker_threads() const;
  zoo::Architecture architecture() const;
  /// Throws SpecError on any invalid field, including an empty test side.
  void validate() const;
};

/// Every field is optional; unknown keys are rejected with SpecError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Sets a dotted path ("occ.nu", "zoo.train_benign") to a JSON value given as
/// text; bare words that are not valid JSON are taken as strings.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace ocgec::harness
