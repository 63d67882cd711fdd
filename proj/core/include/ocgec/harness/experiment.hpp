#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ocgec/error.hpp"
#include "ocgec/harness/config.hpp"

namespace ocgec::harness {

/// Mann–Whitney AUC with backdoor as the positive class: the fraction of
/// (backdoor, benign) pairs where the backdoor score is higher, ties counting
/// one half. Throws SpecError when either side is empty.
double auc(std::span<const double> backdoor_scores, std::span<const double> benign_scores);

/// A failure inside one pipeline stage. what() names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct ScoreRow {
  std::string id;
  zoo::ModelRole role = zoo::ModelRole::benign;
  double distance_sq = 0.0;
  double score = 0.0;
  bool backdoor = false;  // verdict
  std::string file;       // .tmod, relative to the report directory
};

struct ZooStats {
  double train_benign_accuracy = 0.0;  // means over the models of each group
  double test_benign_accuracy = 0.0;
  double backdoor_accuracy = 0.0;
  double backdoor_asr = 0.0;
};

struct RunReport {
  double auc = 0.0;
  std::vector<ScoreRow> scores;  // test benign models first, then backdoor
  ZooStats zoo;
  std::vector<std::string> train_ids;
  std::string sphere_file;  // .occ, relative to the report directory
  double radius_sq = 0.0;
  bool center_near_origin = false;
  std::vector<double> pretrain_loss;
  occ::OccTrace occ_trace;
  /// Wall-clock seconds per stage; the only non-deterministic field.
  std::map<std::string, double> timing;
  nlohmann::json config;
};

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);
RunReport load_report(const std::filesystem::path& path);

/// `id,score,verdict` rows followed by an `auc,<value>` line. Numbers are
/// printed with 17 significant digits.
std::string summary_csv(const RunReport& report);
std::string format_number(double v);

/// Throws SpecError if any test model id also names a training model.
void check_disjoint(const RunReport& report);

// Staged pipeline. run_experiment strings these together; callers that want
// to reuse a trained detector against several attacks call them directly.

/// Dataset pool split into the benign and attacker portions plus a held-out
/// evaluation set.
zoo::ZooData prepare_data(const ExperimentConfig& cfg);

struct TestModels {
  std::vector<zoo::ZooRecord> records;
  std::vector<gae::GraphInput> graphs;
  std::string directory;
};

struct Detector {
  occ::OccModel model;
  std::vector<double> pretrain_loss;
  std::vector<std::string> train_ids;
  double train_accuracy = 0.0;
  std::string sphere_file;
  std::map<std::string, double> timing;
};

/// Trains the benign zoo, converts it, pre-trains the auto-encoder and fits
/// the hypersphere. Artifacts go to run_dir/{zoo/train, graphs/train, gae, occ}.
/// A monitor, when given, drives early stopping of the hypersphere fit.
Detector train_detector(const ExperimentConfig& cfg, const zoo::ZooData& data, const std::filesystem::path& run_dir,
                        const occ::EpochMonitor& monitor = {});

/// Epoch monitor returning the AUC of the current model on both test sets.
occ::EpochMonitor test_auc_monitor(const TestModels& benign, const TestModels& backdoor);

/// Held-out benign models, written under run_dir/zoo/test-benign.
TestModels build_benign_test(const ExperimentConfig& cfg, const zoo::ZooData& data,
                             const std::filesystem::path& run_dir);
/// Backdoor models for cfg.attack, written under run_dir/zoo/test-<attack name>.
TestModels build_backdoor_test(const ExperimentConfig& cfg, const zoo::ZooData& data,
                               const std::filesystem::path& run_dir);

/// Scores both test sets, writes report.json and summary.csv into report_dir.
RunReport evaluate(const ExperimentConfig& cfg, const Detector& detector, const TestModels& benign,
                   const TestModels& backdoor, const std::filesystem::path& report_dir);

/// Validates the config, then runs every stage into cfg.output_dir.
RunReport run_experiment(const ExperimentConfig& cfg);

/// Reloads the sphere and the test models named in a report.json and
/// recomputes every score row.
std::vector<ScoreRow> rescore(const std::filesystem::path& report_path);

enum class SweepAxis { model_count, encoder_widths, learning_rate };

SweepAxis sweep_axis_from_string(const std::string& s);
const char* to_string(SweepAxis axis);

struct SweepPoint {
  std::string value;
  std::optional<RunReport> report;
  std::string error;  // set when this run failed
};

/// One detector per value against a single shared test set. Values are
/// model counts ("256"), widths ("64x32") or learning rates ("1e-3"); the
/// learning rate applies to both pre-training and hypersphere fitting.
/// Writes sweep.csv (value,auc,status) into cfg.output_dir. A failing value
/// is recorded and the sweep moves on.
std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepAxis axis, std::span<const std::string> values);

/// Applies one sweep value to a copy of the config.
ExperimentConfig with_axis_value(const ExperimentConfig& cfg, SweepAxis axis, const std::string& value);

}  // namespace ocgec::harness
