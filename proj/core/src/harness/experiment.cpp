#include "ocgec/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ocgec/graph/layered_graph.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/parallel.hpp"
#include "ocgec/rng.hpp"

namespace ocgec::harness {

namespace fs = std::filesystem;
using nlohmann::json;

double auc(std::span<const double> backdoor_scores, std::span<const double> benign_scores) {
  if (backdoor_scores.empty() || benign_scores.empty()) {
    throw SpecError("AUC needs at least one backdoor and one benign score");
  }
  std::vector<double> benign(benign_scores.begin(), benign_scores.end());
  std::sort(benign.begin(), benign.end());
  // Twice the Mann–Whitney count keeps the tie halves in integers.
  std::uint64_t doubled = 0;
  for (double s : backdoor_scores) {
    const auto lo = std::lower_bound(benign.begin(), benign.end(), s);
    const auto hi = std::upper_bound(lo, benign.end(), s);
    doubled += 2 * static_cast<std::uint64_t>(lo - benign.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(doubled) /
         (2.0 * static_cast<double>(backdoor_scores.size()) * static_cast<double>(benign.size()));
}

StageError::StageError(std::string stage, const std::string& message)
    : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}

namespace {

template <class Fn>
auto run_stage(const std::string& name, std::map<std::string, double>& timing, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  const auto record = [&] {
    timing[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto result = fn();
      record();
      return result;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

fs::path relative_to(const fs::path& target, const fs::path& base) {
  return fs::absolute(target).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
}

std::vector<gae::GraphInput> convert_models(const ExperimentConfig& cfg, const std::vector<zoo::TrainedModel>& models,
                                            const fs::path& graph_dir) {
  std::vector<gae::GraphInput> graphs(models.size());
  parallel_for(models.size(), cfg.worker_threads(), [&](std::size_t i) {
    const graph::LayeredGraph g = graph::to_graph(models[i].model, models[i].record.id);
    if (cfg.persist_graphs) graph::save_graph(graph_dir / (models[i].record.id + ".lgr"), g);
    graphs[i] = gae::GraphInput::from(g);
  });
  return graphs;
}

TestModels build_test(const ExperimentConfig& cfg, const zoo::ZooData& data, const fs::path& run_dir,
                      const zoo::ZooSpec& spec, const std::string& name) {
  TestModels out;
  out.directory = (run_dir / "zoo" / name).string();
  const auto models = zoo::generate_zoo(spec, data, out.directory);
  out.graphs = convert_models(cfg, models, run_dir / "graphs" / name);
  for (const auto& m : models) out.records.push_back(m.record);
  return out;
}

zoo::ZooSpec base_spec(const ExperimentConfig& cfg, const std::string& prefix, const std::string& stream) {
  zoo::ZooSpec spec;
  spec.id_prefix = prefix;
  spec.arch = cfg.architecture();
  spec.benign_grid = cfg.zoo.benign_grid;
  spec.backdoor_grid = cfg.zoo.backdoor_grid;
  spec.base_seed = derive_seed(cfg.seed, stream);
  spec.threads = cfg.worker_threads();
  return spec;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
  }
  return s;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json to_json(const RunReport& r) {
  json rows = json::array();
  for (const ScoreRow& s : r.scores) {
    rows.push_back({{"id", s.id},
                    {"role", zoo::to_string(s.role)},
                    {"distance_sq", s.distance_sq},
                    {"score", s.score},
                    {"verdict", s.backdoor ? "backdoor" : "benign"},
                    {"file", s.file}});
  }
  return {{"auc", r.auc},
          {"scores", rows},
          {"zoo",
           {{"train_benign_accuracy", r.zoo.train_benign_accuracy},
            {"test_benign_accuracy", r.zoo.test_benign_accuracy},
            {"backdoor_accuracy", r.zoo.backdoor_accuracy},
            {"backdoor_asr", r.zoo.backdoor_asr}}},
          {"train_ids", r.train_ids},
          {"sphere", {{"file", r.sphere_file}, {"radius_sq", r.radius_sq}, {"center_near_origin", r.center_near_origin}}},
          {"traces",
           {{"pretrain_loss", r.pretrain_loss},
            {"occ_loss", r.occ_trace.loss},
            {"occ_radius_sq", r.occ_trace.radius_sq},
            {"occ_coverage", r.occ_trace.coverage}}},
          {"timing", r.timing},
          {"config", r.config}};
}

RunReport run_report_from_json(const json& j) {
  try {
    RunReport r;
    r.auc = j.at("auc").get<double>();
    for (const json& s : j.at("scores")) {
      ScoreRow row;
      row.id = s.at("id").get<std::string>();
      row.role = zoo::model_role_from_string(s.at("role").get<std::string>());
      row.distance_sq = s.at("distance_sq").get<double>();
      row.score = s.at("score").get<double>();
      row.backdoor = s.at("verdict").get<std::string>() == "backdoor";
      row.file = s.at("file").get<std::string>();
      r.scores.push_back(std::move(row));
    }
    const json& z = j.at("zoo");
    r.zoo = {z.at("train_benign_accuracy").get<double>(), z.at("test_benign_accuracy").get<double>(),
             z.at("backdoor_accuracy").get<double>(), z.at("backdoor_asr").get<double>()};
    r.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    const json& sp = j.at("sphere");
    r.sphere_file = sp.at("file").get<std::string>();
    r.radius_sq = sp.at("radius_sq").get<double>();
    r.center_near_origin = sp.at("center_near_origin").get<bool>();
    const json& t = j.at("traces");
    r.pretrain_loss = t.at("pretrain_loss").get<std::vector<double>>();
    r.occ_trace.loss = t.at("occ_loss").get<std::vector<double>>();
    r.occ_trace.radius_sq = t.at("occ_radius_sq").get<std::vector<double>>();
    r.occ_trace.coverage = t.at("occ_coverage").get<std::vector<double>>();
    r.timing = j.at("timing").get<std::map<std::string, double>>();
    r.config = j.at("config");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed run report: ") + e.what());
  } catch (const SpecError& e) {
    throw FormatError(std::string("malformed run report: ") + e.what());
  }
}

RunReport load_report(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError("malformed run report " + path.string() + ": " + e.what());
  }
  return run_report_from_json(j);
}

std::string summary_csv(const RunReport& report) {
  std::string out = "id,score,verdict\n";
  for (const ScoreRow& s : report.scores) {
    out += s.id + "," + format_number(s.score) + "," + (s.backdoor ? "backdoor" : "benign") + "\n";
  }
  out += "auc," + format_number(report.auc) + "\n";
  return out;
}

void check_disjoint(const RunReport& report) {
  std::vector<std::string> train = report.train_ids;
  std::sort(train.begin(), train.end());
  for (const ScoreRow& s : report.scores) {
    if (std::binary_search(train.begin(), train.end(), s.id)) {
      throw SpecError("test model '" + s.id + "' is also a training model");
    }
  }
}

zoo::ZooData prepare_data(const ExperimentConfig& cfg) {
  const DatasetConfig& ds = cfg.dataset;
  zoo::Dataset pool, eval;
  if (ds.source == "idx") {
    pool = zoo::read_idx_dataset(ds.idx_images, ds.idx_labels);
    eval = zoo::read_idx_dataset(ds.idx_eval_images, ds.idx_eval_labels, pool.num_classes);
    if (pool.image_shape != cfg.architecture().input) {
      throw SpecError("idx images do not match the tiny-model input shape");
    }
  } else {
    pool = zoo::make_synthetic_dataset(ds.num_classes, ds.samples_per_class, ds.image,
                                       derive_seed(cfg.seed, "dataset"), ds.noise);
    eval = zoo::make_synthetic_dataset(ds.num_classes, ds.eval_per_class, ds.image,
                                       derive_seed(cfg.seed, "eval-dataset"), ds.noise);
  }
  zoo::DataSplits splits =
      zoo::split_pool(pool, ds.clean_fraction, ds.attacker_fraction, derive_seed(cfg.seed, "split"));
  if (splits.clean_small.empty() || splits.attacker.empty()) {
    throw SpecError("dataset fractions leave an empty benign or attacker split");
  }
  return {std::move(splits.clean_small), std::move(splits.attacker), std::move(eval)};
}

occ::EpochMonitor test_auc_monitor(const TestModels& benign, const TestModels& backdoor) {
  return [&benign, &backdoor](const occ::OccModel& model) {
    std::vector<double> bn, bd;
    for (const auto& g : benign.graphs) bn.push_back(occ::detect(g, model).score);
    for (const auto& g : backdoor.graphs) bd.push_back(occ::detect(g, model).score);
    return auc(bd, bn);
  };
}

Detector train_detector(const ExperimentConfig& cfg, const zoo::ZooData& data, const fs::path& run_dir,
                        const occ::EpochMonitor& monitor) {
  Detector det;
  const unsigned threads = cfg.worker_threads();

  const auto models = run_stage("zoo-train", det.timing, [&] {
    zoo::ZooSpec spec = base_spec(cfg, "train-benign", "zoo-train");
    spec.benign_count = cfg.zoo.train_benign;
    return zoo::generate_zoo(spec, data, run_dir / "zoo" / "train");
  });
  std::vector<double> acc;
  for (const auto& m : models) {
    det.train_ids.push_back(m.record.id);
    acc.push_back(m.record.clean_accuracy);
  }
  det.train_accuracy = mean_of(acc);

  const auto graphs =
      run_stage("convert", det.timing, [&] { return convert_models(cfg, models, run_dir / "graphs" / "train"); });

  const gae::PretrainResult pre = run_stage("pretrain", det.timing, [&] {
    const std::size_t d = graphs.front().features.dim(1);
    gae::GaeParams init = gae::GaeParams::init(d, cfg.gae.encoder_widths, cfg.gae.decoder_hidden,
                                               derive_seed(cfg.seed, "gae-init"));
    gae::PretrainConfig pc = cfg.gae.pretrain;
    pc.seed = derive_seed(cfg.seed, "gae");
    pc.threads = threads;
    gae::PretrainResult r = gae::pretrain(graphs, std::move(init), pc);
    gae::save_gae(run_dir / "gae" / "pretrained.gae", r.params, pc);
    return r;
  });
  det.pretrain_loss = pre.loss_trace;

  det.model = run_stage("occ", det.timing, [&] {
    occ::OccConfig oc = cfg.occ;
    oc.seed = derive_seed(cfg.seed, "occ");
    oc.threads = threads;
    occ::OccModel m = occ::train_occ(graphs, pre.params.encoder, oc, monitor);
    gae::GaeParams tuned = pre.params;
    tuned.encoder = m.encoder;
    gae::PretrainConfig pc = cfg.gae.pretrain;
    pc.seed = derive_seed(cfg.seed, "gae");
    gae::save_gae(run_dir / "occ" / "tuned.gae", tuned, pc);
    occ::save_occ(run_dir / "occ" / "sphere.occ", m, "tuned.gae");
    return m;
  });
  det.sphere_file = (run_dir / "occ" / "sphere.occ").string();
  return det;
}

TestModels build_benign_test(const ExperimentConfig& cfg, const zoo::ZooData& data, const fs::path& run_dir) {
  zoo::ZooSpec spec = base_spec(cfg, "test-benign", "zoo-test-benign");
  spec.benign_count = cfg.zoo.test_benign;
  return build_test(cfg, data, run_dir, spec, "test-benign");
}

TestModels build_backdoor_test(const ExperimentConfig& cfg, const zoo::ZooData& data, const fs::path& run_dir) {
  const std::string name = "test-" + cfg.attack.name;
  zoo::ZooSpec spec = base_spec(cfg, name, "zoo-" + name);
  spec.backdoor_count = cfg.zoo.test_backdoor;
  spec.triggers = {cfg.attack.make_trigger(data.attacker.image_shape)};
  return build_test(cfg, data, run_dir, spec, name);
}

RunReport evaluate(const ExperimentConfig& cfg, const Detector& detector, const TestModels& benign,
                   const TestModels& backdoor, const fs::path& report_dir) {
  RunReport report;
  report.timing = detector.timing;
  run_stage("detect", report.timing, [&] {
    std::vector<double> bd_scores, bn_scores, bn_acc, bd_acc, bd_asr;
    for (const TestModels* set : {&benign, &backdoor}) {
      for (std::size_t i = 0; i < set->records.size(); ++i) {
        const zoo::ZooRecord& rec = set->records[i];
        const occ::Detection d = occ::detect(set->graphs[i], detector.model, rec.id);
        ScoreRow row{rec.id, rec.role, d.distance_sq, d.score, d.backdoor,
                     relative_to(fs::path(set->directory) / rec.file, report_dir).generic_string()};
        if (rec.role == zoo::ModelRole::backdoor) {
          bd_scores.push_back(d.score);
          bd_acc.push_back(rec.clean_accuracy);
          bd_asr.push_back(rec.attack_success_rate.value_or(0.0));
        } else {
          bn_scores.push_back(d.score);
          bn_acc.push_back(rec.clean_accuracy);
        }
        report.scores.push_back(std::move(row));
      }
    }
    report.auc = auc(bd_scores, bn_scores);
    report.zoo = {detector.train_accuracy, mean_of(bn_acc), mean_of(bd_acc), mean_of(bd_asr)};
  });
  report.train_ids = detector.train_ids;
  report.sphere_file = relative_to(detector.sphere_file, report_dir).generic_string();
  report.radius_sq = detector.model.sphere.radius_sq;
  report.center_near_origin = detector.model.center_near_origin;
  report.pretrain_loss = detector.pretrain_loss;
  report.occ_trace = detector.model.trace;
  report.config = to_json(cfg);
  check_disjoint(report);
  run_stage("report", report.timing, [&] {
    io::write_text_file(report_dir / "summary.csv", summary_csv(report));
    io::write_text_file(report_dir / "report.json", to_json(report).dump(2) + "\n");
  });
  return report;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  std::map<std::string, double> timing;
  run_stage("setup", timing, [&] { io::write_text_file(dir / "config.json", to_json(cfg).dump(2) + "\n"); });
  const zoo::ZooData data = run_stage("data", timing, [&] { return prepare_data(cfg); });
  const TestModels benign = run_stage("zoo-test", timing, [&] { return build_benign_test(cfg, data, dir); });
  const TestModels backdoor = run_stage("zoo-test", timing, [&] { return build_backdoor_test(cfg, data, dir); });
  occ::EpochMonitor monitor;
  if (cfg.occ_stop_on == "test-auc") monitor = test_auc_monitor(benign, backdoor);
  Detector detector = train_detector(cfg, data, dir, monitor);
  for (const auto& [k, v] : timing) detector.timing[k] += v;
  return evaluate(cfg, detector, benign, backdoor, dir);
}

std::vector<ScoreRow> rescore(const fs::path& report_path) {
  const RunReport report = load_report(report_path);
  const fs::path base = report_path.parent_path();
  const occ::OccModel model = occ::load_occ(base / report.sphere_file);
  std::vector<ScoreRow> rows;
  for (const ScoreRow& s : report.scores) {
    const zoo::StoredModel stored = zoo::load_model(base / s.file);
    const occ::Detection d = occ::detect(gae::GraphInput::from(graph::to_graph(stored.model, stored.id)), model, s.id);
    rows.push_back({s.id, stored.role, d.distance_sq, d.score, d.backdoor, s.file});
  }
  return rows;
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "model-count") return SweepAxis::model_count;
  if (s == "encoder-widths") return SweepAxis::encoder_widths;
  if (s == "learning-rate") return SweepAxis::learning_rate;
  throw SpecError("unknown sweep axis '" + s + "' (model-count, encoder-widths, learning-rate)");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::model_count: return "model-count";
    case SweepAxis::encoder_widths: return "encoder-widths";
    case SweepAxis::learning_rate: return "learning-rate";
  }
  return "?";
}

ExperimentConfig with_axis_value(const ExperimentConfig& cfg, SweepAxis axis, const std::string& value) {
  ExperimentConfig out = cfg;
  const auto bad = [&] { return SpecError("invalid " + std::string(to_string(axis)) + " value '" + value + "'"); };
  try {
    std::size_t used = 0;
    switch (axis) {
      case SweepAxis::model_count: {
        if (value.empty() || value[0] == '-') throw bad();
        out.zoo.train_benign = std::stoul(value, &used);
        break;
      }
      case SweepAxis::learning_rate: {
        const double lr = std::stod(value, &used);
        out.gae.pretrain.lr = lr;
        out.occ.lr = lr;
        break;
      }
      case SweepAxis::encoder_widths: {
        out.gae.encoder_widths.clear();
        std::stringstream ss(value);
        std::string part;
        while (std::getline(ss, part, 'x')) {
          std::size_t n = 0;
          if (part.empty() || part[0] == '-') throw bad();
          out.gae.encoder_widths.push_back(std::stoul(part, &n));
          if (n != part.size()) throw bad();
        }
        used = value.size();
        break;
      }
    }
    if (used != value.size()) throw bad();
  } catch (const std::logic_error&) {
    throw bad();
  }
  out.validate();
  return out;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepAxis axis, std::span<const std::string> values) {
  cfg.validate();
  if (values.empty()) throw SpecError("sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (const std::string& v : values) configs.push_back(with_axis_value(cfg, axis, v));

  const fs::path dir = cfg.output_dir;
  std::map<std::string, double> timing;
  io::write_text_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
  const zoo::ZooData data = run_stage("data", timing, [&] { return prepare_data(cfg); });
  const TestModels benign = run_stage("zoo-test", timing, [&] { return build_benign_test(cfg, data, dir); });
  const TestModels backdoor = run_stage("zoo-test", timing, [&] { return build_backdoor_test(cfg, data, dir); });

  std::vector<SweepPoint> points;
  std::string csv = "value,auc,status\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint p{values[i], std::nullopt, {}};
    const fs::path run_dir = dir / (std::string(to_string(axis)) + "-" + std::to_string(i));
    try {
      occ::EpochMonitor monitor;
      if (configs[i].occ_stop_on == "test-auc") monitor = test_auc_monitor(benign, backdoor);
      Detector det = train_detector(configs[i], data, run_dir, monitor);
      for (const auto& [k, v] : timing) det.timing[k] += v;
      p.report = evaluate(configs[i], det, benign, backdoor, run_dir);
      csv += csv_safe(values[i]) + "," + format_number(p.report->auc) + ",ok\n";
    } catch (const Error& e) {
      p.error = e.what();
      csv += csv_safe(values[i]) + ",nan,error: " + csv_safe(e.what()) + "\n";
    }
    points.push_back(std::move(p));
  }
  io::write_text_file(dir / "sweep.csv", csv);
  return points;
}

}  // namespace ocgec::harness
