// Command-line front end. Each subcommand runs one stage of the pipeline on
// files so the stages can be inspected and rerun separately; `eval` and
// `sweep` run whole experiments.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocgec/graph/layered_graph.hpp"
#include "ocgec/harness/experiment.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/rng.hpp"
#include "ocgec/zoo/model_io.hpp"

namespace fs = std::filesystem;
using namespace ocgec;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
};

void add_common(CLI::App* sub, CommonOptions& o, const std::string& out_help) {
  sub->add_option("-c,--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", o.overrides, "Config override such as occ.nu=0.2 (repeatable)");
  sub->add_option("--seed", o.seed, "Root seed");
  sub->add_option("-j,--threads", o.threads, "Worker threads (0 = all cores)");
  sub->add_option("-o,--out", o.out, out_help);
}

harness::ExperimentConfig build_config(const CommonOptions& o) {
  nlohmann::json j =
      harness::to_json(o.config.empty() ? harness::ExperimentConfig{} : harness::load_experiment_config(o.config));
  for (const std::string& s : o.overrides) harness::apply_override(j, s);
  if (o.seed) j["seed"] = *o.seed;
  if (o.threads) j["threads"] = *o.threads;
  harness::ExperimentConfig cfg = harness::experiment_config_from_json(j);
  cfg.validate();
  return cfg;
}

fs::path out_or(const CommonOptions& o, const fs::path& fallback) { return o.out.empty() ? fallback : fs::path(o.out); }

// Files with one of the given extensions, in name order. A plain file argument
// is taken as is.
std::vector<fs::path> collect(const std::vector<std::string>& inputs, std::initializer_list<const char*> exts) {
  std::vector<fs::path> files;
  const auto wanted = [&](const fs::path& p) {
    return std::any_of(exts.begin(), exts.end(), [&](const char* e) { return p.extension() == e; });
  };
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && wanted(entry.path())) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in)) {
      files.emplace_back(in);
    } else {
      throw SpecError("no such file or directory: " + in);
    }
  }
  if (files.empty()) throw SpecError("no input files found");
  return files;
}

// Loads .lgr graphs directly and converts .tmod models on the fly.
std::vector<graph::LayeredGraph> load_graphs(const std::vector<std::string>& inputs) {
  std::vector<graph::LayeredGraph> graphs;
  for (const fs::path& p : collect(inputs, {".lgr", ".tmod"})) {
    if (p.extension() == ".tmod") {
      const zoo::StoredModel m = zoo::load_model(p);
      graphs.push_back(graph::to_graph(m.model, m.id));
    } else {
      graphs.push_back(graph::load_graph(p));
      if (graphs.back().source_id.empty()) graphs.back().source_id = p.stem().string();
    }
  }
  return graphs;
}

std::vector<gae::GraphInput> inputs_of(const std::vector<graph::LayeredGraph>& graphs) {
  std::vector<gae::GraphInput> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(gae::GraphInput::from(g));
  return out;
}

int cmd_zoo(const CommonOptions& o, std::size_t count, const std::string& role) {
  const harness::ExperimentConfig cfg = build_config(o);
  const zoo::ModelRole r = zoo::model_role_from_string(role);
  if (count == 0) throw SpecError("--count must be at least 1");
  const zoo::ZooData data = harness::prepare_data(cfg);
  zoo::ZooSpec spec;
  spec.id_prefix = role;
  spec.arch = cfg.architecture();
  spec.benign_grid = cfg.zoo.benign_grid;
  spec.backdoor_grid = cfg.zoo.backdoor_grid;
  spec.base_seed = derive_seed(cfg.seed, "cli-zoo-" + role);
  spec.threads = cfg.worker_threads();
  if (r == zoo::ModelRole::backdoor) {
    spec.backdoor_count = count;
    spec.triggers = {cfg.attack.make_trigger(data.attacker.image_shape)};
  } else {
    spec.benign_count = count;
  }
  const fs::path dir = out_or(o, cfg.output_dir / "zoo");
  const auto models = zoo::generate_zoo(spec, data, dir);
  for (const auto& m : models) {
    std::printf("%s\taccuracy=%.4f", m.record.id.c_str(), m.record.clean_accuracy);
    if (m.record.attack_success_rate) std::printf("\tasr=%.4f", *m.record.attack_success_rate);
    std::printf("\n");
  }
  std::fprintf(stderr, "wrote %zu models and manifest.jsonl to %s\n", models.size(), dir.string().c_str());
  return 0;
}

int cmd_convert(const CommonOptions& o, const std::vector<std::string>& inputs) {
  const harness::ExperimentConfig cfg = build_config(o);
  const fs::path dir = out_or(o, cfg.output_dir / "graphs");
  std::size_t n = 0;
  for (const fs::path& p : collect(inputs, {".tmod"})) {
    const zoo::StoredModel m = zoo::load_model(p);
    const graph::LayeredGraph g = graph::to_graph(m.model, m.id);
    graph::save_graph(dir / (m.id + ".lgr"), g);
    std::printf("%s\tnodes=%zu\twidth=%zu\n", m.id.c_str(), g.num_nodes(), g.width());
    ++n;
  }
  std::fprintf(stderr, "wrote %zu graphs to %s\n", n, dir.string().c_str());
  return 0;
}

int cmd_pretrain(const CommonOptions& o, const std::vector<std::string>& inputs) {
  const harness::ExperimentConfig cfg = build_config(o);
  const auto graphs = inputs_of(load_graphs(inputs));
  gae::GaeParams init = gae::GaeParams::init(graphs.front().features.dim(1), cfg.gae.encoder_widths,
                                             cfg.gae.decoder_hidden, derive_seed(cfg.seed, "gae-init"));
  gae::PretrainConfig pc = cfg.gae.pretrain;
  pc.seed = derive_seed(cfg.seed, "gae");
  pc.threads = cfg.worker_threads();
  const gae::PretrainResult r = gae::pretrain(graphs, std::move(init), pc);
  const fs::path file = out_or(o, cfg.output_dir / "gae" / "pretrained.gae");
  gae::save_gae(file, r.params, pc);
  for (std::size_t e = 0; e < r.loss_trace.size(); ++e) std::printf("epoch %zu\tloss=%.6f\n", e, r.loss_trace[e]);
  std::fprintf(stderr, "wrote %s\n", file.string().c_str());
  return 0;
}

int cmd_fit(const CommonOptions& o, const std::vector<std::string>& inputs, const std::string& gae_file) {
  const harness::ExperimentConfig cfg = build_config(o);
  const auto graphs = inputs_of(load_graphs(inputs));
  gae::PretrainConfig pc;
  gae::GaeParams params = gae::load_gae(gae_file, &pc);
  occ::OccConfig oc = cfg.occ;
  oc.seed = derive_seed(cfg.seed, "occ");
  oc.threads = cfg.worker_threads();
  const occ::OccModel m = occ::train_occ(graphs, params.encoder, oc);
  const fs::path file = out_or(o, cfg.output_dir / "occ" / "sphere.occ");
  params.encoder = m.encoder;
  const std::string encoder_name = file.stem().string() + ".gae";
  gae::save_gae(file.parent_path() / encoder_name, params, pc);
  occ::save_occ(file, m, encoder_name);
  for (std::size_t e = 0; e < m.trace.loss.size(); ++e) {
    std::printf("epoch %zu\tloss=%.6f\tradius_sq=%.6f\tcoverage=%.4f\n", e, m.trace.loss[e], m.trace.radius_sq[e],
                m.trace.coverage[e]);
  }
  if (m.center_near_origin) std::fprintf(stderr, "warning: hypersphere center lies near the origin\n");
  std::fprintf(stderr, "wrote %s\n", file.string().c_str());
  return 0;
}

int cmd_detect(const std::string& sphere, const std::vector<std::string>& inputs) {
  const occ::OccModel model = occ::load_occ(sphere);
  for (const graph::LayeredGraph& g : load_graphs(inputs)) {
    const occ::Detection d = occ::detect(gae::GraphInput::from(g), model, g.source_id);
    std::printf("%s\t%s\t%s\n", d.id.c_str(), harness::format_number(d.score).c_str(),
                d.backdoor ? "backdoor" : "benign");
  }
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& report) {
  if (!report.empty()) {
    std::printf("%s\n", harness::format_number(harness::load_report(report).auc).c_str());
    return 0;
  }
  harness::ExperimentConfig cfg = build_config(o);
  if (!o.out.empty()) cfg.output_dir = o.out;
  const harness::RunReport r = harness::run_experiment(cfg);
  std::fprintf(stderr, "test models: %zu  mean backdoor ASR: %.4f  report: %s\n", r.scores.size(), r.zoo.backdoor_asr,
               (cfg.output_dir / "report.json").string().c_str());
  std::printf("%s\n", harness::format_number(r.auc).c_str());
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis, const std::vector<std::string>& values) {
  harness::ExperimentConfig cfg = build_config(o);
  if (!o.out.empty()) cfg.output_dir = o.out;
  const auto points = harness::sweep(cfg, harness::sweep_axis_from_string(axis), values);
  std::fputs(io::read_text_file(cfg.output_dir / "sweep.csv").c_str(), stdout);
  const bool failed = std::any_of(points.begin(), points.end(), [](const auto& p) { return !p.report; });
  return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-class graph detector for backdoored neural networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  CommonOptions common;
  std::size_t count = 0;
  std::string role = "benign", gae_file, sphere, report, axis;
  std::vector<std::string> inputs, values;

  CLI::App* zoo = app.add_subcommand("zoo", "Train tiny models and write .tmod files plus manifest.jsonl");
  add_common(zoo, common, "Output directory (default <output_dir>/zoo)");
  zoo->add_option("-n,--count", count, "Number of models")->required();
  zoo->add_option("--role", role, "benign or backdoor")->check(CLI::IsMember({"benign", "backdoor"}));

  CLI::App* convert = app.add_subcommand("convert", "Convert .tmod models into .lgr graphs");
  add_common(convert, common, "Output directory (default <output_dir>/graphs)");
  convert->add_option("inputs", inputs, ".tmod files or directories")->required();

  CLI::App* pretrain = app.add_subcommand("pretrain", "Pre-train the masked graph auto-encoder");
  add_common(pretrain, common, "Output .gae file (default <output_dir>/gae/pretrained.gae)");
  pretrain->add_option("inputs", inputs, ".lgr/.tmod files or directories")->required();

  CLI::App* fit = app.add_subcommand("fit", "Fit the hypersphere on benign graphs");
  add_common(fit, common, "Output .occ file (default <output_dir>/occ/sphere.occ)");
  fit->add_option("--gae", gae_file, "Pre-trained .gae file")->required()->check(CLI::ExistingFile);
  fit->add_option("inputs", inputs, ".lgr/.tmod files or directories")->required();

  CLI::App* detect = app.add_subcommand("detect", "Score models: prints id<TAB>score<TAB>verdict");
  add_common(detect, common, "Unused");
  detect->add_option("--sphere", sphere, ".occ file")->required()->check(CLI::ExistingFile);
  detect->add_option("inputs", inputs, ".lgr/.tmod files or directories")->required();

  CLI::App* eval = app.add_subcommand("eval", "Run a full experiment, or reprint the AUC of a saved report");
  add_common(eval, common, "Run directory (overrides output_dir)");
  eval->add_option("--report", report, "Existing report.json")->check(CLI::ExistingFile);

  CLI::App* sweep = app.add_subcommand("sweep", "One experiment per value over a shared test set");
  add_common(sweep, common, "Sweep directory (overrides output_dir)");
  sweep->add_option("--axis", axis, "model-count, encoder-widths or learning-rate")->required();
  sweep->add_option("--values", values, "Comma-separated values, e.g. 64,128,256 or 64x32,32x16")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (zoo->parsed()) return cmd_zoo(common, count, role);
    if (convert->parsed()) return cmd_convert(common, inputs);
    if (pretrain->parsed()) return cmd_pretrain(common, inputs);
    if (fit->parsed()) return cmd_fit(common, inputs, gae_file);
    if (detect->parsed()) return cmd_detect(sphere, inputs);
    if (eval->parsed()) return cmd_eval(common, report);
    if (sweep->parsed()) return cmd_sweep(common, axis, values);
  } catch (const harness::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SpecError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
