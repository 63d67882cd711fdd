#include "ocgec/harness/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/parallel.hpp"

namespace ocgec::harness {

using nlohmann::json;

namespace {

// Reads optional keys from one JSON object and remembers which keys were
// consumed so leftovers can be reported as typos.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw SpecError(where_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw SpecError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw SpecError("unknown configuration key " + where_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json grid_to_json(const zoo::HyperGrid& g) {
  json inits = json::array();
  for (zoo::InitScheme s : g.inits) inits.push_back(zoo::to_string(s));
  return {{"inits", inits}, {"lrs", g.lrs}, {"epochs", g.epochs}, {"batch_size", g.batch_size}};
}

void read_grid(const json& j, const std::string& where, zoo::HyperGrid& g) {
  Reader r(j, where);
  std::vector<std::string> inits;
  for (zoo::InitScheme s : g.inits) inits.push_back(zoo::to_string(s));
  r.get("inits", inits);
  g.inits.clear();
  for (const std::string& s : inits) g.inits.push_back(zoo::init_scheme_from_string(s));
  r.get("lrs", g.lrs);
  r.get("epochs", g.epochs);
  r.get("batch_size", g.batch_size);
  r.finish();
}

}  // namespace

zoo::TriggerSpec AttackConfig::make_trigger(zoo::ImageShape shape) const {
  if (trigger == zoo::TriggerKind::patch) {
    return zoo::make_patch_trigger(shape, patch_size, poison_rate, label_map, patch_margin);
  }
  return zoo::make_blend_trigger(shape, pattern_seed, alpha, poison_rate, label_map);
}

ExperimentConfig::ExperimentConfig() {
  zoo.benign_grid.inits = {zoo::InitScheme::uniform_fan_in, zoo::InitScheme::normal_002,
                           zoo::InitScheme::orthogonal};
  zoo.benign_grid.lrs = {1e-3, 3e-3};
  zoo.benign_grid.epochs = {10};
  zoo.benign_grid.batch_size = 8;
  // normal-0.02 is left out of the attacker grid: at learning rates high
  // enough to implant the trigger in a few epochs it often collapses to a
  // constant predictor.
  zoo.backdoor_grid.inits = {zoo::InitScheme::uniform_fan_in, zoo::InitScheme::orthogonal};
  zoo.backdoor_grid.lrs = {5e-3, 1e-2};
  zoo.backdoor_grid.epochs = {4};
  zoo.backdoor_grid.batch_size = 8;
  gae.pretrain.epochs = 20;
}

unsigned ExperimentConfig::worker_threads() const { return threads == 0 ? default_threads() : threads; }

zoo::Architecture ExperimentConfig::architecture() const {
  if (!zoo.architecture.layers.empty()) return zoo.architecture;
  return zoo::Architecture::standard(dataset.image, dataset.num_classes);
}

void ExperimentConfig::validate() const {
  if (dataset.source != "synthetic" && dataset.source != "idx") {
    throw SpecError("dataset.source must be 'synthetic' or 'idx'");
  }
  if (dataset.source == "synthetic") {
    if (dataset.num_classes < 2) throw SpecError("dataset.num_classes must be at least 2");
    if (dataset.samples_per_class == 0 || dataset.eval_per_class == 0) {
      throw SpecError("dataset sample counts must be positive");
    }
    if (dataset.image.size() == 0) throw SpecError("dataset.image has a zero dimension");
    if (!(dataset.noise >= 0.0)) throw SpecError("dataset.noise must be non-negative");
  } else if (dataset.idx_images.empty() || dataset.idx_labels.empty() || dataset.idx_eval_images.empty() ||
             dataset.idx_eval_labels.empty()) {
    throw SpecError("idx datasets need images, labels, eval_images and eval_labels");
  }
  const double cf = dataset.clean_fraction, af = dataset.attacker_fraction;
  if (!(cf > 0.0 && af > 0.0 && cf + af <= 1.0)) {
    throw SpecError("dataset fractions must be positive and sum to at most 1");
  }
  if (zoo.train_benign == 0) throw SpecError("zoo.train_benign must be at least 1");
  if (zoo.test_benign == 0) throw SpecError("zoo.test_benign must be at least 1");
  if (zoo.test_backdoor == 0) throw SpecError("zoo.test_backdoor must be at least 1");
  zoo.benign_grid.validate();
  zoo.backdoor_grid.validate();
  if (attack.name.empty() || attack.name.find_first_of("/\\ ") != std::string::npos) {
    throw SpecError("attack.name must be a non-empty word");
  }
  if (dataset.source == "synthetic") {
    const zoo::Architecture arch = architecture();
    zoo::resolve(arch);
    if (arch.input != dataset.image) throw SpecError("zoo.architecture input does not match dataset.image");
    attack.make_trigger(dataset.image).validate(dataset.image);
    if (attack.label_map.target >= dataset.num_classes) throw SpecError("attack target class out of range");
  }
  if (gae.encoder_widths.empty()) throw SpecError("gae.encoder_widths must not be empty");
  for (std::size_t w : gae.encoder_widths) {
    if (w == 0) throw SpecError("gae.encoder_widths must be positive");
  }
  for (std::size_t w : gae.decoder_hidden) {
    if (w == 0) throw SpecError("gae.decoder_hidden must be positive");
  }
  gae.pretrain.validate();
  occ.validate();
  if (occ_stop_on != "loss" && occ_stop_on != "test-auc") {
    throw SpecError("occ.stop_on must be 'loss' or 'test-auc'");
  }
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  Reader top(j, "config");
  top.get("seed", cfg.seed);
  top.get("threads", cfg.threads);
  std::string out = cfg.output_dir.string();
  top.get("output_dir", out);
  cfg.output_dir = out;
  top.get("persist_graphs", cfg.persist_graphs);

  if (const json* d = top.child("dataset")) {
    Reader r(*d, top.path("dataset"));
    DatasetConfig& ds = cfg.dataset;
    r.get("source", ds.source);
    r.get("num_classes", ds.num_classes);
    r.get("samples_per_class", ds.samples_per_class);
    r.get("eval_per_class", ds.eval_per_class);
    std::vector<std::size_t> image{ds.image.channels, ds.image.height, ds.image.width};
    r.get("image", image);
    if (image.size() != 3) throw SpecError("config.dataset.image must be [channels, height, width]");
    ds.image = {image[0], image[1], image[2]};
    r.get("noise", ds.noise);
    const auto get_path = [&r](const char* key, std::filesystem::path& out) {
      std::string text = out.string();
      r.get(key, text);
      out = text;
    };
    get_path("idx_images", ds.idx_images);
    get_path("idx_labels", ds.idx_labels);
    get_path("idx_eval_images", ds.idx_eval_images);
    get_path("idx_eval_labels", ds.idx_eval_labels);
    r.get("clean_fraction", ds.clean_fraction);
    r.get("attacker_fraction", ds.attacker_fraction);
    r.finish();
  }

  if (const json* z = top.child("zoo")) {
    Reader r(*z, top.path("zoo"));
    r.get("train_benign", cfg.zoo.train_benign);
    r.get("test_benign", cfg.zoo.test_benign);
    r.get("test_backdoor", cfg.zoo.test_backdoor);
    if (const json* a = r.child("architecture")) {
      try {
        cfg.zoo.architecture = a->is_null() ? zoo::Architecture{} : zoo::architecture_from_json(*a);
      } catch (const FormatError& e) {
        throw SpecError(std::string("config.zoo.architecture: ") + e.what());
      }
    }
    if (const json* g = r.child("benign_grid")) read_grid(*g, r.path("benign_grid"), cfg.zoo.benign_grid);
    if (const json* g = r.child("backdoor_grid")) read_grid(*g, r.path("backdoor_grid"), cfg.zoo.backdoor_grid);
    r.finish();
  }

  if (const json* a = top.child("attack")) {
    Reader r(*a, top.path("attack"));
    AttackConfig& at = cfg.attack;
    r.get("name", at.name);
    std::string kind = zoo::to_string(at.trigger), map = zoo::to_string(at.label_map.kind);
    r.get("trigger", kind);
    r.get("label_map", map);
    at.trigger = zoo::trigger_kind_from_string(kind);
    at.label_map.kind = zoo::label_map_from_string(map);
    r.get("target", at.label_map.target);
    r.get("poison_rate", at.poison_rate);
    r.get("patch_size", at.patch_size);
    r.get("patch_margin", at.patch_margin);
    r.get("alpha", at.alpha);
    r.get("pattern_seed", at.pattern_seed);
    r.finish();
  }

  if (const json* g = top.child("gae")) {
    Reader r(*g, top.path("gae"));
    gae::PretrainConfig& pc = cfg.gae.pretrain;
    r.get("encoder_widths", cfg.gae.encoder_widths);
    r.get("decoder_hidden", cfg.gae.decoder_hidden);
    r.get("epochs", pc.epochs);
    r.get("lr", pc.lr);
    r.get("mask_rate", pc.mask_rate);
    r.get("batch_size", pc.batch_size);
    r.get("dropout", pc.dropout);
    r.get("gamma", pc.sce.gamma);
    r.get("remask", pc.remask);
    r.finish();
  }

  if (const json* o = top.child("occ")) {
    Reader r(*o, top.path("occ"));
    occ::OccConfig& oc = cfg.occ;
    r.get("nu", oc.nu);
    r.get("weight_decay", oc.weight_decay);
    r.get("max_epochs", oc.max_epochs);
    r.get("patience", oc.patience);
    r.get("lr", oc.lr);
    r.get("batch_size", oc.batch_size);
    r.get("dropout", oc.dropout);
    r.get("collapse_tolerance", oc.collapse_tolerance);
    r.get("stop_on", cfg.occ_stop_on);
    r.finish();
  }
  top.finish();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const DatasetConfig& ds = cfg.dataset;
  const gae::PretrainConfig& pc = cfg.gae.pretrain;
  const occ::OccConfig& oc = cfg.occ;
  json arch = cfg.zoo.architecture.layers.empty() ? json(nullptr) : zoo::to_json(cfg.zoo.architecture);
  return {
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"output_dir", cfg.output_dir.string()},
      {"persist_graphs", cfg.persist_graphs},
      {"dataset",
       {{"source", ds.source},
        {"num_classes", ds.num_classes},
        {"samples_per_class", ds.samples_per_class},
        {"eval_per_class", ds.eval_per_class},
        {"image", {ds.image.channels, ds.image.height, ds.image.width}},
        {"noise", ds.noise},
        {"idx_images", ds.idx_images.string()},
        {"idx_labels", ds.idx_labels.string()},
        {"idx_eval_images", ds.idx_eval_images.string()},
        {"idx_eval_labels", ds.idx_eval_labels.string()},
        {"clean_fraction", ds.clean_fraction},
        {"attacker_fraction", ds.attacker_fraction}}},
      {"zoo",
       {{"train_benign", cfg.zoo.train_benign},
        {"test_benign", cfg.zoo.test_benign},
        {"test_backdoor", cfg.zoo.test_backdoor},
        {"architecture", arch},
        {"benign_grid", grid_to_json(cfg.zoo.benign_grid)},
        {"backdoor_grid", grid_to_json(cfg.zoo.backdoor_grid)}}},
      {"attack",
       {{"name", cfg.attack.name},
        {"trigger", zoo::to_string(cfg.attack.trigger)},
        {"label_map", zoo::to_string(cfg.attack.label_map.kind)},
        {"target", cfg.attack.label_map.target},
        {"poison_rate", cfg.attack.poison_rate},
        {"patch_size", cfg.attack.patch_size},
        {"patch_margin", cfg.attack.patch_margin},
        {"alpha", cfg.attack.alpha},
        {"pattern_seed", cfg.attack.pattern_seed}}},
      {"gae",
       {{"encoder_widths", cfg.gae.encoder_widths},
        {"decoder_hidden", cfg.gae.decoder_hidden},
        {"epochs", pc.epochs},
        {"lr", pc.lr},
        {"mask_rate", pc.mask_rate},
        {"batch_size", pc.batch_size},
        {"dropout", pc.dropout},
        {"gamma", pc.sce.gamma},
        {"remask", pc.remask}}},
      {"occ",
       {{"nu", oc.nu},
        {"weight_decay", oc.weight_decay},
        {"max_epochs", oc.max_epochs},
        {"patience", oc.patience},
        {"lr", oc.lr},
        {"batch_size", oc.batch_size},
        {"dropout", oc.dropout},
        {"collapse_tolerance", oc.collapse_tolerance},
        {"stop_on", cfg.occ_stop_on}}},
  };
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw SpecError("malformed config " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw SpecError(e.what());
  }
  return experiment_config_from_json(j);
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SpecError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &config;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) throw SpecError("override key '" + key + "' has an empty component");
    path.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) throw SpecError("override key '" + key + "' descends into a non-object");
    node = &(*node)[path[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw SpecError("override key '" + key + "' descends into a non-object");
  (*node)[path.back()] = std::move(value);
}

}  // namespace ocgec::harness
