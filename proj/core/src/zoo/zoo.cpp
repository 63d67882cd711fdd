#include "ocgec/zoo/zoo.hpp"

#include <cstdio>
#include <sstream>

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"
#include "ocgec/parallel.hpp"
#include "ocgec/rng.hpp"

namespace ocgec::zoo {

TrainHyperParams HyperGrid::at(std::size_t index) const {
  validate();
  const std::size_t i = index % combinations();
  TrainHyperParams hp;
  hp.init = inits[i % inits.size()];
  hp.lr = lrs[(i / inits.size()) % lrs.size()];
  hp.epochs = epochs[(i / (inits.size() * lrs.size())) % epochs.size()];
  hp.batch_size = batch_size;
  return hp;
}

void HyperGrid::validate() const {
  if (inits.empty() || lrs.empty() || epochs.empty()) throw SpecError("hyperparameter grid has an empty axis");
  if (batch_size == 0) throw SpecError("batch size must be positive");
  for (double lr : lrs) {
    if (!(lr > 0.0)) throw SpecError("learning rates must be positive");
  }
}

void ZooSpec::validate() const {
  if (benign_count + backdoor_count == 0) throw SpecError("zoo needs at least one model");
  if (backdoor_count > 0 && triggers.empty()) throw SpecError("backdoor models need at least one trigger");
  if (benign_count > 0) benign_grid.validate();
  if (backdoor_count > 0) backdoor_grid.validate();
  for (const TriggerSpec& t : triggers) t.validate(arch.input);
  resolve(arch);
}

nlohmann::json to_json(const ZooRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["seed"] = r.seed;
  j["role"] = to_string(r.role);
  j["hyperparameters"] = {{"init", to_string(r.hp.init)},
                          {"lr", r.hp.lr},
                          {"epochs", r.hp.epochs},
                          {"batch_size", r.hp.batch_size}};
  j["trigger"] = r.trigger ? to_json(*r.trigger) : nlohmann::json(nullptr);
  j["clean_accuracy"] = r.clean_accuracy;
  j["attack_success_rate"] = r.attack_success_rate ? nlohmann::json(*r.attack_success_rate) : nlohmann::json(nullptr);
  j["file"] = r.file;
  return j;
}

ZooRecord zoo_record_from_json(const nlohmann::json& j) {
  try {
    ZooRecord r;
    r.id = j.at("id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.role = model_role_from_string(j.at("role").get<std::string>());
    const auto& hp = j.at("hyperparameters");
    r.hp.init = init_scheme_from_string(hp.at("init").get<std::string>());
    r.hp.lr = hp.at("lr").get<double>();
    r.hp.epochs = hp.at("epochs").get<std::size_t>();
    r.hp.batch_size = hp.at("batch_size").get<std::size_t>();
    if (!j.at("trigger").is_null()) r.trigger = trigger_from_json(j.at("trigger"));
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    if (!j.at("attack_success_rate").is_null()) r.attack_success_rate = j.at("attack_success_rate").get<double>();
    r.file = j.at("file").get<std::string>();
    if (r.role == ModelRole::backdoor && !r.trigger) throw FormatError("backdoor record " + r.id + " has no trigger");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest record: ") + e.what());
  } catch (const SpecError& e) {
    throw FormatError(std::string("malformed manifest record: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const ZooManifest& manifest) {
  std::string text;
  for (const ZooRecord& r : manifest) {
    text += to_json(r).dump();
    text += '\n';
  }
  io::write_text_file(path, text);
}

ZooManifest read_manifest(const std::filesystem::path& path) {
  std::istringstream in(io::read_text_file(path));
  ZooManifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      manifest.push_back(zoo_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return manifest;
}

std::vector<TrainedModel> train_zoo(const ZooSpec& spec, const ZooData& data) {
  spec.validate();
  const std::size_t total = spec.benign_count + spec.backdoor_count;
  if (spec.benign_count > 0 && data.clean_small.empty()) throw SpecError("benign split is empty");
  if (spec.backdoor_count > 0 && data.attacker.empty()) throw SpecError("attacker split is empty");
  if (data.eval.empty()) throw SpecError("evaluation set is empty");

  const int width = std::max<int>(3, static_cast<int>(std::to_string(total - 1).size()));
  std::vector<TrainedModel> out(total);
  parallel_for(total, spec.threads, [&](std::size_t i) {
    TrainedModel& slot = out[i];
    ZooRecord& r = slot.record;
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "%0*zu", width, i);
    r.id = spec.id_prefix + "-" + suffix;
    r.seed = spec.base_seed + i;
    r.file = r.id + ".tmod";
    if (i < spec.benign_count) {
      r.role = ModelRole::benign;
      r.hp = spec.benign_grid.at(i);
      slot.model = train_tiny_model(data.clean_small, spec.arch, r.hp, r.seed);
    } else {
      const std::size_t j = i - spec.benign_count;
      r.role = ModelRole::backdoor;
      r.hp = spec.backdoor_grid.at(j);
      r.trigger = spec.triggers[j % spec.triggers.size()];
      const Dataset poisoned = poison_dataset(data.attacker, *r.trigger, r.seed);
      slot.model = train_tiny_model(poisoned, spec.arch, r.hp, r.seed);
      r.attack_success_rate = attack_success_rate(slot.model, data.eval, *r.trigger);
    }
    r.clean_accuracy = eval_accuracy(slot.model, data.eval);
  });
  return out;
}

std::vector<TrainedModel> generate_zoo(const ZooSpec& spec, const ZooData& data,
                                       const std::filesystem::path& out_dir) {
  std::vector<TrainedModel> trained = train_zoo(spec, data);
  const auto manifest_path = out_dir / "manifest.jsonl";
  std::vector<std::filesystem::path> written;
  try {
    for (const TrainedModel& t : trained) {
      const auto path = out_dir / t.record.file;
      save_model(path, {t.record.id, t.record.seed, t.record.role, t.model});
      written.push_back(path);
    }
    ZooManifest manifest;
    manifest.reserve(trained.size());
    for (const TrainedModel& t : trained) manifest.push_back(t.record);
    write_manifest(manifest_path, manifest);
  } catch (const IoError&) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    std::filesystem::remove(manifest_path, ec);
    throw;
  }
  return trained;
}

}  // namespace ocgec::zoo
