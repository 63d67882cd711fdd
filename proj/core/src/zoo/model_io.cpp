#include "ocgec/zoo/model_io.hpp"

#include "ocgec/error.hpp"
#include "ocgec/io/blob_file.hpp"

namespace ocgec::zoo {

namespace {
constexpr const char* kFormat = "ocgec-tmod";
}

const char* to_string(ModelRole role) { return role == ModelRole::benign ? "benign" : "backdoor"; }

ModelRole model_role_from_string(const std::string& s) {
  if (s == "benign") return ModelRole::benign;
  if (s == "backdoor") return ModelRole::backdoor;
  throw SpecError("unknown model role '" + s + "'");
}

void save_model(const std::filesystem::path& path, const StoredModel& stored) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = 1;
  header["id"] = stored.id;
  header["seed"] = stored.seed;
  header["role"] = to_string(stored.role);
  header["architecture"] = to_json(stored.model.arch);
  std::vector<double> blob;
  nlohmann::json shapes = nlohmann::json::array();
  for (const numerics::Tensor& p : stored.model.parameters()) {
    shapes.push_back(p.shape());
    blob.insert(blob.end(), p.values().begin(), p.values().end());
  }
  header["shapes"] = shapes;
  io::write_blob_file(path, std::move(header), blob);
}

StoredModel load_model(const std::filesystem::path& path) {
  io::BlobFile file = io::read_blob_file(path);
  try {
    const auto& h = file.header;
    if (h.at("format").get<std::string>() != kFormat) throw FormatError(path.string() + ": not a .tmod file");
    StoredModel stored;
    stored.id = h.at("id").get<std::string>();
    stored.seed = h.at("seed").get<std::uint64_t>();
    stored.role = model_role_from_string(h.at("role").get<std::string>());
    stored.model.arch = architecture_from_json(h.at("architecture"));
    const auto geometry = resolve(stored.model.arch);
    const auto& shapes = h.at("shapes");
    if (shapes.size() != 2 * geometry.size()) throw FormatError(path.string() + ": parameter count mismatch");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < geometry.size(); ++i) {
      LayerParams layer;
      for (int part = 0; part < 2; ++part) {
        const auto shape = shapes.at(2 * i + part).get<numerics::Shape>();
        const auto& expected = part == 0 ? geometry[i].weight_shape : geometry[i].bias_shape;
        if (shape != expected) throw FormatError(path.string() + ": stored shape disagrees with architecture");
        const std::size_t n = numerics::shape_size(shape);
        if (offset + n > file.values.size()) throw FormatError(path.string() + ": weight blob too short");
        numerics::Tensor t(shape, std::vector<double>(file.values.begin() + offset, file.values.begin() + offset + n));
        offset += n;
        (part == 0 ? layer.weight : layer.bias) = std::move(t);
      }
      stored.model.layers.push_back(std::move(layer));
    }
    if (offset != file.values.size()) throw FormatError(path.string() + ": weight blob too long");
    return stored;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const SpecError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace ocgec::zoo
