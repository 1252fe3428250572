#include "nlmi/checkpoint.hpp"

#include "nlmi/errors.hpp"

namespace nlmi {

Json checkpoint_to_json(const Model& model) {
  Json tensors = Json::object();
  for (const auto& nt : model.state()) {
    tensors[nt.name] = {{"shape", nt.tensor.shape()},
                        {"data", std::vector<double>(nt.tensor.data().begin(), nt.tensor.data().end())}};
  }
  return {{"version", kCheckpointFormatVersion},
          {"config", model_config_to_json(model.config())},
          {"tensors", std::move(tensors)}};
}

Model checkpoint_from_json(const Json& j) {
  try {
    if (!j.is_object() || !j.contains("config") || !j.contains("tensors")) {
      throw FormatError("checkpoint: expected {version, config, tensors}");
    }
    if (j.value("version", 0) != kCheckpointFormatVersion) {
      throw FormatError("checkpoint: unsupported format version");
    }
    Rng scratch(0);
    Model model(model_config_from_json(j.at("config")), scratch);
    std::vector<NamedTensor> state;
    for (const auto& [name, t] : j.at("tensors").items()) {
      state.push_back({name, Tensor::from(t.at("shape").get<Shape>(), t.at("data").get<std::vector<double>>())});
    }
    if (state.size() != model.state().size()) throw FormatError("checkpoint: tensor count does not match config");
    model.load_state(state);
    return model;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  write_text_file(path, checkpoint_to_json(model).dump() + "\n");
}

Model load_checkpoint(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace nlmi
