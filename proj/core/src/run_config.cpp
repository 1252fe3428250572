#include "nlmi/run_config.hpp"

#include "nlmi/errors.hpp"

namespace nlmi {

RunConfig run_config_from_json(const Json& j) {
  reject_unknown_keys(j, {"version", "dataset", "dataset_path", "model", "train", "seed", "seeds", "out"},
                      "run config");
  if (!j.contains("version")) throw ConfigError("run config: missing 'version'");
  if (j.at("version").get<int>() != kRunConfigVersion) {
    throw ConfigError("run config: unsupported version " + j.at("version").dump());
  }
  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dataset") == j.contains("dataset_path")) {
      throw ConfigError("run config: give exactly one of 'dataset' and 'dataset_path'");
    }
    if (j.contains("dataset")) {
      c.dataset = spec_from_json(j.at("dataset"));
      if (!j.at("dataset").contains("seed")) c.dataset->seed = derive_seed(c.seed, "dataset");
    } else {
      c.dataset_path = j.at("dataset_path").get<std::string>();
    }
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("seeds")) {
      c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      for (std::uint64_t i = 0; i < 4; ++i) c.seeds.push_back(derive_seed(c.seed, i));
    }
    if (c.seeds.empty()) throw ConfigError("run config: 'seeds' must not be empty");
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  Json j = {{"version", kRunConfigVersion},
            {"model", model_config_to_json(c.model)},
            {"train", train_config_to_json(c.train)},
            {"seed", c.seed},
            {"seeds", c.seeds},
            {"out", c.out}};
  if (c.dataset) {
    j["dataset"] = spec_to_json(*c.dataset);
  } else {
    j["dataset_path"] = c.dataset_path;
  }
  return j;
}

RunConfig load_run_config(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("run config '" + path + "': " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j);
}

Dataset materialize_dataset(const RunConfig& c) {
  if (c.dataset) return generate_dataset(*c.dataset);
  return load_dataset(c.dataset_path);
}

}  // namespace nlmi
