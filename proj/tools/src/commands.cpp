#include "nlmi_cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nlmi/checkpoint.hpp"
#include "nlmi/errors.hpp"
#include "nlmi/run_config.hpp"
#include "nlmi/train_loop.hpp"
#include "nlmi/verification.hpp"

namespace nlmi::cli {

namespace fs = std::filesystem;

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitConfig;
}

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

RunConfig resolve(const std::string& path, const Overrides& o) {
  Json j = read_json(path);
  if (j.is_object() && j.contains("generator")) j = Json{{"version", kRunConfigVersion}, {"dataset", j}};
  apply_overrides(j, o);
  return run_config_from_json(j);
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create directory '" + p.string() + "': " + ec.message());
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

void apply_overrides(Json& j, const Overrides& o) {
  if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["out"] = *o.out;
  if (o.layers || o.base || o.nlmi || o.terms) {
    Json& m = j["model"];
    if (m.is_null()) m = Json::object();
    if (o.layers) m["layers"] = *o.layers;
    if (o.base) m["base"] = *o.base;
    if (o.nlmi) m["nlmi"] = *o.nlmi;
    if (o.terms) {
      m["terms"] = *o.terms;
    } else if (o.base || o.nlmi) {
      m.erase("terms");
    }
  }
}

std::vector<UpdateTerms> ablation_rows() {
  return {UpdateTerms{true, true, false}, UpdateTerms{true, false, true}, UpdateTerms{false, true, true},
          UpdateTerms{true, true, true}};
}

int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig rc = resolve(opt.config, opt.overrides);
    if (!rc.dataset) throw ConfigError("gen: the config must contain a 'dataset' spec, not 'dataset_path'");
    const Dataset d = generate_dataset(*rc.dataset);
    ensure_dir(rc.out);
    const fs::path path = fs::path(rc.out) / "dataset.json";
    save_dataset(d, path.string());
    out << "wrote " << path.string() << " (" << d.spec.generator_name() << ", train " << d.train.size() << ", val "
        << d.val.size() << ", test " << d.test.size() << ", seed " << d.spec.seed << ")\n";
    return kExitOk;
  });
}

namespace {

SeedSummary train_and_write(const RunConfig& rc, const Dataset& data, const ModelConfig& model,
                            const fs::path& dir, bool verbose, std::ostream& err) {
  ensure_dir(dir);
  EpochCallback on_epoch;
  if (verbose) {
    on_epoch = [&err](const MetricsRecord& tr, const MetricsRecord& va, const MetricsRecord& te, double lr) {
      err << "epoch " << tr.epoch << "  train " << fixed(tr.loss) << "  val " << fixed(va.loss) << "/"
          << fixed(va.value) << "  test " << fixed(te.value) << "  lr " << lr << '\n';
    };
  }
  const auto on_model = [&](std::uint64_t seed, const Model& m, const TrainResult& r) {
    const fs::path seed_dir = dir / ("seed-" + std::to_string(seed));
    ensure_dir(seed_dir);
    write_text_file((seed_dir / "metrics.csv").string(), metrics_csv(r.history));
    save_checkpoint(m, (seed_dir / "checkpoint.json").string());
    err << model.variant_name() << " [" << model.terms.to_string() << "] seed " << seed << ": test "
        << metric_name(model.task) << " " << fixed(r.test_at_best.metric) << " (best epoch " << r.best_epoch << " of "
        << r.epochs_run << ", " << r.stop_reason << ")\n";
  };
  return run_seeds(data, model, rc.train, rc.seeds, on_model, on_epoch);
}

}  // namespace

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig rc = resolve(opt.config, opt.overrides);
    const Dataset data = materialize_dataset(rc);
    const ModelConfig model = fit_to_dataset(rc.model, data);
    model.validate();
    ensure_dir(rc.out);
    RunConfig resolved = rc;
    resolved.model = model;
    write_text_file((fs::path(rc.out) / "config.json").string(), run_config_to_json(resolved).dump(2) + "\n");

    const SeedSummary summary = train_and_write(rc, data, model, rc.out, opt.verbose, err);
    const std::string text = summary.to_json().dump(2) + "\n";
    write_text_file((fs::path(rc.out) / "summary.json").string(), text);
    out << text;
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.batch_size == 0) throw ConfigError("eval: batch size must be positive");
    Model model = load_checkpoint(opt.checkpoint);
    const Dataset data = load_dataset(opt.dataset);
    const Split split = split_from_string(opt.split);
    const ModelConfig expected = fit_to_dataset(model.config(), data);
    if (!(expected == model.config())) {
      throw ConfigError("eval: checkpoint '" + opt.checkpoint + "' does not fit dataset '" + opt.dataset + "'");
    }
    const LossSettings settings = loss_settings(data, model.config(), TrainConfig{});
    const EvalResult r = evaluate(model, data.split(split), settings, opt.batch_size);
    const Json j = {{"split", to_string(split)}, {"metric", metric_name(settings.task)}, {"value", r.metric},
                    {"loss", r.loss}};
    out << j.dump() << '\n';
    return kExitOk;
  });
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(opt.step > 0.0)) throw ConfigError("gradcheck: step must be positive");
    const verify::Variant v = verify::variant_from_string(opt.variant);
    const auto checks = verify::gradcheck_layer(v, opt.dim, opt.nodes, opt.seed, opt.step);
    double worst = 0.0;
    std::size_t width = 0;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    for (const auto& c : checks) {
      out << std::left << std::setw(static_cast<int>(width) + 2) << c.name << std::scientific << std::setprecision(3)
          << c.max_rel_error << '\n';
      worst = std::max(worst, c.max_rel_error);
    }
    const bool pass = worst < opt.tolerance;
    out << opt.variant << " d=" << opt.dim << " n=" << opt.nodes << " seed=" << opt.seed << ": max rel. error "
        << std::scientific << std::setprecision(3) << worst << (pass ? " < " : " >= ") << opt.tolerance
        << (pass ? "  PASS" : "  FAIL") << '\n'
        << std::defaultfloat;
    return pass ? kExitOk : kExitNumerical;
  });
}

int cmd_ablate(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig rc = resolve(opt.config, opt.overrides);
    const Dataset data = materialize_dataset(rc);
    ModelConfig base = fit_to_dataset(rc.model, data);
    base.nlmi = true;
    ensure_dir(rc.out);

    Json rows = Json::array();
    std::ostringstream csv;
    csv << "terms,metric,mean,std\n" << std::setprecision(17);
    std::ostringstream table;
    table << std::left << std::setw(16) << "terms" << std::setw(10) << "mean" << "std\n";
    for (const UpdateTerms& terms : ablation_rows()) {
      ModelConfig m = base;
      m.terms = terms;
      m.validate();
      const fs::path dir = fs::path(rc.out) / ("ablate-" + terms.to_string());
      const SeedSummary s = train_and_write(rc, data, m, dir, opt.verbose, err);
      Json row = s.to_json();
      row["terms"] = terms.to_string();
      rows.push_back(std::move(row));
      csv << '"' << terms.to_string() << "\"," << s.metric << ',' << s.mean << ',' << s.std << '\n';
      table << std::setw(16) << terms.to_string() << std::setw(10) << fixed(s.mean) << fixed(s.std) << '\n';
    }
    write_text_file((fs::path(rc.out) / "ablation.json").string(), rows.dump(2) + "\n");
    write_text_file((fs::path(rc.out) / "ablation.csv").string(), csv.str());
    out << "metric: " << metric_name(base.task) << '\n' << table.str();
    return kExitOk;
  });
}

}  // namespace nlmi::cli
