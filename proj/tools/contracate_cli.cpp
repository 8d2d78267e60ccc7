#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "contracate/contracate.hpp"

namespace fs = std::filesystem;
using namespace contracate;
using io::Json;

namespace {

/// Every accepted key with its default. A config file may only contain keys
/// that appear here; null marks an optional value.
Json default_config() {
  return Json::parse(R"({
    "seed": 0,
    "jobs": 0,
    "out": ".",
    "data": {
      "generator": "synthetic",
      "path": null,
      "n": 1000,
      "dim_causal": 5,
      "dim_noncausal": 5,
      "alpha": 1.0,
      "beta": 1.0,
      "rho": 1.0,
      "delta": 1.0,
      "y_noise_std": 0.5,
      "latent_noise_std": 1.0,
      "noncausal_noise_std": null,
      "train_fraction": 0.7,
      "extra_dims": 8,
      "coupling": 1.0,
      "augment_noise_std": 1.0
    },
    "train": {
      "mode": "contrastive",
      "family": "network",
      "epochs": 500,
      "batch_size": 32,
      "lr": 0.0001,
      "huber_delta": 1.0,
      "contrastive_weight": null,
      "margin": null,
      "mining": {
        "covariate_map": "outcome-projection",
        "leading_dims": 2,
        "buckets_per_dim": 20,
        "epsilon_quantile": 0.1,
        "epsilon": null,
        "per_anchor": 1,
        "remine_each_epoch": true
      },
      "architecture": {
        "t_hidden": 32,
        "repr_dim": 32,
        "x_hidden": 32,
        "head_hidden": [64, 32]
      }
    },
    "eval": {
      "model": null,
      "seeds": 1,
      "perturbation_scale": 1.0,
      "draws": 1
    },
    "sweep": {
      "axis": "outcome-noise",
      "grid": null,
      "seeds": 10,
      "variants": ["plain", "contrastive"],
      "svg": false
    },
    "theorem1": {
      "lambda": 1.0,
      "delta_tnc": 2.0,
      "draws": 100000
    }
  })");
}

const char* type_name(const Json& j) {
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number()) return "number";
  return j.type_name();
}

bool compatible(const Json& def, const Json& v) {
  if (def.is_null()) return v.is_null() || v.is_primitive();
  if (def.is_number_unsigned()) return v.is_number_unsigned();
  if (def.is_number()) return v.is_number();
  if (def.is_array()) return v.is_array() || v.is_null();
  return def.type() == v.type();
}

void merge(Json& base, const Json& update, const std::string& prefix) {
  if (!update.is_object()) throw ConfigError("config: '" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (const auto& [key, value] : update.items()) {
    const std::string field = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("config: unknown key '" + field + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      merge(slot, value, field);
    } else if (!compatible(slot, value)) {
      throw ConfigError("config: '" + field + "' must be a " + type_name(slot) + ", got " + value.type_name());
    } else {
      slot = value;
    }
  }
}

template <typename T>
T field(const Json& root, const std::string& dotted) {
  const Json* j = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) j = &j->at(part);
  try {
    return j->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + dotted + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const Json& root, const std::string& dotted) {
  const Json* j = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) j = &j->at(part);
  if (j->is_null()) return std::nullopt;
  return field<T>(root, dotted);
}

/// The merged run document plus typed views of it.
struct RunConfig {
  Json doc = default_config();

  std::uint64_t seed() const { return field<std::uint64_t>(doc, "seed"); }
  std::size_t jobs() const { return field<std::size_t>(doc, "jobs"); }
  fs::path out() const { return field<std::string>(doc, "out"); }
  std::string generator() const { return field<std::string>(doc, "data.generator"); }
  std::optional<std::string> data_path() const { return optional_field<std::string>(doc, "data.path"); }

  scm::ScmParams scm_params() const {
    scm::ScmParams p;
    p.n = field<std::size_t>(doc, "data.n");
    p.dim_causal = field<std::size_t>(doc, "data.dim_causal");
    p.dim_noncausal = field<std::size_t>(doc, "data.dim_noncausal");
    p.alpha = field<double>(doc, "data.alpha");
    p.beta = field<double>(doc, "data.beta");
    p.rho = field<double>(doc, "data.rho");
    p.delta = field<double>(doc, "data.delta");
    p.y_noise_std = field<double>(doc, "data.y_noise_std");
    p.latent_noise_std = field<double>(doc, "data.latent_noise_std");
    p.noncausal_noise_std = optional_field<double>(doc, "data.noncausal_noise_std");
    p.train_fraction = field<double>(doc, "data.train_fraction");
    p.seed = seed();
    if (generator() == "linear") p.dim_causal = p.dim_noncausal = 1;
    return p;
  }

  io::SemiSyntheticParams semi_params() const {
    io::SemiSyntheticParams p;
    p.n = field<std::size_t>(doc, "data.n");
    p.causal_dims = field<std::size_t>(doc, "data.dim_causal");
    p.extra_dims = field<std::size_t>(doc, "data.extra_dims");
    p.coupling = field<double>(doc, "data.coupling");
    p.noise_std = field<double>(doc, "data.augment_noise_std");
    p.y_noise_std = field<double>(doc, "data.y_noise_std");
    p.seed = seed();
    return p;
  }

  model::Family family() const { return model::parse_family(field<std::string>(doc, "train.family")); }

  model::TrainConfig train_config(model::Mode mode) const {
    const bool semi = generator() == "semi-synthetic";
    model::TrainConfig c = semi ? model::TrainConfig::semi_synthetic(mode, seed()) : model::TrainConfig::synthetic(mode, seed());
    c.epochs = field<std::size_t>(doc, "train.epochs");
    c.batch_size = field<std::size_t>(doc, "train.batch_size");
    c.lr = field<double>(doc, "train.lr");
    c.huber_delta = field<double>(doc, "train.huber_delta");
    if (auto w = optional_field<double>(doc, "train.contrastive_weight")) c.contrastive_weight = *w;
    if (auto m = optional_field<double>(doc, "train.margin")) c.margin = *m;

    const std::string map = field<std::string>(doc, "train.mining.covariate_map");
    if (map == "outcome-projection") c.mining.covariate_map = mining::CovariateMap::OutcomeProjection;
    else if (map == "leading-dims") c.mining.covariate_map = mining::CovariateMap::LeadingDims;
    else throw ConfigError("config: 'train.mining.covariate_map' must be outcome-projection or leading-dims");
    c.mining.leading_dims = field<std::size_t>(doc, "train.mining.leading_dims");
    c.mining.buckets_per_dim = field<std::size_t>(doc, "train.mining.buckets_per_dim");
    c.mining.epsilon_quantile = field<double>(doc, "train.mining.epsilon_quantile");
    c.mining.epsilon = optional_field<double>(doc, "train.mining.epsilon");
    c.mining.per_anchor = field<std::size_t>(doc, "train.mining.per_anchor");
    c.mining.remine_each_epoch = field<bool>(doc, "train.mining.remine_each_epoch");

    c.architecture.t_hidden = field<std::size_t>(doc, "train.architecture.t_hidden");
    c.architecture.repr_dim = field<std::size_t>(doc, "train.architecture.repr_dim");
    c.architecture.x_hidden = field<std::size_t>(doc, "train.architecture.x_hidden");
    c.architecture.head_hidden = field<std::vector<std::size_t>>(doc, "train.architecture.head_hidden");
    c.validate();
    return c;
  }

  eval::EvalOptions eval_options() const {
    eval::EvalOptions o;
    o.perturbation_scale = field<double>(doc, "eval.perturbation_scale");
    o.draws = field<std::size_t>(doc, "eval.draws");
    o.jobs = jobs();
    if (!(o.perturbation_scale >= 0.0)) throw ConfigError("config: 'eval.perturbation_scale' must be >= 0");
    if (o.draws < 1) throw ConfigError("config: 'eval.draws' must be >= 1");
    return o;
  }

  std::vector<eval::Variant> variants() const {
    std::vector<eval::Variant> out;
    for (const auto& name : field<std::vector<std::string>>(doc, "sweep.variants")) {
      out.push_back({name, train_config(model::parse_mode(name)), family()});
    }
    return out;
  }

  /// Checks everything that can be checked without touching data.
  void validate() const {
    const std::string g = generator();
    if (g != "synthetic" && g != "linear" && g != "semi-synthetic") {
      throw ConfigError("config: 'data.generator' must be synthetic, linear or semi-synthetic");
    }
    scm_params().validate();
    model::parse_mode(field<std::string>(doc, "train.mode"));
    family();
    train_config(model::Mode::Plain);
    eval_options();
    if (field<std::size_t>(doc, "eval.seeds") < 1) throw ConfigError("config: 'eval.seeds' must be >= 1");
    if (field<std::size_t>(doc, "sweep.seeds") < 1) throw ConfigError("config: 'sweep.seeds' must be >= 1");
    const std::string axis = field<std::string>(doc, "sweep.axis");
    if (axis != "outcome-noise" && axis != "noncausal-noise") {
      throw ConfigError("config: 'sweep.axis' must be outcome-noise or noncausal-noise");
    }
    if (!doc["sweep"]["grid"].is_null()) field<std::vector<double>>(doc, "sweep.grid");
    variants();
    const double lambda = field<double>(doc, "theorem1.lambda");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("config: 'theorem1.lambda' must lie in [0, 1]");
    field<double>(doc, "theorem1.delta_tnc");
    if (field<std::size_t>(doc, "theorem1.draws") < 2) throw ConfigError("config: 'theorem1.draws' must be >= 2");
  }
};

/// Flag values; each one that is set overrides the config file.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;

  std::optional<std::string> generator, data;
  std::optional<std::size_t> n, dim_causal, dim_noncausal;
  std::optional<double> y_noise;

  std::optional<std::string> mode, family;
  std::optional<double> weight, margin, lr;
  std::optional<std::size_t> epochs, batch_size;

  std::optional<std::string> model;
  std::optional<std::size_t> seeds, draws;
  std::optional<double> scale;

  std::optional<std::string> axis;
  std::vector<double> grid;
  bool svg = false;

  std::optional<double> lambda, delta_tnc;
};

RunConfig build_config(const Overrides& o, const std::string& command) {
  RunConfig rc;
  if (o.config_path) {
    Json file;
    try {
      file = Json::parse(io::read_file(*o.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config: cannot parse '" + *o.config_path + "': " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    merge(rc.doc, file, "");
  }
  Json& d = rc.doc;
  if (o.seed) d["seed"] = *o.seed;
  if (o.out) d["out"] = *o.out;
  if (o.jobs) d["jobs"] = *o.jobs;
  if (o.generator) d["data"]["generator"] = *o.generator;
  if (o.data) d["data"]["path"] = *o.data;
  if (o.n) d["data"]["n"] = *o.n;
  if (o.dim_causal) d["data"]["dim_causal"] = *o.dim_causal;
  if (o.dim_noncausal) d["data"]["dim_noncausal"] = *o.dim_noncausal;
  if (o.y_noise) d["data"]["y_noise_std"] = *o.y_noise;
  if (o.mode) d["train"]["mode"] = *o.mode;
  if (o.family) d["train"]["family"] = *o.family;
  if (o.weight) d["train"]["contrastive_weight"] = *o.weight;
  if (o.margin) d["train"]["margin"] = *o.margin;
  if (o.lr) d["train"]["lr"] = *o.lr;
  if (o.epochs) d["train"]["epochs"] = *o.epochs;
  if (o.batch_size) d["train"]["batch_size"] = *o.batch_size;
  if (o.model) d["eval"]["model"] = *o.model;
  if (o.scale) d["eval"]["perturbation_scale"] = *o.scale;
  if (o.seeds) d[command == "sweep" ? "sweep" : "eval"]["seeds"] = *o.seeds;
  if (o.draws) d[command == "theorem1" ? "theorem1" : "eval"]["draws"] = *o.draws;
  if (o.axis) d["sweep"]["axis"] = *o.axis;
  if (!o.grid.empty()) d["sweep"]["grid"] = o.grid;
  if (o.svg) d["sweep"]["svg"] = true;
  if (o.lambda) d["theorem1"]["lambda"] = *o.lambda;
  if (o.delta_tnc) d["theorem1"]["delta_tnc"] = *o.delta_tnc;
  rc.validate();
  return rc;
}

scm::Dataset load_dataset(const RunConfig& rc) {
  if (auto path = rc.data_path()) {
    io::LoadOptions opts;
    opts.split_seed = rc.seed();
    opts.train_fraction = field<double>(rc.doc, "data.train_fraction");
    return io::load_csv(*path, opts);
  }
  const std::string g = rc.generator();
  if (g == "linear") return scm::generate_linear_scm(rc.scm_params());
  if (g == "semi-synthetic") return io::make_semi_synthetic(rc.semi_params());
  return scm::generate_synthetic(rc.scm_params());
}

std::string dataset_hash(const scm::Dataset& ds) {
  std::ostringstream os;
  io::save_csv(ds, os, io::TabularSchema::for_dataset(ds));
  return io::hex64(io::fnv1a(os.str()));
}

/// Collects the files of one run and writes its manifest last.
class Run {
 public:
  Run(const RunConfig& rc, std::string command) : dir_(rc.out()) {
    fs::create_directories(dir_);
    manifest_.command = std::move(command);
    manifest_.config = rc.doc;
  }

  fs::path path(const std::string& name) {
    manifest_.outputs.push_back(name);
    return dir_ / name;
  }

  void write_text(const std::string& name, const std::string& text) {
    const fs::path p = path(name);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + p.string() + "'");
  }

  void write_json(const std::string& name, const Json& j) { io::write_json(j, path(name).string()); }

  io::RunManifest& manifest() { return manifest_; }

  void finish() {
    io::write_manifest(manifest_, (dir_ / "manifest.json").string());
    std::cout << "wrote " << manifest_.outputs.size() << " file(s) and manifest.json to " << dir_.string() << '\n';
  }

 private:
  fs::path dir_;
  io::RunManifest manifest_;
};

Json metrics_json(const eval::SeedMetrics& m) {
  return {{"seed", m.seed}, {"mae", m.mae}, {"rmse", m.rmse}, {"pehe", m.pehe}};
}

Json mining_json(const model::MiningSummary& s) {
  Json j;
  j["epsilon"] = s.epsilon;
  j["bucket_count"] = s.bucket_count;
  j["projection"] = s.projection;
  j["warnings"] = s.warnings;
  return j;
}

std::string training_log_csv(const std::vector<model::EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,huber_loss,triplet_loss,n_triples\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << eval::format_real(e.huber_loss) << ',' << eval::format_real(e.triplet_loss) << ','
       << e.n_triples << '\n';
  }
  return os.str();
}

int cmd_generate(const RunConfig& rc) {
  const scm::Dataset ds = load_dataset(rc);
  Run run(rc, "generate");
  std::ostringstream os;
  io::save_csv(ds, os, io::TabularSchema::for_dataset(ds));
  run.write_text("data.csv", os.str());
  run.manifest().seeds.push_back(rc.seed());
  run.manifest().dataset_hash = io::hex64(io::fnv1a(os.str()));
  run.manifest().derived = {{"rows", ds.size()},
                            {"dim_x", ds.dim_x()},
                            {"dim_t", ds.dim_t()},
                            {"train_rows", ds.train_indices().size()},
                            {"eval_rows", ds.eval_indices().size()}};
  std::cout << "generated " << ds.size() << " rows with " << ds.dim_t() << " treatment columns\n";
  run.finish();
  return exit_codes::kSuccess;
}

int cmd_train(const RunConfig& rc) {
  const scm::Dataset ds = load_dataset(rc);
  const model::Mode mode = model::parse_mode(field<std::string>(rc.doc, "train.mode"));
  const model::TrainConfig cfg = rc.train_config(mode);
  auto result = model::train_family(ds, cfg, rc.family());

  Run run(rc, "train");
  run.manifest().seeds.push_back(rc.seed());
  run.manifest().dataset_hash = dataset_hash(ds);
  run.manifest().derived = {{"status", result.status == model::TrainStatus::Completed ? "completed" : "diverged"},
                            {"epochs_run", result.log.size()},
                            {"contrastive_weight", cfg.contrastive_weight},
                            {"margin", cfg.margin},
                            {"mining", mining_json(result.mining)}};
  run.write_text("train_log.csv", training_log_csv(result.log));
  io::save_model(result.model, run.path("model.bin").string());

  if (result.status != model::TrainStatus::Completed) {
    run.manifest().derived["message"] = result.message;
    run.finish();
    throw TrainingError("training diverged: " + result.message);
  }
  if (ds.has_latents()) {
    const eval::SeedMetrics m = eval::evaluate_model(result.model, ds, rc.seed(), rc.eval_options());
    run.write_json("metrics.json", metrics_json(m));
    std::cout << "mae " << eval::format_real(m.mae) << " rmse " << eval::format_real(m.rmse) << " pehe "
              << eval::format_real(m.pehe) << '\n';
  } else {
    const eval::ErrorMetrics e = eval::mae_rmse(result.model, ds);
    run.write_json("metrics.json", Json{{"seed", rc.seed()}, {"mae", e.mae}, {"rmse", e.rmse}});
    std::cout << "mae " << eval::format_real(e.mae) << " rmse " << eval::format_real(e.rmse) << '\n';
  }
  run.finish();
  return exit_codes::kSuccess;
}

int cmd_eval(const RunConfig& rc) {
  const scm::Dataset ds = load_dataset(rc);
  const eval::EvalOptions opts = rc.eval_options();
  std::string label;
  std::vector<eval::SeedMetrics> per_seed;

  if (auto path = optional_field<std::string>(rc.doc, "eval.model")) {
    const model::AnyModel m = io::load_model(*path);
    if (m.dim_x() != ds.dim_x() || m.dim_t() != ds.dim_t()) {
      throw SchemaError("model '" + *path + "' does not match the dataset dimensions");
    }
    label = "model";
    per_seed.push_back(eval::evaluate_model(m, ds, rc.seed(), opts));
  } else {
    const std::string mode = field<std::string>(rc.doc, "train.mode");
    const eval::Variant variant{mode, rc.train_config(model::parse_mode(mode)), rc.family()};
    const auto seeds = eval::seed_range(field<std::size_t>(rc.doc, "eval.seeds"), rc.seed());
    per_seed.resize(seeds.size());
    eval::parallel_for(seeds.size(), opts.jobs, [&](std::size_t i) {
      per_seed[i] = eval::train_and_evaluate(variant, ds, seeds[i], opts);
    });
    label = mode;
  }
  const eval::MetricsReport report = eval::aggregate(per_seed);

  Run run(rc, "eval");
  for (const auto& s : report.per_seed) run.manifest().seeds.push_back(s.seed);
  run.manifest().dataset_hash = dataset_hash(ds);
  std::ostringstream csv;
  eval::write_metrics_csv(csv, label, report);
  run.write_text("metrics.csv", csv.str());
  run.write_json("metrics.json", eval::to_json(report));

  std::cout << label << ": mae " << eval::format_real(report.mae) << " rmse " << eval::format_real(report.rmse)
            << " pehe " << eval::format_real(report.pehe);
  if (report.pehe_stderr) std::cout << " (stderr " << eval::format_real(*report.pehe_stderr) << ")";
  std::cout << '\n';
  run.finish();
  return exit_codes::kSuccess;
}

int cmd_sweep(const RunConfig& rc) {
  const std::string axis = field<std::string>(rc.doc, "sweep.axis");
  const auto seeds = eval::seed_range(field<std::size_t>(rc.doc, "sweep.seeds"), rc.seed());
  const auto variants = rc.variants();
  const eval::EvalOptions opts = rc.eval_options();
  auto grid = optional_field<std::vector<double>>(rc.doc, "sweep.grid");

  eval::SweepResult result;
  std::string hash;
  if (axis == "outcome-noise") {
    if (rc.data_path() || rc.generator() != "synthetic") {
      throw ConfigError("config: 'sweep.axis' outcome-noise needs data.generator synthetic and no data.path");
    }
    result = eval::irreducible_sweep(variants, rc.scm_params(), grid.value_or(scm::outcome_noise_grid()), seeds, opts);
  } else {
    const scm::Dataset ds = load_dataset(rc);
    hash = dataset_hash(ds);
    result = eval::reducible_sweep(variants, ds, grid.value_or(eval::default_reducible_grid()), seeds, opts);
  }

  Run run(rc, "sweep");
  for (auto s : seeds) run.manifest().seeds.push_back(s);
  run.manifest().dataset_hash = hash;
  std::ostringstream csv;
  eval::write_long_csv(csv, result);
  run.write_text("sweep.csv", csv.str());
  run.write_json("sweep.json", eval::to_json(result));
  if (field<bool>(rc.doc, "sweep.svg")) run.write_text("sweep.svg", eval::sweep_svg(result));

  for (std::size_t a = 0; a < result.axis_values.size(); ++a) {
    std::cout << result.axis_name << "=" << eval::format_real(result.axis_values[a]);
    for (const auto& v : result.variants) {
      const auto& c = result.cell(v, a);
      std::cout << "  " << v << " pehe " << (c.report ? eval::format_real(c.report->pehe) : std::string("failed"));
    }
    std::cout << '\n';
  }
  run.finish();
  return exit_codes::kSuccess;
}

int cmd_theorem1(const RunConfig& rc) {
  scm::ScmParams p = rc.scm_params();
  const double lambda = field<double>(rc.doc, "theorem1.lambda");
  const double delta_tnc = field<double>(rc.doc, "theorem1.delta_tnc");
  const auto draws = field<std::size_t>(rc.doc, "theorem1.draws");
  nn::Rng rng(rc.seed());
  const eval::Theorem1Report r = eval::theorem1_report(p, lambda, delta_tnc, draws, rng);

  Json j;
  j["lambda"] = lambda;
  j["delta_tnc"] = delta_tnc;
  j["analytic"] = {{"conditional_mean_gap", r.analytic.conditional_mean_gap},
                   {"intervention_gap", r.analytic.intervention_gap}};
  j["monte_carlo"] = {{"draws", r.monte_carlo.draws},
                      {"conditional_mean_gap", r.monte_carlo.estimate.conditional_mean_gap},
                      {"conditional_mean_se", r.monte_carlo.conditional_mean_se},
                      {"intervention_gap", r.monte_carlo.estimate.intervention_gap},
                      {"intervention_se", r.monte_carlo.intervention_se}};
  j["within_3se"] = r.conditional_mean_within(3.0) && r.intervention_within(3.0);

  Run run(rc, "theorem1");
  run.manifest().seeds.push_back(rc.seed());
  run.write_json("theorem1.json", j);
  std::cout << "analytic intervention gap " << eval::format_real(r.analytic.intervention_gap) << ", monte carlo "
            << eval::format_real(r.monte_carlo.estimate.intervention_gap) << " +- "
            << eval::format_real(r.monte_carlo.intervention_se) << '\n';
  run.finish();
  return exit_codes::kSuccess;
}

int cmd_probe(const RunConfig& rc) {
  const scm::Dataset ds = load_dataset(rc);
  if (!ds.has_latents()) throw UnsupportedError("probe: dataset carries no latent columns");
  model::AnyModel m;
  if (auto path = optional_field<std::string>(rc.doc, "eval.model")) {
    m = io::load_model(*path);
    if (m.dim_t() != ds.dim_t()) throw SchemaError("model '" + *path + "' does not match the dataset dimensions");
  } else {
    const model::Mode mode = model::parse_mode(field<std::string>(rc.doc, "train.mode"));
    auto result = model::train_family(ds, rc.train_config(mode), rc.family());
    if (result.status != model::TrainStatus::Completed) throw TrainingError("training diverged: " + result.message);
    m = std::move(result.model);
  }
  const auto rows = ds.eval_indices();
  const eval::ProbeResult probe = eval::identifiability_probe(m, ds, rows);
  nn::Rng rng = nn::Rng(rc.seed()).split(23);
  const double ratio =
      eval::representation_invariance_ratio(m, ds, rows, field<double>(rc.doc, "eval.perturbation_scale"), rng);

  Run run(rc, "probe");
  run.manifest().seeds.push_back(rc.seed());
  run.manifest().dataset_hash = dataset_hash(ds);
  run.write_json("probe.json",
                 Json{{"r2_causal", probe.r2_causal}, {"r2_noncausal", probe.r2_noncausal}, {"invariance_ratio", ratio}});
  std::cout << "r2_causal " << eval::format_real(probe.r2_causal) << " r2_noncausal "
            << eval::format_real(probe.r2_noncausal) << " invariance_ratio " << eval::format_real(ratio) << '\n';
  run.finish();
  return exit_codes::kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive CATE estimation: data generation, training, evaluation and sweeps"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;

  app.add_option("--config", o.config_path, "JSON run configuration");
  app.add_option("--seed", o.seed, "Base seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");

  auto data_flags = [&](CLI::App* c) {
    c->add_option("--generator", o.generator, "synthetic, linear or semi-synthetic");
    c->add_option("--data", o.data, "Load this CSV instead of generating");
    c->add_option("--n", o.n, "Rows to generate");
    c->add_option("--dim-causal", o.dim_causal, "Causal treatment dimensions");
    c->add_option("--dim-noncausal", o.dim_noncausal, "Non-causal treatment dimensions");
    c->add_option("--y-noise", o.y_noise, "Outcome noise std");
  };
  auto train_flags = [&](CLI::App* c) {
    c->add_option("--mode", o.mode, "plain or contrastive");
    c->add_option("--family", o.family, "network or linear");
    c->add_option("--weight", o.weight, "Triplet loss weight");
    c->add_option("--margin", o.margin, "Triplet margin");
    c->add_option("--epochs", o.epochs, "Training epochs");
    c->add_option("--batch-size", o.batch_size, "Minibatch size");
    c->add_option("--lr", o.lr, "Adam learning rate");
  };

  CLI::App* gen = app.add_subcommand("generate", "Write a generated dataset as CSV");
  data_flags(gen);

  CLI::App* train = app.add_subcommand("train", "Train a model and save a snapshot and log");
  data_flags(train);
  train_flags(train);
  train->add_option("--scale", o.scale, "Perturbation std for PEHE");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a snapshot, or train and evaluate over seeds");
  data_flags(ev);
  train_flags(ev);
  ev->add_option("--model", o.model, "Snapshot to evaluate");
  ev->add_option("--seeds", o.seeds, "Number of seeds when training");
  ev->add_option("--scale", o.scale, "Perturbation std for PEHE");
  ev->add_option("--draws", o.draws, "Perturbations per eval row");

  CLI::App* sw = app.add_subcommand("sweep", "Compare variants along a noise axis");
  data_flags(sw);
  train_flags(sw);
  sw->add_option("--axis", o.axis, "outcome-noise or noncausal-noise");
  sw->add_option("--grid", o.grid, "Axis values")->delimiter(',');
  sw->add_option("--seeds", o.seeds, "Seeds per grid point");
  sw->add_flag("--svg", o.svg, "Also write sweep.svg");

  CLI::App* th = app.add_subcommand("theorem1", "Analytic and simulated gaps of a biased predictor family");
  data_flags(th);
  th->add_option("--lambda", o.lambda, "Weight on the non-causal block, in [0, 1]");
  th->add_option("--delta-tnc", o.delta_tnc, "Shift applied to the non-causal latent");
  th->add_option("--draws", o.draws, "Monte Carlo draws");

  CLI::App* pr = app.add_subcommand("probe", "Linear probes of the treatment representation");
  data_flags(pr);
  train_flags(pr);
  pr->add_option("--model", o.model, "Snapshot to probe");
  pr->add_option("--scale", o.scale, "Perturbation std for the invariance ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_codes::kSuccess : exit_codes::kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig rc = build_config(o, command);
    if (command == "generate") return cmd_generate(rc);
    if (command == "train") return cmd_train(rc);
    if (command == "eval") return cmd_eval(rc);
    if (command == "sweep") return cmd_sweep(rc);
    if (command == "theorem1") return cmd_theorem1(rc);
    return cmd_probe(rc);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_codes::kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_codes::kNumeric;
  }
}
