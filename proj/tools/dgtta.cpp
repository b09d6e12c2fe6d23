#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "dgtta/config.hpp"
#include "dgtta/error.hpp"
#include "dgtta/io.hpp"
#include "dgtta/report.hpp"
#include "dgtta/scenario.hpp"

using namespace dgtta;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::InvalidArgument:
    case ErrorCategory::Configuration: return 2;
    case ErrorCategory::Numerical: return 4;
    default: return 3;
  }
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> gin_seed;
  int workers = 1;
  std::string device = "cpu";
  bool verbose = false;
  std::string command_line;
};

RunConfig load_config(const std::string& path, const Globals& g) {
  RunConfig c = path.empty() ? RunConfig{} : RunConfig::load(path);
  if (g.seed) {
    c.model.seed = c.pretrain.seed = c.tta.seed = c.tent.seed = c.phantom.seed = c.gin.seed = *g.seed;
  }
  if (g.gin_seed) c.gin.seed = *g.gin_seed;
  return c;
}

RunManifest base_manifest(const RunConfig& c, const Globals& g) {
  RunManifest m;
  m.command_line = g.command_line;
  m.config_snapshot = c.to_document();
  return m;
}

void write_trace(const fs::path& path, const std::vector<double>& loss) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < loss.size(); ++i) out << i + 1 << ',' << format_double(loss[i]) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-generalized pre-training and test-time adaptation for 3D segmentation"};
  app.require_subcommand(1);
  Globals g;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
  std::uint64_t seed_value = 0, gin_seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override every RNG seed of the run");
  auto* gin_seed_opt = app.add_option("--gin-seed", gin_seed_value, "Override the [gin] seed");
  app.add_option("--workers", g.workers, "Worker threads for per-case work")->check(CLI::PositiveNumber);
  app.add_option("--device", g.device, "Compute device (only cpu is supported)");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  std::string config, out, data, domain = "domain_a", pipeline, trace, split = "test";
  std::vector<std::string> ckpts;
  std::string input, classes, param_group = "all", pred, ref, method = "model", stage = "BS", scores, reference;
  int steps = -1, patches = -1, ensemble = -1;
  double lr = -1.0;

  auto* synth = app.add_subcommand("synth-gen", "Generate the paired synthetic benchmark");
  synth->add_option("--config", config, "Run configuration ([phantom], [domain_a], [domain_b])");
  synth->add_option("--out", out, "Output data directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Supervised pre-training on source-domain data");
  pre->add_option("--config", config, "Run configuration");
  pre->add_option("--data", data, "Data directory from synth-gen")->required();
  pre->add_option("--domain", domain, "Source domain tag");
  pre->add_option("--pipeline", pipeline, "plain, gin, ssc or gin_ssc (overrides [pretrain])");
  pre->add_option("--out", out, "Checkpoint directory")->required();
  pre->add_option("--trace", trace, "Write epoch,loss lines here");

  auto* predict = app.add_subcommand("predict", "Sliding-window inference with one or more checkpoints");
  predict->add_option("--ckpt", ckpts, "Checkpoint directory (repeat for an ensemble)")->required();
  predict->add_option("--input", input, "Single volume to segment");
  predict->add_option("--data", data, "Data directory (segments a whole split)");
  predict->add_option("--domain", domain, "Domain tag with --data");
  predict->add_option("--split", split, "train, test or all with --data");
  predict->add_option("--out", out, "Output label file (--input) or directory (--data)")->required();

  auto* tta = app.add_subcommand("tta", "Consistency-based test-time adaptation of one target volume");
  tta->add_option("--config", config, "Run configuration ([tta], [spatial])");
  tta->add_option("--ckpt", ckpts, "Pre-trained checkpoint directory")->required()->expected(1);
  tta->add_option("--target", input, "Target volume")->required();
  tta->add_option("--classes", classes, "Comma-separated class subset");
  tta->add_option("--param-group", param_group, "norm, encoder, decoder or all");
  tta->add_option("--steps", steps, "Optimizer steps");
  tta->add_option("--patches", patches, "Patches accumulated per step");
  tta->add_option("--ensemble", ensemble, "Ensemble members");
  tta->add_option("--lr", lr, "Learning rate");
  tta->add_option("--out", out, "Output label file")->required();
  tta->add_option("--trace", trace, "Write step,loss lines (mean over members)");
  std::string save_models;
  tta->add_option("--save-models", save_models, "Directory receiving the adapted checkpoints");

  auto* evaluate = app.add_subcommand("evaluate", "Dice and HD95 of predictions against references");
  evaluate->add_option("--pred", pred, "Directory of <case>_label predictions")->required();
  evaluate->add_option("--ref", ref, "Directory of <case>_label references")->required();
  evaluate->add_option("--classes", classes, "Comma-separated classes")->required();
  evaluate->add_option("--method", method, "Method name for the score rows");
  evaluate->add_option("--stage", stage, "Stage name for the score rows");
  evaluate->add_option("--out", out, "Score CSV")->required();

  auto* report = app.add_subcommand("report", "Summary table and box plots from a score CSV");
  report->add_option("--scores", scores, "Score CSV (several are concatenated)")->required();
  report->add_option("--out", out, "Report directory")->required();
  report->add_option("--reference", reference, "Method or method/stage for significance tests");

  auto* desc = app.add_subcommand("descriptor", "12-channel SSC descriptor of a single-channel volume");
  desc->add_option("--config", config, "Run configuration ([ssc])");
  desc->add_option("--in", input, "Input volume")->required();
  desc->add_option("--out", out, "Output volume")->required();

  auto* scen = app.add_subcommand("run-scenario", "Generate, pre-train, adapt, evaluate and report");
  scen->add_option("--config", config, "Run configuration with a [scenario] section")->required();
  scen->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed_value;
  if (*gin_seed_opt) g.gin_seed = gin_seed_value;
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (g.device != "cpu") throw ConfigError("device '" + g.device + "' is not available; only cpu is supported");

    if (*synth) {
      const RunConfig c = load_config(config, g);
      const auto d = generate(c.phantom, g.workers);
      const auto m = base_manifest(c, g);
      write_phantom(d, c.phantom, out, &m);
      spdlog::info("wrote {} samples per domain to {}", c.phantom.num_samples(), out);
    } else if (*pre) {
      RunConfig c = load_config(config, g);
      if (!pipeline.empty()) c.pretrain.pipeline = parse_pipeline(pipeline);
      const Dataset train = load_split(data, domain, "train");
      SegModelConfig mc = c.model;
      mc.in_channels = pipeline_channels(c.pretrain.pipeline);
      PretrainLog log;
      Checkpoint ck = pretrain(SegModel(mc), train, c.pretrain, c.gin, c.ssc, &log);
      auto m = base_manifest(c, g);
      m.seeds = {{"model", std::to_string(mc.seed)}, {"pretrain", std::to_string(c.pretrain.seed)}};
      save_checkpoint(ck, out, &m);
      if (!trace.empty()) write_trace(trace, log.epoch_loss);
    } else if (*predict) {
      std::vector<Checkpoint> models;
      for (const auto& p : ckpts) models.push_back(load_checkpoint(p));
      std::vector<Checkpoint*> ptrs;
      for (auto& m : models) ptrs.push_back(&m);
      const PatchSpec spec = inference_spec(models[0].manifest);
      if (!input.empty() == !data.empty()) throw InvalidArgument("give exactly one of --input or --data");
      if (!input.empty()) {
        save_labels(ensemble_predict(ptrs, load_volume(input), spec), out);
      } else {
        const Dataset ds = load_split(data, domain, split, false);
        for (const auto& s : ds.samples) save_labels(ensemble_predict(ptrs, s.image, spec), fs::path(out) / (s.id + "_label"));
        RunManifest m;
        m.command_line = g.command_line;
        for (const auto& p : ckpts) m.checkpoint_hashes.push_back({p, sha256_file(fs::path(p) / "params.bin")});
        m.write(out);
      }
    } else if (*tta) {
      RunConfig c = load_config(config, g);
      AdaptationConfig ac = c.tta;
      ac.spatial = c.spatial;
      if (!classes.empty()) ac.class_subset = parse_int_list(classes);
      if (tta->count("--param-group")) ac.param_group = nn::parse_param_group(param_group);
      if (steps >= 0) ac.num_steps = steps;
      if (patches >= 0) ac.patches_per_step = patches;
      if (ensemble >= 0) ac.ensemble_size = ensemble;
      if (lr > 0) ac.learning_rate = lr;
      const Checkpoint base = load_checkpoint(ckpts.at(0));
      const Volume target = load_volume(input);
      auto members = adapt_ensemble(base, target, ac, g.workers);
      std::vector<Checkpoint> adapted;
      for (auto& r : members) adapted.emplace_back(base.manifest, std::move(r.model));
      std::vector<Checkpoint*> ptrs;
      for (auto& a : adapted) ptrs.push_back(&a);
      save_labels(ensemble_predict(ptrs, target, inference_spec(base.manifest)), out);
      if (!trace.empty()) {
        std::vector<double> mean(members[0].loss_trace.size(), 0.0);
        for (const auto& r : members)
          for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r.loss_trace[i] / static_cast<double>(members.size());
        write_trace(trace, mean);
      }
      if (!save_models.empty()) {
        auto m = base_manifest(c, g);
        for (std::size_t i = 0; i < adapted.size(); ++i) {
          m.seeds = {{"tta", std::to_string(ac.seed + i)}};
          save_checkpoint(adapted[i], fs::path(save_models) / ("member_" + std::to_string(i)), &m);
        }
      }
      spdlog::info("adapted {} member(s), {} step(s) each", members.size(), members[0].optimizer_steps);
    } else if (*evaluate) {
      write_scores(evaluate_directory(pred, ref, parse_int_list(classes), method, stage), out);
    } else if (*report) {
      write_report(read_scores(scores), out, reference);
      RunManifest m;
      m.command_line = g.command_line;
      m.write(out);
    } else if (*desc) {
      const RunConfig c = load_config(config, g);
      save_volume(ssc_descriptor(load_volume(input), c.ssc), out);
    } else if (*scen) {
      const auto doc = KeyValueDocument::read(config);
      const RunConfig c = load_config(config, g);
      ScenarioConfig sc = ScenarioConfig::from_document(doc);
      if (app.count("--workers")) sc.workers = g.workers;
      const auto result = run_scenario(c, sc, out, g.command_line);
      spdlog::info("report written to {}", result.report_dir.string());
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
