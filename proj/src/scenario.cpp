#include "dgtta/scenario.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>

#include "dgtta/error.hpp"
#include "dgtta/io.hpp"

namespace dgtta {

ScenarioConfig ScenarioConfig::from_document(const KeyValueDocument& doc) {
  ScenarioConfig s;
  SectionReader r(doc, "scenario");
  s.name = r.get_string("name", s.name);
  s.data_dir = r.get_string("data_dir", "");
  s.source_domain = r.get_string("source_domain", s.source_domain);
  s.target_domain = r.get_string("target_domain", s.target_domain);
  auto split = [](const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + ",") {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur += c;
      }
    }
    return out;
  };
  if (auto p = doc.find("scenario", "pipelines")) {
    r.get_string("pipelines", "");
    s.pipelines.clear();
    for (const auto& name : split(*p)) s.pipelines.push_back(parse_pipeline(name));
  }
  if (auto st = doc.find("scenario", "stages")) {
    r.get_string("stages", "");
    s.stages = split(*st);
  }
  s.in_domain = r.get_bool("in_domain", s.in_domain);
  const auto classes = r.get_string("classes", "");
  if (!classes.empty() && classes != "all") {
    try {
      s.classes = parse_int_list(classes);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("[scenario] classes: ") + e.what());
    }
  }
  s.reference = r.get_string("reference", s.reference);
  s.workers = static_cast<int>(r.get_int("workers", s.workers));
  r.reject_unknown();
  s.validate();
  return s;
}

ParamGroup stage_param_group(const std::string& stage) {
  if (stage == "+A") return ParamGroup::All;
  if (stage == "+A-nor") return ParamGroup::Norm;
  if (stage == "+A-enc") return ParamGroup::Encoder;
  throw ConfigError("stage '" + stage + "' is not an adaptation stage");
}

void ScenarioConfig::validate() const {
  if (pipelines.empty()) throw ConfigError("[scenario] needs at least one pipeline");
  if (stages.empty()) throw ConfigError("[scenario] needs at least one stage");
  for (const auto& st : stages) {
    if (st != "BS" && st != "Tent") stage_param_group(st);
  }
  if (workers < 1) throw ConfigError("[scenario] workers must be >= 1");
  if (source_domain == target_domain) throw ConfigError("[scenario] source and target domain must differ");
}

namespace {

std::string stage_dir(const std::string& stage) {
  std::string out;
  for (char c : stage) {
    if (c != '+') out += c;
  }
  return out;
}

// Runs fn; errors resurface with the stage name prepended and their category kept.
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.category(), "stage '" + stage + "' failed: " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCategory::Data, "stage '" + stage + "' failed: " + e.what());
  }
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

ScenarioResult run_scenario(const RunConfig& run, const ScenarioConfig& sc, const std::filesystem::path& out,
                            const std::string& command_line) {
  sc.validate();
  std::filesystem::create_directories(out);
  RunManifest manifest;
  manifest.command_line = command_line;
  manifest.config_snapshot = run.to_document();
  manifest.seeds = {{"model", std::to_string(run.model.seed)},
                    {"pretrain", std::to_string(run.pretrain.seed)},
                    {"tta", std::to_string(run.tta.seed)},
                    {"phantom", std::to_string(run.phantom.seed)}};
  const Timer total;

  std::filesystem::path data_dir = sc.data_dir;
  if (data_dir.empty()) {
    data_dir = out / "data";
    in_stage("synth-gen", [&] {
      const Timer t;
      const auto data = generate(run.phantom, sc.workers);
      RunManifest m = manifest;
      write_phantom(data, run.phantom, data_dir, &m);
      manifest.timings_s.push_back({"synth_gen", t.seconds()});
      return 0;
    });
  }
  const auto data_info = in_stage("load-data", [&] { return read_data_manifest(data_dir); });
  std::vector<int> classes = sc.classes;
  if (classes.empty()) {
    for (int c = 1; c < data_info.num_classes; ++c) classes.push_back(c);
  }

  ScoreTable scores;
  for (Pipeline pipeline : sc.pipelines) {
    const std::string method = to_string(pipeline);
    const auto ckpt_dir = out / "checkpoints" / method;
    Checkpoint ckpt = in_stage("pretrain:" + method, [&] {
      const Timer t;
      const Dataset train = load_split(data_dir, sc.source_domain, "train");
      SegModelConfig mc = run.model;
      mc.in_channels = pipeline_channels(pipeline);
      mc.num_classes = std::max(mc.num_classes, data_info.num_classes);
      PretrainConfig pc = run.pretrain;
      pc.pipeline = pipeline;
      Checkpoint c = pretrain(SegModel(mc), train, pc, run.gin, run.ssc);
      RunManifest m = manifest;
      manifest.timings_s.push_back({"pretrain_" + method, t.seconds()});
      save_checkpoint(c, ckpt_dir, &m);
      manifest.checkpoint_hashes.push_back({method, sha256_file(ckpt_dir / "params.bin")});
      return c;
    });
    const PatchSpec spec = inference_spec(ckpt.manifest);

    auto predict_split = [&](const std::string& domain, const std::string& stage) {
      const auto dir = out / "predictions" / method / (domain == sc.source_domain ? "BS-source" : stage_dir(stage));
      std::filesystem::create_directories(dir);
      const Dataset test = load_split(data_dir, domain, "test", false);
      const Timer t;
      for (const auto& s : test.samples) {
        LabelMap pred;
        if (stage == "BS") {
          pred = ensemble_predict({&ckpt}, s.image, spec);
        } else if (stage == "Tent") {
          const Volume input = ckpt.manifest.input.prepare(s.image);
          TentConfig tc = run.tent;
          Checkpoint adapted(ckpt.manifest, tent_adapt(ckpt.model, input, ckpt.manifest.patch_size, tc).model);
          pred = ensemble_predict({&adapted}, s.image, spec);
        } else {
          AdaptationConfig ac = run.tta;
          ac.param_group = stage_param_group(stage);
          auto members = adapt_ensemble(ckpt, s.image, ac, sc.workers);
          std::vector<Checkpoint> adapted;
          for (auto& r : members) adapted.emplace_back(ckpt.manifest, std::move(r.model));
          std::vector<Checkpoint*> ptrs;
          for (auto& a : adapted) ptrs.push_back(&a);
          pred = ensemble_predict(ptrs, s.image, spec);
          for (std::size_t k = 0; k < members.size(); ++k) {
            std::ofstream trace(dir / (s.id + "_trace_m" + std::to_string(k) + ".csv"));
            for (std::size_t i = 0; i < members[k].loss_trace.size(); ++i) {
              trace << i + 1 << ',' << format_double(members[k].loss_trace[i]) << '\n';
            }
          }
        }
        save_labels(pred, dir / (s.id + "_label"));
      }
      RunManifest m = manifest;
      m.timings_s.push_back({"predict", t.seconds()});
      KeyValueDocument extra;
      extra.set("predictions", "method", method);
      extra.set("predictions", "stage", stage);
      extra.set("predictions", "domain", domain);
      extra.set("predictions", "checkpoint", sha256_file(ckpt_dir / "params.bin"));
      m.write(dir, extra);
      const std::string label = domain == sc.source_domain ? "BS-source" : stage;
      manifest.timings_s.push_back({"predict_" + method + "_" + stage_dir(label), t.seconds()});
      auto rows = evaluate_directory(dir, data_dir / domain, classes, method, label);
      scores.insert(scores.end(), rows.begin(), rows.end());
    };

    if (sc.in_domain) in_stage("predict-source:" + method, [&] { predict_split(sc.source_domain, "BS"); return 0; });
    for (const auto& stage : sc.stages) {
      in_stage((stage == "BS" ? "predict:" : "tta:") + method + ":" + stage, [&] {
        predict_split(sc.target_domain, stage);
        return 0;
      });
    }
  }

  const auto report_dir = out / "report";
  in_stage("report", [&] {
    write_scores(scores, out / "scores.csv");
    write_report(scores, report_dir, sc.reference);
    RunManifest m = manifest;
    KeyValueDocument extra;
    extra.set("report", "scores", "../scores.csv");
    m.write(report_dir, extra);
    return 0;
  });
  manifest.timings_s.push_back({"total", total.seconds()});
  KeyValueDocument extra;
  extra.set("scenario", "name", sc.name);
  extra.set("scenario", "data_dir", data_dir.string());
  manifest.write(out, extra);
  return {report_dir, std::move(scores)};
}

}  // namespace dgtta
