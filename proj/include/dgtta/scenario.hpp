#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dgtta/config.hpp"
#include "dgtta/report.hpp"

namespace dgtta {

/// [scenario] section of a run configuration.
struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path data_dir;  ///< existing data; empty generates from [phantom]
  std::string source_domain = "domain_a";
  std::string target_domain = "domain_b";
  std::vector<Pipeline> pipelines{Pipeline::Plain, Pipeline::GinSsc};
  std::vector<std::string> stages{"BS", "+A"};  ///< BS, +A, +A-nor, +A-enc, Tent
  bool in_domain = true;                        ///< also score source-domain test cases (stage BS-source)
  std::vector<int> classes;                     ///< empty: every foreground class
  std::string reference;                        ///< "method" or "method/stage" for significance stars
  int workers = 1;

  static ScenarioConfig from_document(const KeyValueDocument& doc);
  void validate() const;
};

/// Param group adapted for a "+A*" stage; throws ConfigError for unknown stages.
ParamGroup stage_param_group(const std::string& stage);

struct ScenarioResult {
  std::filesystem::path report_dir;
  ScoreTable scores;
};

/// generate/load data -> pretrain per pipeline -> predict BS -> adapt and
/// predict each adaptation stage -> evaluate -> report. Every artifact
/// directory under `out` receives one manifest.txt. Failures are rethrown with
/// the stage name prefixed and earlier artifacts left in place.
ScenarioResult run_scenario(const RunConfig& run, const ScenarioConfig& scenario, const std::filesystem::path& out,
                            const std::string& command_line = "");

}  // namespace dgtta
