#pragma once

#include <filesystem>

#include "dgtta/gin.hpp"
#include "dgtta/kvdoc.hpp"
#include "dgtta/pretrain.hpp"
#include "dgtta/spatial.hpp"
#include "dgtta/ssc.hpp"
#include "dgtta/synth.hpp"
#include "dgtta/tta.hpp"

namespace dgtta {

/// Every tunable of a run, read from one sectioned key-value file. Missing
/// sections and keys keep their defaults; unknown keys are rejected.
struct RunConfig {
  SegModelConfig model;
  GinConfig gin;
  SscConfig ssc;
  SpatialConfig spatial;
  PretrainConfig pretrain;
  AdaptationConfig tta;
  TentConfig tent;
  PhantomConfig phantom;

  /// Sections this struct does not own (e.g. [scenario]) are left to callers.
  static RunConfig from_document(const KeyValueDocument& doc);
  static RunConfig load(const std::filesystem::path& path);
  KeyValueDocument to_document() const;
  void validate() const;
};

void write_section(KeyValueDocument& doc, const SegModelConfig& c);
void write_section(KeyValueDocument& doc, const GinConfig& c);
void write_section(KeyValueDocument& doc, const SscConfig& c);
void write_section(KeyValueDocument& doc, const SpatialConfig& c);
void write_section(KeyValueDocument& doc, const PretrainConfig& c);
void write_section(KeyValueDocument& doc, const AdaptationConfig& c);
void write_section(KeyValueDocument& doc, const TentConfig& c);
void write_section(KeyValueDocument& doc, const PhantomConfig& c);

/// Section names owned by RunConfig.
const std::vector<std::string>& run_config_sections();

}  // namespace dgtta
