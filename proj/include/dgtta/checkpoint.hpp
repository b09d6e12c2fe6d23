#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dgtta/kvdoc.hpp"
#include "dgtta/manifest.hpp"
#include "dgtta/segnet.hpp"
#include "dgtta/ssc.hpp"

namespace dgtta {

enum class Pipeline { Plain, Gin, Ssc, GinSsc };

Pipeline parse_pipeline(const std::string& name);
std::string to_string(Pipeline p);
inline bool uses_gin(Pipeline p) { return p == Pipeline::Gin || p == Pipeline::GinSsc; }
inline bool uses_ssc(Pipeline p) { return p == Pipeline::Ssc || p == Pipeline::GinSsc; }
inline int pipeline_channels(Pipeline p) { return uses_ssc(p) ? static_cast<int>(kSscChannels) : 1; }

/// "volume": z-score each volume on its own. "dataset": subtract and divide by
/// fixed statistics measured on the training set and stored with the model.
enum class Normalization { Volume, Dataset };

Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization n);

/// Inference-time preprocessing a model was trained with. GIN is a training
/// augmentation and never part of it.
struct InputPipeline {
  Pipeline pipeline = Pipeline::Plain;
  Normalization normalization = Normalization::Volume;
  double dataset_mean = 0.0;
  double dataset_std = 1.0;
  SscConfig ssc;

  int channels() const { return pipeline_channels(pipeline); }
  Volume normalize(const Volume& raw) const;
  /// Intensity normalization followed by SSC when the pipeline uses it.
  Volume prepare(const Volume& raw) const;
  /// SSC on an already normalized volume, or a copy when the pipeline has none.
  Volume describe(const Volume& normalized) const;

  bool operator==(const InputPipeline&) const = default;
};

struct ModelManifest {
  SegModelConfig model;
  InputPipeline input;
  Shape3 patch_size{64, 64, 64};
  std::string pretrain_config_hash;
  std::uint64_t pretrain_seed = 0;
  std::string source_domain;

  /// ConfigError unless the model channel count matches the input pipeline.
  void validate() const;
  void append_to(KeyValueDocument& doc) const;
  static ModelManifest from_document(const KeyValueDocument& doc);
};

struct Checkpoint {
  ModelManifest manifest;
  SegModel model;

  explicit Checkpoint(const ModelManifest& m) : manifest(m), model(m.model) {}
  Checkpoint(const ModelManifest& m, SegModel net) : manifest(m), model(std::move(net)) {}
};

/// Writes dir/manifest.txt and dir/params.bin. The manifest records the
/// SHA-256 of params.bin and, when given, the run provenance.
void save_checkpoint(Checkpoint& ckpt, const std::filesystem::path& dir, const RunManifest* run = nullptr);
/// Verifies the payload hash and tensor names/sizes; FormatError on mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// ConfigError when two manifests disagree on classes or input pipeline.
void require_compatible(const ModelManifest& a, const ModelManifest& b);

/// Bit-exact parameter and buffer equality.
bool same_weights(SegModel& a, SegModel& b);

}  // namespace dgtta
