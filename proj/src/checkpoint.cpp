#include "dgtta/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dgtta/error.hpp"

namespace dgtta {

namespace {
constexpr char kMagic[8] = {'D', 'G', 'T', 'T', 'A', 'C', 'K', 'P'};
constexpr std::uint32_t kPayloadVersion = 1;
constexpr const char* kParamsFile = "params.bin";
}  // namespace

Pipeline parse_pipeline(const std::string& name) {
  if (name == "plain") return Pipeline::Plain;
  if (name == "gin") return Pipeline::Gin;
  if (name == "ssc") return Pipeline::Ssc;
  if (name == "gin_ssc") return Pipeline::GinSsc;
  throw ConfigError("unknown pipeline '" + name + "' (expected plain, gin, ssc or gin_ssc)");
}

std::string to_string(Pipeline p) {
  switch (p) {
    case Pipeline::Plain: return "plain";
    case Pipeline::Gin: return "gin";
    case Pipeline::Ssc: return "ssc";
    case Pipeline::GinSsc: return "gin_ssc";
  }
  return "plain";
}

Normalization parse_normalization(const std::string& name) {
  if (name == "volume") return Normalization::Volume;
  if (name == "dataset") return Normalization::Dataset;
  throw ConfigError("unknown normalization '" + name + "' (expected volume or dataset)");
}

std::string to_string(Normalization n) { return n == Normalization::Dataset ? "dataset" : "volume"; }

Volume InputPipeline::normalize(const Volume& raw) const {
  if (normalization == Normalization::Volume) return znormalize(raw);
  if (!(dataset_std > 0.0)) throw ConfigError("dataset normalization requires a positive std");
  Volume out = raw;
  const float m = static_cast<float>(dataset_mean);
  const float inv = static_cast<float>(1.0 / dataset_std);
  for (auto& v : out.data()) v = (v - m) * inv;
  return out;
}

Volume InputPipeline::describe(const Volume& normalized) const {
  return uses_ssc(pipeline) ? ssc_descriptor(normalized, ssc) : normalized;
}

Volume InputPipeline::prepare(const Volume& raw) const { return describe(normalize(raw)); }

void ModelManifest::validate() const {
  model.validate();
  if (model.in_channels != input.channels()) {
    throw ConfigError("pipeline '" + to_string(input.pipeline) + "' needs " + std::to_string(input.channels()) +
                      " input channels but the model has " + std::to_string(model.in_channels));
  }
  for (auto p : patch_size) {
    if (p == 0 || p % model.divisor() != 0) {
      throw ConfigError("patch size must be a positive multiple of " + std::to_string(model.divisor()));
    }
  }
}

void ModelManifest::append_to(KeyValueDocument& doc) const {
  doc.set("model", "in_channels", model.in_channels);
  doc.set("model", "num_classes", model.num_classes);
  doc.set("model", "base_width", model.base_width);
  doc.set("model", "depth", model.depth);
  doc.set("model", "max_width", model.max_width);
  doc.set("model", "norm", nn::to_string(model.norm));
  doc.set("model", "norm_affine", model.norm_affine);
  doc.set("model", "init_seed", std::to_string(model.seed));
  doc.set("model", "patch_size", format_triple(patch_size));
  doc.set("input", "pipeline", to_string(input.pipeline));
  doc.set("input", "normalization", to_string(input.normalization));
  doc.set("input", "dataset_mean", input.dataset_mean);
  doc.set("input", "dataset_std", input.dataset_std);
  doc.set("input", "ssc_patch_size", input.ssc.patch_size);
  doc.set("input", "ssc_patch_distance", input.ssc.patch_distance);
  doc.set("input", "ssc_low_factor", input.ssc.low_factor);
  doc.set("input", "ssc_high_factor", input.ssc.high_factor);
  doc.set("input", "ssc_stability_eps", input.ssc.stability_eps);
  doc.set("input", "ssc_normalize_input", input.ssc.normalize_input);
  doc.set("training", "config_sha256", pretrain_config_hash);
  doc.set("training", "seed", std::to_string(pretrain_seed));
  doc.set("training", "source_domain", source_domain);
}

ModelManifest ModelManifest::from_document(const KeyValueDocument& doc) {
  ModelManifest m;
  SectionReader mr(doc, "model");
  m.model.in_channels = static_cast<int>(mr.get_int("in_channels", 1));
  m.model.num_classes = static_cast<int>(mr.get_int("num_classes", 2));
  m.model.base_width = static_cast<int>(mr.get_int("base_width", 16));
  m.model.depth = static_cast<int>(mr.get_int("depth", 4));
  m.model.max_width = static_cast<int>(mr.get_int("max_width", 320));
  try {
    m.model.norm = nn::parse_norm_kind(mr.get_string("norm", "instance"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  m.model.norm_affine = mr.get_bool("norm_affine", true);
  m.model.seed = mr.get_uint64("init_seed", 0);
  m.patch_size = mr.get_triple("patch_size", m.patch_size);
  SectionReader ir(doc, "input");
  m.input.pipeline = parse_pipeline(ir.get_string("pipeline", "plain"));
  m.input.normalization = parse_normalization(ir.get_string("normalization", "volume"));
  m.input.dataset_mean = ir.get_double("dataset_mean", 0.0);
  m.input.dataset_std = ir.get_double("dataset_std", 1.0);
  m.input.ssc.patch_size = static_cast<int>(ir.get_int("ssc_patch_size", 1));
  m.input.ssc.patch_distance = static_cast<int>(ir.get_int("ssc_patch_distance", 1));
  m.input.ssc.low_factor = ir.get_double("ssc_low_factor", 0.001);
  m.input.ssc.high_factor = ir.get_double("ssc_high_factor", 1000.0);
  m.input.ssc.stability_eps = ir.get_double("ssc_stability_eps", 1e-12);
  m.input.ssc.normalize_input = ir.get_bool("ssc_normalize_input", true);
  SectionReader tr(doc, "training");
  m.pretrain_config_hash = tr.get_string("config_sha256", "");
  m.pretrain_seed = tr.get_uint64("seed", 0);
  m.source_domain = tr.get_string("source_domain", "");
  m.validate();
  return m;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in, const std::string& where) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError(where + ": truncated payload");
  return v;
}
std::uint64_t read_u64(std::istream& in, const std::string& where) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw FormatError(where + ": truncated payload");
  return v;
}

struct NamedArray {
  std::string name;
  nn::AlignedVector<float>* values;
};

std::vector<NamedArray> named_arrays(SegModel& m) {
  std::vector<NamedArray> out;
  for (auto* p : m.parameters()) out.push_back({p->name, &p->value});
  for (auto& b : m.buffers()) out.push_back({b.name, b.values});
  return out;
}

}  // namespace

void save_checkpoint(Checkpoint& ckpt, const std::filesystem::path& dir, const RunManifest* run) {
  ckpt.manifest.validate();
  std::filesystem::create_directories(dir);
  const auto payload = dir / kParamsFile;
  {
    std::ofstream out(payload, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + payload.string());
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kPayloadVersion);
    auto arrays = named_arrays(ckpt.model);
    write_u32(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
      write_u32(out, static_cast<std::uint32_t>(a.name.size()));
      out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      write_u64(out, a.values->size());
      out.write(reinterpret_cast<const char*>(a.values->data()),
                static_cast<std::streamsize>(a.values->size() * sizeof(float)));
    }
    if (!out) throw DataError("write failed: " + payload.string());
  }
  KeyValueDocument doc;
  doc.set("checkpoint", "payload", kParamsFile);
  doc.set("checkpoint", "payload_version", static_cast<int>(kPayloadVersion));
  doc.set("checkpoint", "payload_sha256", sha256_file(payload));
  ckpt.manifest.append_to(doc);
  if (run) run->append_to(doc);
  doc.write(dir / kManifestFile);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  if (!std::filesystem::exists(manifest_path)) throw FormatError(manifest_path.string() + ": no such file");
  const auto doc = KeyValueDocument::read(manifest_path);
  Checkpoint ckpt(ModelManifest::from_document(doc));
  const auto payload = dir / doc.get("checkpoint", "payload");
  const std::string where = payload.string();
  const auto expected_hash = doc.find("checkpoint", "payload_sha256");
  if (expected_hash && *expected_hash != sha256_file(payload)) {
    throw FormatError(where + ": SHA-256 does not match the manifest");
  }
  std::ifstream in(payload, std::ios::binary);
  if (!in) throw FormatError("cannot open " + where);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw FormatError(where + ": bad magic");
  const auto version = read_u32(in, where);
  if (version != kPayloadVersion) throw FormatError(where + ": unsupported payload version " + std::to_string(version));
  auto arrays = named_arrays(ckpt.model);
  const auto count = read_u32(in, where);
  if (count != arrays.size()) {
    throw FormatError(where + ": holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(arrays.size()));
  }
  for (auto& a : arrays) {
    const auto len = read_u32(in, where);
    if (len > 4096) throw FormatError(where + ": corrupt tensor name");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError(where + ": truncated payload");
    if (name != a.name) throw FormatError(where + ": expected tensor '" + a.name + "', found '" + name + "'");
    const auto n = read_u64(in, where);
    if (n != a.values->size()) throw FormatError(where + ": size mismatch for '" + name + "'");
    if (!in.read(reinterpret_cast<char*>(a.values->data()), static_cast<std::streamsize>(n * sizeof(float)))) {
      throw FormatError(where + ": truncated payload");
    }
  }
  return ckpt;
}

void require_compatible(const ModelManifest& a, const ModelManifest& b) {
  if (a.model.num_classes != b.model.num_classes) throw ConfigError("ensemble members disagree on num_classes");
  if (!(a.input == b.input)) throw ConfigError("ensemble members disagree on the input pipeline");
}

bool same_weights(SegModel& a, SegModel& b) {
  auto x = named_arrays(a), y = named_arrays(b);
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].name != y[i].name || *x[i].values != *y[i].values) return false;
  }
  return true;
}

}  // namespace dgtta
