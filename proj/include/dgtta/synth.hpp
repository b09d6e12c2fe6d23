#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgtta/manifest.hpp"
#include "dgtta/volume.hpp"

namespace dgtta {

enum class Transfer { Identity, Inverted, Gamma };

Transfer parse_transfer(const std::string& name);
std::string to_string(Transfer t);

/// Rendering rule for one imaging domain. Per voxel:
///   v = transfer(class_intensity[label]) * bias + noise, out = offset + scale * v,
/// clipped to [offset + scale * clip_low, offset + scale * clip_high].
struct IntensityDomain {
  std::string tag;
  std::vector<double> class_intensity;  ///< per class, in [0, 1]
  Transfer transfer = Transfer::Identity;
  double gamma = 1.0;
  double noise_sigma = 0.03;
  double bias_field_strength = 0.1;  ///< peak relative deviation of the multiplicative field
  double scale = 1.0;
  double offset = 0.0;
  double clip_low = -0.5;
  double clip_high = 1.5;

  void validate(int num_classes) const;
  double apply_transfer(double base) const;
};

struct PhantomConfig {
  std::size_t grid_size = 64;
  int num_classes = 4;
  int shapes_per_class = 1;
  std::size_t num_train = 40;
  std::size_t num_test = 10;
  double spacing_mm = 1.5;
  double min_fraction = 0.005;  ///< per foreground class, fraction of the grid
  double max_fraction = 0.10;
  int max_retries = 200;
  bool resolution_gap = false;  ///< render domain b at twice the voxel size
  IntensityDomain domain_a;
  IntensityDomain domain_b;
  std::uint64_t seed = 0;

  PhantomConfig();
  void validate() const;
  std::size_t num_samples() const { return num_train + num_test; }
};

/// Both datasets hold num_train + num_test samples sharing label geometry per
/// index; the first num_train are the training split.
struct PhantomData {
  Dataset domain_a;
  Dataset domain_b;
  std::size_t num_train = 0;
};

/// Label geometry of one sample: superellipsoids whose family depends on the
/// class, placed without overlap (earlier shapes win when retries run out).
LabelMap generate_labels(const PhantomConfig& cfg, std::size_t index);
Volume render(const LabelMap& labels, const IntensityDomain& domain, std::uint64_t seed, std::size_t index);

PhantomData generate(const PhantomConfig& cfg, int workers = 1);

std::string case_id(std::size_t index);

/// Writes <dir>/<domain tag>/<case>_image and <case>_label in raw format plus a
/// manifest (domain tags, seeds, split, optional run provenance).
void write_phantom(const PhantomData& data, const PhantomConfig& cfg, const std::filesystem::path& dir,
                   const RunManifest* run = nullptr);

struct DataManifest {
  std::vector<std::string> domains;
  std::vector<std::string> train_cases;
  std::vector<std::string> test_cases;
  int num_classes = 0;
};

DataManifest read_data_manifest(const std::filesystem::path& dir);

/// Loads the cases listed for one domain and split ("train", "test" or "all").
Dataset load_split(const std::filesystem::path& dir, const std::string& domain, const std::string& split,
                   bool with_labels = true);

}  // namespace dgtta
