#include "dgtta/synth.hpp"

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "dgtta/error.hpp"
#include "dgtta/io.hpp"
#include "dgtta/kvdoc.hpp"
#include "dgtta/manifest.hpp"

namespace dgtta {

Transfer parse_transfer(const std::string& name) {
  if (name == "identity") return Transfer::Identity;
  if (name == "inverted") return Transfer::Inverted;
  if (name == "gamma") return Transfer::Gamma;
  throw ConfigError("unknown intensity transfer '" + name + "' (expected identity, inverted or gamma)");
}

std::string to_string(Transfer t) {
  switch (t) {
    case Transfer::Identity: return "identity";
    case Transfer::Inverted: return "inverted";
    case Transfer::Gamma: return "gamma";
  }
  return "identity";
}

void IntensityDomain::validate(int num_classes) const {
  if (tag.empty()) throw ConfigError("intensity domain needs a tag");
  if (static_cast<int>(class_intensity.size()) != num_classes) {
    throw ConfigError("domain '" + tag + "' lists " + std::to_string(class_intensity.size()) +
                      " class intensities for " + std::to_string(num_classes) + " classes");
  }
  for (double v : class_intensity) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("class intensities must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(bias_field_strength >= 0.0 && bias_field_strength < 1.0)) {
    throw ConfigError("bias_field_strength must lie in [0, 1)");
  }
  if (transfer == Transfer::Gamma && !(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(scale != 0.0) || !std::isfinite(scale) || !std::isfinite(offset)) {
    throw ConfigError("domain scale must be finite and non-zero");
  }
  if (!(clip_low < clip_high)) throw ConfigError("clip_low must be below clip_high");
}

double IntensityDomain::apply_transfer(double base) const {
  switch (transfer) {
    case Transfer::Identity: return base;
    case Transfer::Inverted: return 1.0 - base;
    case Transfer::Gamma: return std::pow(base, gamma);
  }
  return base;
}

PhantomConfig::PhantomConfig() {
  domain_a.tag = "domain_a";
  domain_a.class_intensity = {0.1, 0.8, 0.55, 0.3};
  domain_a.noise_sigma = 0.03;
  domain_a.bias_field_strength = 0.1;
  domain_a.scale = 1000.0;
  domain_a.offset = -400.0;
  domain_b.tag = "domain_b";
  domain_b.class_intensity = {0.1, 0.8, 0.3, 0.55};
  domain_b.noise_sigma = 0.05;
  domain_b.bias_field_strength = 0.2;
  domain_b.scale = 250.0;
  domain_b.offset = 150.0;
}

void PhantomConfig::validate() const {
  if (grid_size < 32) throw ConfigError("grid_size must be >= 32");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (shapes_per_class < 1) throw ConfigError("shapes_per_class must be >= 1");
  if (num_train + num_test == 0) throw ConfigError("phantom needs at least one sample");
  if (!(spacing_mm > 0.0)) throw ConfigError("spacing_mm must be positive");
  if (!(min_fraction > 0.0 && min_fraction < max_fraction && max_fraction < 1.0)) {
    throw ConfigError("need 0 < min_fraction < max_fraction < 1");
  }
  if (max_fraction * (num_classes - 1) >= 0.9) throw ConfigError("foreground fractions cannot fit in the grid");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
  if (domain_a.tag == domain_b.tag) throw ConfigError("domain tags must differ");
  domain_a.validate(num_classes);
  domain_b.validate(num_classes);
}

std::string case_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%03zu", index);
  return buf;
}

namespace {

// Shape families cycle with the class index so that classes differ in geometry
// as well as in intensity.
struct Family {
  double exponent;
  std::array<double, 3> aspect;
};

Family family_for(int cls) {
  switch ((cls - 1) % 4) {
    case 0: return {2.0, {1.0, 1.0, 1.0}};   // ball
    case 1: return {2.0, {0.6, 0.6, 2.2}};   // rod
    case 2: return {6.0, {1.0, 1.0, 1.0}};   // rounded box
    default: return {2.0, {1.4, 1.4, 0.45}};  // disc
  }
}

double unit_superellipsoid_volume(double p) {
  return 8.0 * std::pow(std::tgamma(1.0 + 1.0 / p), 3) / std::tgamma(1.0 + 3.0 / p);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

LabelMap generate_labels(const PhantomConfig& cfg, std::size_t index) {
  const std::size_t g = cfg.grid_size;
  const Shape3 shape{g, g, g};
  const double total = static_cast<double>(voxel_count(shape));
  LabelMap labels(shape, {cfg.spacing_mm, cfg.spacing_mm, cfg.spacing_mm}, cfg.num_classes, 0);
  auto rng = stream(cfg.seed, index, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Aim each class at the middle of the allowed fraction range (log-uniform),
  // shared among its shapes.
  const double lo = std::log(std::max(cfg.min_fraction * 2.0, cfg.min_fraction));
  const double hi = std::log(std::min(cfg.max_fraction * 0.6, 0.8 / (cfg.num_classes - 1)));
  std::vector<std::uint8_t> occupied(labels.voxels(), 0);
  for (int cls = 1; cls < cfg.num_classes; ++cls) {
    const Family fam = family_for(cls);
    const double target = std::exp(lo + (hi - lo) * unit(rng)) / cfg.shapes_per_class;
    for (int s = 0; s < cfg.shapes_per_class; ++s) {
      const double base = std::cbrt(target * total / unit_superellipsoid_volume(fam.exponent) /
                                    (fam.aspect[0] * fam.aspect[1] * fam.aspect[2]));
      const Eigen::Vector3d radii(base * fam.aspect[0], base * fam.aspect[1], base * fam.aspect[2]);
      const double reach = radii.maxCoeff();
      // Keep the candidate with the fewest occupied voxels; earlier shapes win
      // any remaining overlap once the retries are spent.
      std::vector<std::size_t> best, voxels;
      std::size_t best_clash = std::numeric_limits<std::size_t>::max();
      for (int attempt = 0; attempt < cfg.max_retries && best_clash > 0; ++attempt) {
        const Eigen::Matrix3d rot = random_rotation(rng);
        Eigen::Vector3d centre;
        for (int a = 0; a < 3; ++a) {
          const double margin = std::min(reach + 1.0, g / 2.0 - 1.0);
          centre[a] = margin + (static_cast<double>(g - 1) - 2.0 * margin) * unit(rng);
        }
        voxels.clear();
        std::size_t clash = 0;
        const long r = static_cast<long>(std::ceil(reach)) + 1;
        for (long z = std::max(0L, long(centre[0]) - r); z <= std::min(long(g) - 1, long(centre[0]) + r); ++z)
          for (long y = std::max(0L, long(centre[1]) - r); y <= std::min(long(g) - 1, long(centre[1]) + r); ++y)
            for (long x = std::max(0L, long(centre[2]) - r); x <= std::min(long(g) - 1, long(centre[2]) + r); ++x) {
              const Eigen::Vector3d d = rot.transpose() * (Eigen::Vector3d(double(z), double(y), double(x)) - centre);
              double f = 0.0;
              for (int a = 0; a < 3; ++a) f += std::pow(std::abs(d[a] / radii[a]), fam.exponent);
              if (f > 1.0) continue;
              const std::size_t i = labels.index(std::size_t(z), std::size_t(y), std::size_t(x));
              clash += occupied[i];
              voxels.push_back(i);
            }
        if (!voxels.empty() && clash < best_clash) {
          best_clash = clash;
          best = voxels;
        }
      }
      std::erase_if(best, [&](std::size_t i) { return occupied[i] != 0; });
      if (best.empty()) {
        throw DataError(case_id(index) + ": could not place a shape of class " + std::to_string(cls) + " after " +
                        std::to_string(cfg.max_retries) + " attempts");
      }
      voxels = std::move(best);
      // One voxel of clearance around each shape keeps classes from touching.
      for (std::size_t i : voxels) {
        labels.labels()[i] = cls;
        const long z = long(i / (g * g)), y = long((i / g) % g), x = long(i % g);
        for (long dz = -1; dz <= 1; ++dz)
          for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
              const long zz = z + dz, yy = y + dy, xx = x + dx;
              if (zz < 0 || yy < 0 || xx < 0 || zz >= long(g) || yy >= long(g) || xx >= long(g)) continue;
              occupied[labels.index(std::size_t(zz), std::size_t(yy), std::size_t(xx))] = 1;
            }
      }
    }
    const auto count = std::count(labels.labels().begin(), labels.labels().end(), cls);
    const double fraction = static_cast<double>(count) / total;
    if (fraction < cfg.min_fraction || fraction > cfg.max_fraction) {
      throw DataError(case_id(index) + ": class " + std::to_string(cls) + " covers " + std::to_string(fraction) +
                      " of the grid, outside [" + std::to_string(cfg.min_fraction) + ", " +
                      std::to_string(cfg.max_fraction) + "]");
    }
  }
  return labels;
}

Volume render(const LabelMap& labels, const IntensityDomain& domain, std::uint64_t seed, std::size_t index) {
  domain.validate(labels.num_classes());
  const Shape3& s = labels.shape();
  Volume out(1, s, labels.spacing());
  std::uint64_t tag_hash = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : domain.tag) tag_hash = (tag_hash ^ c) * 1099511628211ULL;
  auto rng = stream(seed, index, 2 + tag_hash % 1000003);
  // Smooth multiplicative field: a few random low-frequency cosines.
  struct Wave {
    Eigen::Vector3d k;
    double phase;
    double amp;
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Wave> waves(3);
  for (auto& w : waves) {
    for (int a = 0; a < 3; ++a) w.k[a] = (unit(rng) * 2.0 - 1.0) * std::numbers::pi / static_cast<double>(s[a]);
    w.phase = unit(rng) * 2.0 * std::numbers::pi;
    w.amp = domain.bias_field_strength / 3.0;
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  const double lo = domain.offset + domain.scale * domain.clip_low;
  const double hi = domain.offset + domain.scale * domain.clip_high;
  const double vmin = std::min(lo, hi), vmax = std::max(lo, hi);
  auto data = out.data();
  std::size_t i = 0;
  for (std::size_t z = 0; z < s[0]; ++z)
    for (std::size_t y = 0; y < s[1]; ++y)
      for (std::size_t x = 0; x < s[2]; ++x, ++i) {
        double bias = 1.0;
        for (const auto& w : waves) {
          bias += w.amp * std::cos(w.k[0] * double(z) + w.k[1] * double(y) + w.k[2] * double(x) + w.phase);
        }
        const double base = domain.class_intensity[static_cast<std::size_t>(labels.labels()[i])];
        double v = domain.apply_transfer(base) * bias;
        if (domain.noise_sigma > 0.0) v += domain.noise_sigma * noise(rng);
        v = domain.offset + domain.scale * v;
        data[i] = static_cast<float>(std::clamp(v, vmin, vmax));
      }
  return out;
}

PhantomData generate(const PhantomConfig& cfg, int workers) {
  cfg.validate();
  const std::size_t n = cfg.num_samples();
  PhantomData out;
  out.num_train = cfg.num_train;
  out.domain_a.domain_tag = cfg.domain_a.tag;
  out.domain_b.domain_tag = cfg.domain_b.tag;
  out.domain_a.samples.resize(n);
  out.domain_b.samples.resize(n);
  const Spacing coarse{2 * cfg.spacing_mm, 2 * cfg.spacing_mm, 2 * cfg.spacing_mm};
  auto make = [&](std::size_t i) {
    LabelMap labels = generate_labels(cfg, i);
    Volume a = render(labels, cfg.domain_a, cfg.seed, i);
    Volume b = render(labels, cfg.domain_b, cfg.seed, i);
    const std::string id = case_id(i);
    out.domain_a.samples[i] = Sample{id, std::move(a), labels};
    if (cfg.resolution_gap) {
      out.domain_b.samples[i] = Sample{id, resample(b, coarse), resample_labels(labels, coarse)};
    } else {
      out.domain_b.samples[i] = Sample{id, std::move(b), std::move(labels)};
    }
  };
  const std::size_t nw = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, n);
  if (nw == 1) {
    for (std::size_t i = 0; i < n; ++i) make(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(nw);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += nw) make(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void write_phantom(const PhantomData& data, const PhantomConfig& cfg, const std::filesystem::path& dir,
                   const RunManifest* run) {
  KeyValueDocument doc;
  if (run) run->append_to(doc);
  doc.set("data", "domains", data.domain_a.domain_tag + "," + data.domain_b.domain_tag);
  doc.set("data", "num_classes", cfg.num_classes);
  doc.set("data", "seed", std::to_string(cfg.seed));
  std::string train, test;
  for (std::size_t i = 0; i < cfg.num_samples(); ++i) {
    auto& list = i < data.num_train ? train : test;
    list += (list.empty() ? "" : ",") + case_id(i);
  }
  doc.set("data", "train_cases", train);
  doc.set("data", "test_cases", test);
  for (const Dataset* ds : {&data.domain_a, &data.domain_b}) {
    const auto sub = dir / ds->domain_tag;
    std::filesystem::create_directories(sub);
    const auto& dom = ds == &data.domain_a ? cfg.domain_a : cfg.domain_b;
    const std::string sec = "domain." + ds->domain_tag;
    doc.set(sec, "transfer", to_string(dom.transfer));
    doc.set(sec, "scale", dom.scale);
    doc.set(sec, "offset", dom.offset);
    doc.set(sec, "noise_sigma", dom.noise_sigma);
    doc.set(sec, "bias_field_strength", dom.bias_field_strength);
    KeyValueDocument local;
    if (run) run->append_to(local);
    local.set("domain", "tag", ds->domain_tag);
    local.set("domain", "transfer", to_string(dom.transfer));
    local.set("domain", "seed", std::to_string(cfg.seed));
    for (const auto& s : ds->samples) {
      save_volume(s.image, sub / (s.id + "_image"));
      if (s.label) save_labels(*s.label, sub / (s.id + "_label"));
    }
    local.write(sub / kManifestFile);
  }
  doc.write(dir / kManifestFile);
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

DataManifest read_data_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestFile;
  if (!std::filesystem::exists(path)) throw DataError(path.string() + ": no such file (not a data directory?)");
  const auto doc = KeyValueDocument::read(path);
  if (!doc.has_section("data")) throw DataError(path.string() + ": no [data] section (not a data directory?)");
  DataManifest m;
  m.domains = split_list(doc.get("data", "domains"));
  m.train_cases = split_list(doc.find("data", "train_cases").value_or(""));
  m.test_cases = split_list(doc.find("data", "test_cases").value_or(""));
  m.num_classes = std::stoi(doc.get("data", "num_classes"));
  return m;
}

Dataset load_split(const std::filesystem::path& dir, const std::string& domain, const std::string& split,
                   bool with_labels) {
  const auto m = read_data_manifest(dir);
  if (std::find(m.domains.begin(), m.domains.end(), domain) == m.domains.end()) {
    throw DataError("domain '" + domain + "' not listed in " + (dir / kManifestFile).string());
  }
  std::vector<std::string> cases;
  if (split == "train" || split == "all") cases.insert(cases.end(), m.train_cases.begin(), m.train_cases.end());
  if (split == "test" || split == "all") cases.insert(cases.end(), m.test_cases.begin(), m.test_cases.end());
  if (split != "train" && split != "test" && split != "all") throw InvalidArgument("unknown split '" + split + "'");
  Dataset ds;
  ds.domain_tag = domain;
  for (const auto& id : cases) {
    Sample s;
    s.id = id;
    s.image = load_volume(dir / domain / (id + "_image"));
    if (with_labels) s.label = load_labels(dir / domain / (id + "_label"), m.num_classes);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace dgtta
