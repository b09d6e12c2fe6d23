#include "dgtta/config.hpp"

#include "dgtta/error.hpp"

namespace dgtta {

namespace {

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double d : v) out += (out.empty() ? "" : ",") + format_double(d);
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (int d : v) out += (out.empty() ? "" : ",") + std::to_string(d);
  return out;
}

std::vector<double> parse_doubles(const std::string& section, const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string tok = text.substr(start, end - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("[" + section + "] " + key + ": '" + tok + "' is not a number");
    }
    start = end + 1;
  }
  return out;
}

template <typename Fn>
auto as_config_error(Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

void read_domain(const KeyValueDocument& doc, const std::string& section, IntensityDomain& d) {
  SectionReader r(doc, section);
  d.tag = r.get_string("tag", d.tag);
  if (auto v = doc.find(section, "class_intensity")) {
    r.get_string("class_intensity", "");
    d.class_intensity = parse_doubles(section, "class_intensity", *v);
  }
  d.transfer = parse_transfer(r.get_string("transfer", to_string(d.transfer)));
  d.gamma = r.get_double("gamma", d.gamma);
  d.noise_sigma = r.get_double("noise_sigma", d.noise_sigma);
  d.bias_field_strength = r.get_double("bias_field_strength", d.bias_field_strength);
  d.scale = r.get_double("scale", d.scale);
  d.offset = r.get_double("offset", d.offset);
  d.clip_low = r.get_double("clip_low", d.clip_low);
  d.clip_high = r.get_double("clip_high", d.clip_high);
  r.reject_unknown();
}

void write_domain(KeyValueDocument& doc, const std::string& section, const IntensityDomain& d) {
  doc.set(section, "tag", d.tag);
  doc.set(section, "class_intensity", join(d.class_intensity));
  doc.set(section, "transfer", to_string(d.transfer));
  doc.set(section, "gamma", d.gamma);
  doc.set(section, "noise_sigma", d.noise_sigma);
  doc.set(section, "bias_field_strength", d.bias_field_strength);
  doc.set(section, "scale", d.scale);
  doc.set(section, "offset", d.offset);
  doc.set(section, "clip_low", d.clip_low);
  doc.set(section, "clip_high", d.clip_high);
}

}  // namespace

const std::vector<std::string>& run_config_sections() {
  static const std::vector<std::string> names{"model", "gin",     "ssc",      "spatial",  "pretrain",
                                              "tta",   "tent",    "phantom",  "domain_a", "domain_b"};
  return names;
}

RunConfig RunConfig::from_document(const KeyValueDocument& doc) {
  RunConfig c;
  {
    SectionReader r(doc, "model");
    auto& m = c.model;
    m.num_classes = static_cast<int>(r.get_int("num_classes", m.num_classes));
    m.base_width = static_cast<int>(r.get_int("base_width", m.base_width));
    m.depth = static_cast<int>(r.get_int("depth", m.depth));
    m.max_width = static_cast<int>(r.get_int("max_width", m.max_width));
    m.norm = as_config_error([&] { return nn::parse_norm_kind(r.get_string("norm", nn::to_string(m.norm))); });
    m.norm_affine = r.get_bool("norm_affine", m.norm_affine);
    m.seed = r.get_uint64("seed", m.seed);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "gin");
    auto& g = c.gin;
    g.num_layers = static_cast<int>(r.get_int("num_layers", g.num_layers));
    g.hidden_channels = static_cast<int>(r.get_int("hidden_channels", g.hidden_channels));
    g.kernel_size = static_cast<int>(r.get_int("kernel_size", g.kernel_size));
    g.alpha_low = r.get_double("alpha_low", g.alpha_low);
    g.alpha_high = r.get_double("alpha_high", g.alpha_high);
    g.renormalize_output = r.get_bool("renormalize_output", g.renormalize_output);
    g.seed = r.get_uint64("seed", g.seed);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "ssc");
    auto& s = c.ssc;
    s.patch_size = static_cast<int>(r.get_int("patch_size", s.patch_size));
    s.patch_distance = static_cast<int>(r.get_int("patch_distance", s.patch_distance));
    s.low_factor = r.get_double("low_factor", s.low_factor);
    s.high_factor = r.get_double("high_factor", s.high_factor);
    s.stability_eps = r.get_double("stability_eps", s.stability_eps);
    s.normalize_input = r.get_bool("normalize_input", s.normalize_input);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "spatial");
    auto& s = c.spatial;
    s.max_rotation_deg = r.get_double("max_rotation_deg", s.max_rotation_deg);
    s.max_scale_delta = r.get_double("max_scale_delta", s.max_scale_delta);
    s.max_translation_vox = r.get_double("max_translation_vox", s.max_translation_vox);
    s.validity_threshold = r.get_double("validity_threshold", s.validity_threshold);
    s.sentinel = static_cast<float>(r.get_double("sentinel", s.sentinel));
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "pretrain");
    auto& p = c.pretrain;
    p.pipeline = parse_pipeline(r.get_string("pipeline", to_string(p.pipeline)));
    p.normalization = parse_normalization(r.get_string("normalization", to_string(p.normalization)));
    p.epochs = static_cast<int>(r.get_int("epochs", p.epochs));
    p.batch_size = static_cast<int>(r.get_int("batch_size", p.batch_size));
    p.patches_per_volume = static_cast<int>(r.get_int("patches_per_volume", p.patches_per_volume));
    p.learning_rate = r.get_double("learning_rate", p.learning_rate);
    p.weight_decay = r.get_double("weight_decay", p.weight_decay);
    p.loss_weights.ce = r.get_double("ce_weight", p.loss_weights.ce);
    p.loss_weights.dice = r.get_double("dice_weight", p.loss_weights.dice);
    p.foreground_fraction = r.get_double("foreground_fraction", p.foreground_fraction);
    p.patch_size = r.get_triple("patch_size", p.patch_size);
    p.normalize_before_gin = r.get_bool("normalize_before_gin", p.normalize_before_gin);
    p.seed = r.get_uint64("seed", p.seed);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "tta");
    auto& t = c.tta;
    t.learning_rate = r.get_double("learning_rate", t.learning_rate);
    t.weight_decay = r.get_double("weight_decay", t.weight_decay);
    t.num_steps = static_cast<int>(r.get_int("num_steps", t.num_steps));
    t.patches_per_step = static_cast<int>(r.get_int("patches_per_step", t.patches_per_step));
    t.loss_exponent = static_cast<int>(r.get_int("loss_exponent", t.loss_exponent));
    t.stability_eps = r.get_double("stability_eps", t.stability_eps);
    const std::string classes = r.get_string("class_subset", "");
    if (!classes.empty() && classes != "all") {
      t.class_subset = as_config_error([&] { return parse_int_list(classes); });
    }
    t.param_group = as_config_error([&] { return nn::parse_param_group(r.get_string("param_group", "all")); });
    t.ensemble_size = static_cast<int>(r.get_int("ensemble_size", t.ensemble_size));
    t.foreground_oversampling = r.get_double("foreground_oversampling", t.foreground_oversampling);
    t.seed = r.get_uint64("seed", t.seed);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "tent");
    auto& t = c.tent;
    t.steps = static_cast<int>(r.get_int("steps", t.steps));
    t.learning_rate = r.get_double("learning_rate", t.learning_rate);
    t.patches_per_step = static_cast<int>(r.get_int("patches_per_step", t.patches_per_step));
    t.seed = r.get_uint64("seed", t.seed);
    r.reject_unknown();
  }
  {
    SectionReader r(doc, "phantom");
    auto& p = c.phantom;
    p.grid_size = static_cast<std::size_t>(r.get_int("grid_size", static_cast<long long>(p.grid_size)));
    p.num_classes = static_cast<int>(r.get_int("num_classes", p.num_classes));
    p.shapes_per_class = static_cast<int>(r.get_int("shapes_per_class", p.shapes_per_class));
    p.num_train = static_cast<std::size_t>(r.get_int("num_train", static_cast<long long>(p.num_train)));
    p.num_test = static_cast<std::size_t>(r.get_int("num_test", static_cast<long long>(p.num_test)));
    p.spacing_mm = r.get_double("spacing_mm", p.spacing_mm);
    p.min_fraction = r.get_double("min_fraction", p.min_fraction);
    p.max_fraction = r.get_double("max_fraction", p.max_fraction);
    p.max_retries = static_cast<int>(r.get_int("max_retries", p.max_retries));
    p.resolution_gap = r.get_bool("resolution_gap", p.resolution_gap);
    p.seed = r.get_uint64("seed", p.seed);
    r.reject_unknown();
    read_domain(doc, "domain_a", p.domain_a);
    read_domain(doc, "domain_b", p.domain_b);
  }
  // The class count lives in [model]; the phantom follows it unless set explicitly.
  if (!doc.has("phantom", "num_classes") && doc.has("model", "num_classes")) {
    c.phantom.num_classes = c.model.num_classes;
  }
  if (!doc.has("model", "num_classes") && doc.has("phantom", "num_classes")) {
    c.model.num_classes = c.phantom.num_classes;
  }
  c.model.in_channels = pipeline_channels(c.pretrain.pipeline);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_document(KeyValueDocument::read(path)); }

void RunConfig::validate() const {
  as_config_error([&] {
    model.validate();
    gin.validate();
    ssc.validate();
    spatial.validate();
    return 0;
  });
  pretrain.validate();
  tta.validate();
  tent.validate();
  phantom.validate();
}

void write_section(KeyValueDocument& doc, const SegModelConfig& m) {
  doc.set("model", "num_classes", m.num_classes);
  doc.set("model", "base_width", m.base_width);
  doc.set("model", "depth", m.depth);
  doc.set("model", "max_width", m.max_width);
  doc.set("model", "norm", nn::to_string(m.norm));
  doc.set("model", "norm_affine", m.norm_affine);
  doc.set("model", "seed", std::to_string(m.seed));
}

void write_section(KeyValueDocument& doc, const GinConfig& g) {
  doc.set("gin", "num_layers", g.num_layers);
  doc.set("gin", "hidden_channels", g.hidden_channels);
  doc.set("gin", "kernel_size", g.kernel_size);
  doc.set("gin", "alpha_low", g.alpha_low);
  doc.set("gin", "alpha_high", g.alpha_high);
  doc.set("gin", "renormalize_output", g.renormalize_output);
  doc.set("gin", "seed", std::to_string(g.seed));
}

void write_section(KeyValueDocument& doc, const SscConfig& s) {
  doc.set("ssc", "patch_size", s.patch_size);
  doc.set("ssc", "patch_distance", s.patch_distance);
  doc.set("ssc", "low_factor", s.low_factor);
  doc.set("ssc", "high_factor", s.high_factor);
  doc.set("ssc", "stability_eps", s.stability_eps);
  doc.set("ssc", "normalize_input", s.normalize_input);
}

void write_section(KeyValueDocument& doc, const SpatialConfig& s) {
  doc.set("spatial", "max_rotation_deg", s.max_rotation_deg);
  doc.set("spatial", "max_scale_delta", s.max_scale_delta);
  doc.set("spatial", "max_translation_vox", s.max_translation_vox);
  doc.set("spatial", "validity_threshold", s.validity_threshold);
  doc.set("spatial", "sentinel", static_cast<double>(s.sentinel));
}

void write_section(KeyValueDocument& doc, const PretrainConfig& p) {
  doc.set("pretrain", "pipeline", to_string(p.pipeline));
  doc.set("pretrain", "normalization", to_string(p.normalization));
  doc.set("pretrain", "epochs", p.epochs);
  doc.set("pretrain", "batch_size", p.batch_size);
  doc.set("pretrain", "patches_per_volume", p.patches_per_volume);
  doc.set("pretrain", "learning_rate", p.learning_rate);
  doc.set("pretrain", "weight_decay", p.weight_decay);
  doc.set("pretrain", "ce_weight", p.loss_weights.ce);
  doc.set("pretrain", "dice_weight", p.loss_weights.dice);
  doc.set("pretrain", "foreground_fraction", p.foreground_fraction);
  doc.set("pretrain", "patch_size", format_triple(p.patch_size));
  doc.set("pretrain", "normalize_before_gin", p.normalize_before_gin);
  doc.set("pretrain", "seed", std::to_string(p.seed));
}

void write_section(KeyValueDocument& doc, const AdaptationConfig& t) {
  doc.set("tta", "learning_rate", t.learning_rate);
  doc.set("tta", "weight_decay", t.weight_decay);
  doc.set("tta", "num_steps", t.num_steps);
  doc.set("tta", "patches_per_step", t.patches_per_step);
  doc.set("tta", "loss_exponent", t.loss_exponent);
  doc.set("tta", "stability_eps", t.stability_eps);
  doc.set("tta", "class_subset", t.class_subset.empty() ? std::string("all") : join(t.class_subset));
  doc.set("tta", "param_group", nn::to_string(t.param_group));
  doc.set("tta", "ensemble_size", t.ensemble_size);
  doc.set("tta", "foreground_oversampling", t.foreground_oversampling);
  doc.set("tta", "seed", std::to_string(t.seed));
}

void write_section(KeyValueDocument& doc, const TentConfig& t) {
  doc.set("tent", "steps", t.steps);
  doc.set("tent", "learning_rate", t.learning_rate);
  doc.set("tent", "patches_per_step", t.patches_per_step);
  doc.set("tent", "seed", std::to_string(t.seed));
}

void write_section(KeyValueDocument& doc, const PhantomConfig& p) {
  doc.set("phantom", "grid_size", p.grid_size);
  doc.set("phantom", "num_classes", p.num_classes);
  doc.set("phantom", "shapes_per_class", p.shapes_per_class);
  doc.set("phantom", "num_train", p.num_train);
  doc.set("phantom", "num_test", p.num_test);
  doc.set("phantom", "spacing_mm", p.spacing_mm);
  doc.set("phantom", "min_fraction", p.min_fraction);
  doc.set("phantom", "max_fraction", p.max_fraction);
  doc.set("phantom", "max_retries", p.max_retries);
  doc.set("phantom", "resolution_gap", p.resolution_gap);
  doc.set("phantom", "seed", std::to_string(p.seed));
  write_domain(doc, "domain_a", p.domain_a);
  write_domain(doc, "domain_b", p.domain_b);
}

KeyValueDocument RunConfig::to_document() const {
  KeyValueDocument doc;
  write_section(doc, model);
  write_section(doc, gin);
  write_section(doc, ssc);
  write_section(doc, spatial);
  write_section(doc, pretrain);
  write_section(doc, tta);
  write_section(doc, tent);
  write_section(doc, phantom);
  return doc;
}

}  // namespace dgtta
