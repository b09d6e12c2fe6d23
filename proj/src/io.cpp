#include "dgtta/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "dgtta/error.hpp"

namespace dgtta {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little,
              "raw payloads are written as host-order little-endian");

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string require_field(const std::map<std::string, std::string>& kv, const std::string& key,
                          const fs::path& where) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw FormatError(where.string() + ": missing field '" + key + "'");
  }
  return it->second;
}

template <typename T, std::size_t N>
std::array<T, N> parse_tuple(const std::string& text, const std::string& key, const fs::path& where) {
  std::istringstream in(text);
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!(in >> out[i])) {
      throw FormatError(where.string() + ": field '" + key + "' needs " + std::to_string(N) +
                        " values, got '" + text + "'");
    }
  }
  std::string rest;
  if (in >> rest) {
    throw FormatError(where.string() + ": field '" + key + "' has trailing content '" + rest + "'");
  }
  return out;
}

struct RawHeader {
  Shape3 shape{};
  Spacing spacing{};
  std::size_t channels = 1;
  std::string dtype;
  int num_classes = 0;
};

RawHeader read_raw_header(const fs::path& meta) {
  const auto kv = read_key_values(meta);
  RawHeader h;
  h.shape = parse_tuple<std::size_t, 3>(require_field(kv, "shape", meta), "shape", meta);
  h.spacing = parse_tuple<double, 3>(require_field(kv, "spacing_mm", meta), "spacing_mm", meta);
  for (double s : h.spacing) {
    if (!(s > 0.0)) throw FormatError(meta.string() + ": field 'spacing_mm' must be positive");
  }
  h.channels = parse_tuple<std::size_t, 1>(require_field(kv, "channels", meta), "channels", meta)[0];
  if (h.channels == 0) throw FormatError(meta.string() + ": field 'channels' must be >= 1");
  h.dtype = require_field(kv, "dtype", meta);
  if (h.dtype != "float32" && h.dtype != "int32") {
    throw FormatError(meta.string() + ": field 'dtype' must be float32 or int32, got '" + h.dtype + "'");
  }
  if (auto it = kv.find("num_classes"); it != kv.end()) {
    h.num_classes = parse_tuple<int, 1>(it->second, "num_classes", meta)[0];
  }
  return h;
}

void write_raw(const fs::path& path, const Shape3& shape, const Spacing& spacing,
               std::size_t channels, const std::string& dtype, int num_classes,
               const void* payload, std::size_t bytes) {
  const auto meta = raw_meta_path(path);
  const auto bin = raw_bin_path(path);
  if (meta.has_parent_path()) fs::create_directories(meta.parent_path());
  {
    std::ofstream m(meta);
    if (!m) throw DataError("cannot write " + meta.string());
    m.precision(17);
    m << "shape = " << shape[0] << ' ' << shape[1] << ' ' << shape[2] << '\n';
    m << "spacing_mm = " << spacing[0] << ' ' << spacing[1] << ' ' << spacing[2] << '\n';
    m << "channels = " << channels << '\n';
    m << "dtype = " << dtype << '\n';
    if (num_classes > 0) m << "num_classes = " << num_classes << '\n';
  }
  std::ofstream b(bin, std::ios::binary);
  if (!b) throw DataError("cannot write " + bin.string());
  b.write(static_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
  if (!b) throw DataError("short write to " + bin.string());
}

template <typename T>
std::vector<T> read_raw_payload(const fs::path& bin, std::size_t count) {
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw DataError("cannot open " + bin.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * sizeof(T)) {
    throw FormatError(bin.string() + ": payload has " + std::to_string(bytes) + " bytes, header implies " +
                      std::to_string(count * sizeof(T)));
  }
  in.seekg(0);
  std::vector<T> out(count);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  return out;
}

// --- NIfTI-1 -------------------------------------------------------------

constexpr std::size_t kNiftiHeaderSize = 348;
constexpr std::size_t kNiftiDataOffset = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2, kInt16 = 4, kInt32 = 8, kFloat32 = 16, kFloat64 = 64,
  kInt8 = 256, kUint16 = 512, kUint32 = 768,
};

struct HeaderBytes {
  std::array<unsigned char, kNiftiHeaderSize> raw{};
  bool swapped = false;

  template <typename T>
  T get(std::size_t offset) const {
    T v;
    std::memcpy(&v, raw.data() + offset, sizeof(T));
    if (swapped) {
      auto* p = reinterpret_cast<unsigned char*>(&v);
      std::reverse(p, p + sizeof(T));
    }
    return v;
  }
  template <typename T>
  void put(std::size_t offset, T v) {
    std::memcpy(raw.data() + offset, &v, sizeof(T));
  }
};

class GzFile {
 public:
  GzFile(const fs::path& path, const char* mode) : f_(gzopen(path.string().c_str(), mode)) {
    if (!f_) throw DataError("cannot open " + path.string());
  }
  ~GzFile() { if (f_) gzclose(f_); }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
  gzFile get() const { return f_; }

 private:
  gzFile f_;
};

void read_exact(gzFile f, void* dst, std::size_t bytes, const fs::path& path) {
  auto* p = static_cast<char*>(dst);
  while (bytes > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes, 1u << 30));
    const int got = gzread(f, p, chunk);
    if (got <= 0) throw FormatError(path.string() + ": truncated NIfTI payload");
    p += got;
    bytes -= static_cast<std::size_t>(got);
  }
}

void write_exact(gzFile f, const void* src, std::size_t bytes, const fs::path& path) {
  const auto* p = static_cast<const char*>(src);
  while (bytes > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes, 1u << 30));
    const int put = gzwrite(f, p, chunk);
    if (put <= 0) throw DataError("write failed for " + path.string());
    p += put;
    bytes -= static_cast<std::size_t>(put);
  }
}

struct NiftiImage {
  Shape3 shape{};
  Spacing spacing{};
  std::size_t channels = 1;
  std::vector<double> values;
};

NiftiImage read_nifti(const fs::path& path) {
  GzFile f(path, "rb");
  HeaderBytes h;
  read_exact(f.get(), h.raw.data(), kNiftiHeaderSize, path);
  if (h.get<std::int32_t>(0) != 348) {
    h.swapped = true;
    if (h.get<std::int32_t>(0) != 348) throw FormatError(path.string() + ": field 'sizeof_hdr' is not 348");
  }
  if (std::memcmp(h.raw.data() + 344, "n+1", 4) != 0 && std::memcmp(h.raw.data() + 344, "ni1", 4) != 0) {
    throw FormatError(path.string() + ": field 'magic' is not a NIfTI-1 signature");
  }
  if (std::memcmp(h.raw.data() + 344, "ni1", 4) == 0) {
    throw FormatError(path.string() + ": field 'magic' names a split .hdr/.img pair, which is unsupported");
  }
  const auto ndim = h.get<std::int16_t>(40);
  if (ndim < 1 || ndim > 7) throw FormatError(path.string() + ": field 'dim[0]' out of range");
  std::array<std::int64_t, 8> dim{};
  for (int i = 1; i <= 7; ++i) dim[i] = i <= ndim ? h.get<std::int16_t>(40 + 2 * i) : 1;
  for (int i = 1; i <= ndim; ++i) {
    if (dim[i] < 1) throw FormatError(path.string() + ": field 'dim[" + std::to_string(i) + "]' must be >= 1");
  }
  NiftiImage img;
  img.shape = {static_cast<std::size_t>(dim[3]), static_cast<std::size_t>(dim[2]),
               static_cast<std::size_t>(dim[1])};
  img.channels = 1;
  for (int i = 4; i <= 7; ++i) img.channels *= static_cast<std::size_t>(dim[i]);
  std::array<double, 3> pix{};
  for (int i = 1; i <= 3; ++i) {
    pix[i - 1] = std::fabs(static_cast<double>(h.get<float>(76 + 4 * i)));
    if (i > ndim) pix[i - 1] = pix[i - 1] > 0.0 ? pix[i - 1] : 1.0;
    if (!(pix[i - 1] > 0.0)) {
      throw FormatError(path.string() + ": field 'pixdim[" + std::to_string(i) + "]' must be positive");
    }
  }
  img.spacing = {pix[2], pix[1], pix[0]};
  const auto datatype = h.get<std::int16_t>(70);
  const float vox_offset = h.get<float>(108);
  float slope = h.get<float>(112);
  const float inter = h.get<float>(116);
  if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;

  std::size_t bytes_per = 0;
  switch (datatype) {
    case kUint8: case kInt8: bytes_per = 1; break;
    case kInt16: case kUint16: bytes_per = 2; break;
    case kInt32: case kUint32: case kFloat32: bytes_per = 4; break;
    case kFloat64: bytes_per = 8; break;
    default:
      throw FormatError(path.string() + ": field 'datatype' value " + std::to_string(datatype) +
                        " is unsupported");
  }
  const std::size_t count = voxel_count(img.shape) * img.channels;
  const auto offset = static_cast<std::size_t>(vox_offset);
  if (offset < kNiftiHeaderSize) throw FormatError(path.string() + ": field 'vox_offset' below header size");
  std::vector<unsigned char> skip(offset - kNiftiHeaderSize);
  if (!skip.empty()) read_exact(f.get(), skip.data(), skip.size(), path);
  std::vector<unsigned char> payload(count * bytes_per);
  read_exact(f.get(), payload.data(), payload.size(), path);

  img.values.resize(count);
  auto decode = [&]<typename T>(T) {
    for (std::size_t i = 0; i < count; ++i) {
      T v;
      std::memcpy(&v, payload.data() + i * sizeof(T), sizeof(T));
      if (h.swapped) {
        auto* p = reinterpret_cast<unsigned char*>(&v);
        std::reverse(p, p + sizeof(T));
      }
      img.values[i] = static_cast<double>(v) * slope + inter;
    }
  };
  switch (datatype) {
    case kUint8: decode(std::uint8_t{}); break;
    case kInt8: decode(std::int8_t{}); break;
    case kInt16: decode(std::int16_t{}); break;
    case kUint16: decode(std::uint16_t{}); break;
    case kInt32: decode(std::int32_t{}); break;
    case kUint32: decode(std::uint32_t{}); break;
    case kFloat32: decode(float{}); break;
    case kFloat64: decode(double{}); break;
    default: break;
  }
  return img;
}

void write_nifti(const fs::path& path, const Shape3& shape, const Spacing& spacing,
                 std::size_t channels, std::int16_t datatype, const void* payload, std::size_t bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  HeaderBytes h;
  h.put<std::int32_t>(0, 348);
  h.put<char>(38, 'r');
  h.put<std::int16_t>(40, static_cast<std::int16_t>(channels > 1 ? 4 : 3));
  h.put<std::int16_t>(42, static_cast<std::int16_t>(shape[2]));
  h.put<std::int16_t>(44, static_cast<std::int16_t>(shape[1]));
  h.put<std::int16_t>(46, static_cast<std::int16_t>(shape[0]));
  h.put<std::int16_t>(48, static_cast<std::int16_t>(channels));
  for (int i = 5; i <= 7; ++i) h.put<std::int16_t>(40 + 2 * i, 1);
  h.put<std::int16_t>(70, datatype);
  h.put<std::int16_t>(72, 32);
  h.put<float>(76, 1.0f);
  h.put<float>(80, static_cast<float>(spacing[2]));
  h.put<float>(84, static_cast<float>(spacing[1]));
  h.put<float>(88, static_cast<float>(spacing[0]));
  for (int i = 4; i <= 7; ++i) h.put<float>(76 + 4 * i, 1.0f);
  h.put<float>(108, static_cast<float>(kNiftiDataOffset));
  h.put<float>(112, 1.0f);
  h.put<char>(123, 2);  // mm
  h.put<std::int16_t>(254, 1);
  h.put<float>(280, static_cast<float>(spacing[2]));
  h.put<float>(300, static_cast<float>(spacing[1]));
  h.put<float>(320, static_cast<float>(spacing[0]));
  std::memcpy(h.raw.data() + 344, "n+1", 4);

  const bool gz = path.extension() == ".gz";
  GzFile f(path, gz ? "wb6" : "wbT");
  write_exact(f.get(), h.raw.data(), h.raw.size(), path);
  const std::array<unsigned char, 4> extension{};
  write_exact(f.get(), extension.data(), extension.size(), path);
  write_exact(f.get(), payload, bytes, path);
}

}  // namespace

bool is_nifti_path(const fs::path& path) {
  const auto name = path.filename().string();
  auto ends_with = [&](const std::string& suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".nii") || ends_with(".nii.gz");
}

fs::path raw_meta_path(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".bin" || p.extension() == ".meta") p.replace_extension();
  p += ".meta";
  return p;
}

fs::path raw_bin_path(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".bin" || p.extension() == ".meta") p.replace_extension();
  p += ".bin";
  return p;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void save_volume(const Volume& v, const fs::path& path) {
  if (!v.all_finite()) throw InvalidArgument("refusing to save a volume with non-finite values");
  if (is_nifti_path(path)) {
    write_nifti(path, v.shape(), v.spacing(), v.channels(), kFloat32, v.data().data(),
                v.size() * sizeof(float));
    return;
  }
  write_raw(path, v.shape(), v.spacing(), v.channels(), "float32", 0, v.data().data(),
            v.size() * sizeof(float));
}

Volume load_volume(const fs::path& path) {
  if (is_nifti_path(path)) {
    auto img = read_nifti(path);
    std::vector<float> data(img.values.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(img.values[i]);
    Volume v(img.channels, img.shape, img.spacing, std::move(data));
    if (!v.all_finite()) throw FormatError(path.string() + ": payload contains non-finite values");
    return v;
  }
  const auto meta = raw_meta_path(path);
  const auto h = read_raw_header(meta);
  if (h.dtype != "float32") {
    throw FormatError(meta.string() + ": field 'dtype' must be float32 for an intensity volume");
  }
  auto data = read_raw_payload<float>(raw_bin_path(path), h.channels * voxel_count(h.shape));
  Volume v(h.channels, h.shape, h.spacing, std::move(data));
  if (!v.all_finite()) throw FormatError(raw_bin_path(path).string() + ": payload contains non-finite values");
  return v;
}

void save_labels(const LabelMap& l, const fs::path& path) {
  if (is_nifti_path(path)) {
    write_nifti(path, l.shape(), l.spacing(), 1, kInt32, l.labels().data(),
                l.voxels() * sizeof(std::int32_t));
    return;
  }
  write_raw(path, l.shape(), l.spacing(), 1, "int32", l.num_classes(), l.labels().data(),
            l.voxels() * sizeof(std::int32_t));
}

LabelMap load_labels(const fs::path& path, int num_classes) {
  std::vector<std::int32_t> labels;
  Shape3 shape{};
  Spacing spacing{};
  if (is_nifti_path(path)) {
    auto img = read_nifti(path);
    if (img.channels != 1) throw FormatError(path.string() + ": label map must have one channel");
    shape = img.shape;
    spacing = img.spacing;
    labels.resize(img.values.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = static_cast<std::int32_t>(std::lround(img.values[i]));
    }
  } else {
    const auto meta = raw_meta_path(path);
    const auto h = read_raw_header(meta);
    if (h.channels != 1) throw FormatError(meta.string() + ": field 'channels' must be 1 for a label map");
    shape = h.shape;
    spacing = h.spacing;
    if (h.dtype == "int32") {
      labels = read_raw_payload<std::int32_t>(raw_bin_path(path), voxel_count(shape));
    } else {
      const auto f = read_raw_payload<float>(raw_bin_path(path), voxel_count(shape));
      labels.resize(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) labels[i] = static_cast<std::int32_t>(std::lround(f[i]));
    }
    if (num_classes == 0) num_classes = h.num_classes;
  }
  if (num_classes == 0) {
    const auto mx = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    num_classes = std::max(1, mx + 1);
  }
  LabelMap l(shape, spacing, num_classes, std::move(labels));
  try {
    l.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return l;
}

}  // namespace dgtta
