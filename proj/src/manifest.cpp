#include "dgtta/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "dgtta/error.hpp"

namespace dgtta {

void RunManifest::append_to(KeyValueDocument& doc) const {
  doc.set("run", "command_line", command_line);
  doc.set("run", "tool_version", tool_version);
  for (const auto& [k, v] : seeds) doc.set("seeds", k, v);
  for (const auto& [k, v] : checkpoint_hashes) doc.set("checkpoints", k, v);
  for (const auto& [k, v] : timings_s) doc.set("timings", k + "_s", v);
  doc.merge(config_snapshot, "config.");
}

void RunManifest::write(const std::filesystem::path& dir, const KeyValueDocument& extra) const {
  std::filesystem::create_directories(dir);
  KeyValueDocument doc;
  append_to(doc);
  doc.merge(extra);
  doc.write(dir / kManifestFile);
}

namespace {

struct DigestContext {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  DigestContext() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
      throw NumericalError("SHA-256 initialisation failed");
    }
  }
  void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx.get(), data, size); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof(buf), "%02x", md[i]);
      out += buf;
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
  DigestContext d;
  d.update(data, size);
  return d.hex();
}

std::string sha256_hex(const std::string& text) { return sha256_hex(text.data(), text.size()); }

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  DigestContext d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

}  // namespace dgtta
