#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace dgtta {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Sectioned "key = value" text (INI layout). Sections and keys keep their
/// insertion order so written files are stable.
class KeyValueDocument {
 public:
  using Entries = std::vector<std::pair<std::string, std::string>>;

  /// Lines starting with ';' or '#' are comments. Duplicate keys and malformed
  /// lines raise ConfigError.
  static KeyValueDocument parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueDocument read(const std::filesystem::path& path);

  std::string str() const;
  void write(const std::filesystem::path& path) const;

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> find(const std::string& section, const std::string& key) const;
  /// Throws ConfigError naming section and key when absent.
  std::string get(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, const char* value) {
    set(section, key, std::string(value));
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void set(const std::string& section, const std::string& key, T value) {
    if constexpr (std::is_same_v<T, bool>) {
      set(section, key, std::string(value ? "true" : "false"));
    } else if constexpr (std::is_floating_point_v<T>) {
      set(section, key, format_double(static_cast<double>(value)));
    } else {
      set(section, key, std::to_string(value));
    }
  }

  std::vector<std::string> sections() const;
  const Entries& entries(const std::string& section) const;

  /// Copies every section of `other`, prefixing section names with `prefix`.
  void merge(const KeyValueDocument& other, const std::string& prefix = "");

 private:
  std::vector<std::pair<std::string, Entries>> sections_;
  Entries* section_entries(const std::string& section);
  const Entries* section_entries(const std::string& section) const;
};

/// Typed readers over one section. Every lookup is recorded so that callers
/// can reject unknown keys.
class SectionReader {
 public:
  SectionReader(const KeyValueDocument& doc, std::string section);

  bool present() const { return present_; }
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  /// Comma- or 'x'-separated triple such as "64,64,64" or "64x64x64".
  std::array<std::size_t, 3> get_triple(const std::string& key, std::array<std::size_t, 3> fallback);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);

  /// ConfigError listing keys of the section never looked up.
  void reject_unknown() const;

 private:
  const KeyValueDocument& doc_;
  std::string section_;
  bool present_ = false;
  std::vector<std::string> seen_;
  std::optional<std::string> lookup(const std::string& key);
};

std::vector<int> parse_int_list(const std::string& text);
std::array<std::size_t, 3> parse_triple(const std::string& text);
std::string format_triple(const std::array<std::size_t, 3>& t);

}  // namespace dgtta
