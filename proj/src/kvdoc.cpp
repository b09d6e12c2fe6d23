#include "dgtta/kvdoc.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dgtta/error.hpp"

namespace dgtta {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

KeyValueDocument KeyValueDocument::parse(const std::string& text, const std::string& origin) {
  // The INI reader only knows ';' comments.
  std::istringstream lines(text);
  std::string line, cleaned;
  while (std::getline(lines, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') line[first] = ';';
    cleaned += line;
    cleaned += '\n';
  }
  pt::ptree tree;
  std::istringstream in(cleaned);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  KeyValueDocument doc;
  for (const auto& [name, node] : tree) {
    if (node.empty() && !node.data().empty()) {
      throw ConfigError(origin + ": key '" + name + "' is outside any [section]");
    }
    if (node.empty() && !doc.has_section(name)) doc.sections_.push_back({name, {}});
    for (const auto& [key, leaf] : node) doc.set(name, key, leaf.get_value<std::string>());
  }
  return doc;
}

KeyValueDocument KeyValueDocument::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string KeyValueDocument::str() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, entries] : sections_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

void KeyValueDocument::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << str();
  if (!out) throw DataError("write failed: " + path.string());
}

KeyValueDocument::Entries* KeyValueDocument::section_entries(const std::string& section) {
  for (auto& [name, entries] : sections_) {
    if (name == section) return &entries;
  }
  return nullptr;
}

const KeyValueDocument::Entries* KeyValueDocument::section_entries(const std::string& section) const {
  for (const auto& [name, entries] : sections_) {
    if (name == section) return &entries;
  }
  return nullptr;
}

bool KeyValueDocument::has_section(const std::string& section) const { return section_entries(section) != nullptr; }

bool KeyValueDocument::has(const std::string& section, const std::string& key) const {
  return find(section, key).has_value();
}

std::optional<std::string> KeyValueDocument::find(const std::string& section, const std::string& key) const {
  const auto* e = section_entries(section);
  if (!e) return std::nullopt;
  for (const auto& [k, v] : *e) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string KeyValueDocument::get(const std::string& section, const std::string& key) const {
  auto v = find(section, key);
  if (!v) throw ConfigError("missing key '" + key + "' in section [" + section + "]");
  return *v;
}

void KeyValueDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  auto* e = section_entries(section);
  if (!e) {
    sections_.push_back({section, {}});
    e = &sections_.back().second;
  }
  for (auto& [k, v] : *e) {
    if (k == key) {
      v = value;
      return;
    }
  }
  e->emplace_back(key, value);
}

std::vector<std::string> KeyValueDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& s : sections_) out.push_back(s.first);
  return out;
}

const KeyValueDocument::Entries& KeyValueDocument::entries(const std::string& section) const {
  static const Entries empty;
  const auto* e = section_entries(section);
  return e ? *e : empty;
}

void KeyValueDocument::merge(const KeyValueDocument& other, const std::string& prefix) {
  for (const auto& [name, entries] : other.sections_) {
    for (const auto& [k, v] : entries) set(prefix + name, k, v);
  }
}

SectionReader::SectionReader(const KeyValueDocument& doc, std::string section)
    : doc_(doc), section_(std::move(section)), present_(doc.has_section(section_)) {}

std::optional<std::string> SectionReader::lookup(const std::string& key) {
  seen_.push_back(key);
  return doc_.find(section_, key);
}

namespace {

[[noreturn]] void bad_value(const std::string& section, const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("[" + section + "] " + key + " = '" + value + "': expected " + expected);
}

}  // namespace

std::string SectionReader::get_string(const std::string& key, const std::string& fallback) {
  return lookup(key).value_or(fallback);
}

double SectionReader::get_double(const std::string& key, double fallback) {
  auto v = lookup(key);
  if (!v) return fallback;
  double out = 0.0;
  auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) bad_value(section_, key, *v, "a number");
  return out;
}

long long SectionReader::get_int(const std::string& key, long long fallback) {
  auto v = lookup(key);
  if (!v) return fallback;
  long long out = 0;
  auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) bad_value(section_, key, *v, "an integer");
  return out;
}

std::uint64_t SectionReader::get_uint64(const std::string& key, std::uint64_t fallback) {
  auto v = lookup(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
    bad_value(section_, key, *v, "a non-negative integer");
  }
  return out;
}

bool SectionReader::get_bool(const std::string& key, bool fallback) {
  auto v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(section_, key, *v, "true or false");
}

std::array<std::size_t, 3> SectionReader::get_triple(const std::string& key, std::array<std::size_t, 3> fallback) {
  auto v = lookup(key);
  if (!v) return fallback;
  try {
    return parse_triple(*v);
  } catch (const Error&) {
    bad_value(section_, key, *v, "three positive integers");
  }
}

std::vector<int> SectionReader::get_int_list(const std::string& key, std::vector<int> fallback) {
  auto v = lookup(key);
  if (!v) return fallback;
  try {
    return parse_int_list(*v);
  } catch (const Error&) {
    bad_value(section_, key, *v, "a comma-separated integer list");
  }
}

void SectionReader::reject_unknown() const {
  std::string unknown;
  for (const auto& [k, v] : doc_.entries(section_)) {
    if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("unknown key(s) in section [" + section_ + "]: " + unknown);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    if (b == std::string::npos) throw InvalidArgument("empty entry in list '" + text + "'");
    token = token.substr(b, e - b + 1);
    int v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw InvalidArgument("not an integer: '" + token + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty list");
  return out;
}

std::array<std::size_t, 3> parse_triple(const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), 'x', ',');
  auto v = parse_int_list(t);
  if (v.size() == 1) v = {v[0], v[0], v[0]};
  if (v.size() != 3 || *std::min_element(v.begin(), v.end()) <= 0) {
    throw InvalidArgument("expected three positive integers, got '" + text + "'");
  }
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
}

std::string format_triple(const std::array<std::size_t, 3>& t) {
  return std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]);
}

}  // namespace dgtta
