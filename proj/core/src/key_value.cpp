#include "glamor/key_value.hpp"

#include <fstream>

#include "glamor/errors.hpp"
#include "glamor/text_format.hpp"

namespace glamor {

KeyValueFile KeyValueFile::parse(std::istream& in) {
  KeyValueFile file;
  LineReader reader(in);
  std::string line;
  while (reader.next(line)) {
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw DataError("expected key=value", reader.line_number());
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    if (key.empty()) throw DataError("empty key", reader.line_number());
    auto [it, inserted] = file.entries_.emplace(std::string(key), Entry{std::string(value), reader.line_number()});
    if (!inserted) throw DataError("duplicate key '" + std::string(key) + "'", reader.line_number());
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return parse(in);
  } catch (const DataError& e) {
    throw DataError::prefixed(e, path.string());
  }
}

bool KeyValueFile::contains(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> KeyValueFile::take(std::string_view key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  it->second.used = true;
  return it->second.value;
}

std::optional<double> KeyValueFile::take_real(std::string_view key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  it->second.used = true;
  return parse_real(it->second.value, it->second.line);
}

std::optional<std::size_t> KeyValueFile::take_size(std::string_view key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  it->second.used = true;
  return parse_size(it->second.value, it->second.line);
}

std::optional<std::uint64_t> KeyValueFile::take_u64(std::string_view key) {
  auto v = take_size(key);
  if (!v) return std::nullopt;
  return static_cast<std::uint64_t>(*v);
}

std::optional<bool> KeyValueFile::take_bool(std::string_view key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  it->second.used = true;
  const auto& v = it->second.value;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError("expected a boolean for '" + std::string(key) + "', got '" + v + "'", it->second.line);
}

void KeyValueFile::reject_unused() const {
  for (const auto& [key, entry] : entries_) {
    if (!entry.used) {
      throw ConfigError("line " + std::to_string(entry.line) + ": unknown config key '" + key + "'");
    }
  }
}

}  // namespace glamor
