#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace glamor {

/// `key=value` lines; blank lines and lines starting with '#' are ignored.
/// Consumers take() the keys they understand and finally call
/// reject_unused() so typos surface as errors.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in);
  static KeyValueFile load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  std::optional<std::string> take(std::string_view key);

  std::optional<double> take_real(std::string_view key);
  std::optional<std::size_t> take_size(std::string_view key);
  std::optional<std::uint64_t> take_u64(std::string_view key);
  std::optional<bool> take_bool(std::string_view key);

  /// Throws ConfigError naming the first key nobody consumed.
  void reject_unused() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace glamor
