#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace catis::cli {

/// Identifies the tool build and the resolved configuration of one run.
struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;

  std::string hash_hex() const;
  /// "# catis <version> command=<cmd> config=<hash>"
  std::string comment_line() const;
  nlohmann::ordered_json json() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text) noexcept;

/// Files of one run, buffered until all computation has finished and then
/// written in insertion order.
class OutputSet {
 public:
  explicit OutputSet(Provenance prov) : prov_(std::move(prov)) {}

  const Provenance& provenance() const noexcept { return prov_; }

  /// CSV body (header first); the provenance comment is prepended.
  void add_csv(const std::string& name, const std::string& body);
  /// JSON object; a "provenance" member is added in front.
  void add_json(const std::string& name, const nlohmann::ordered_json& body);
  /// Arbitrary writer, for binary files.
  void add_file(const std::string& name, std::function<void(const std::filesystem::path&)> writer);

  /// Creates `dir` if needed and writes everything. Returns the paths written.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const;

 private:
  struct Entry {
    std::string name;
    std::function<void(const std::filesystem::path&)> writer;
  };
  Provenance prov_;
  std::vector<Entry> entries_;
};

}  // namespace catis::cli
