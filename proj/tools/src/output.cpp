#include "output.hpp"

#include <cstdio>
#include <fstream>

#include "catis/cli/cli.hpp"
#include "catis/error.hpp"

namespace catis::cli {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Provenance::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash));
  return buf;
}

std::string Provenance::comment_line() const {
  return std::string("# catis ") + kToolVersion + " command=" + command + " config=" + hash_hex();
}

nlohmann::ordered_json Provenance::json() const {
  return {{"tool", "catis"}, {"version", kToolVersion}, {"command", command}, {"config_hash", hash_hex()}};
}

void OutputSet::add_csv(const std::string& name, const std::string& body) {
  std::string text = prov_.comment_line() + "\n" + body;
  entries_.push_back({name, [text](const std::filesystem::path& p) { write_text(p, text); }});
}

void OutputSet::add_json(const std::string& name, const nlohmann::ordered_json& body) {
  nlohmann::ordered_json j;
  j["provenance"] = prov_.json();
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  std::string text = j.dump(2) + "\n";
  entries_.push_back({name, [text](const std::filesystem::path& p) { write_text(p, text); }});
}

void OutputSet::add_file(const std::string& name,
                         std::function<void(const std::filesystem::path&)> writer) {
  entries_.push_back({name, std::move(writer)});
}

std::vector<std::filesystem::path> OutputSet::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& e : entries_) {
    auto path = dir / e.name;
    e.writer(path);
    written.push_back(path);
  }
  return written;
}

}  // namespace catis::cli
