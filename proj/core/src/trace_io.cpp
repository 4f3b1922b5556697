#include "catis/trace_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "catis/error.hpp"

namespace catis {
namespace {

constexpr std::array<char, 4> kMagic = {'T', 'R', 'C', '1'};
// Guards against absurd allocations from corrupt headers.
constexpr std::uint64_t kMaxElements = 1ULL << 31;

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(name_ + ": truncated while reading " + what);
    }
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

 private:
  std::istream& in_;
  std::string name_;
};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out_.write(b, 4);
  }

  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

 private:
  std::ostream& out_;
};

}  // namespace

LayerTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file: " + path.string());
  Reader rd(in, path.string());

  std::array<char, 4> magic{};
  rd.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw FormatError(path.string() + ": bad magic, expected TRC1");
  const std::uint32_t version = rd.u32("version");
  if (version != kTraceVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t depth = rd.u32("model depth");
  const std::uint32_t layer_count = rd.u32("layer count");
  if (layer_count > depth) {
    throw ValidationError(path.string() + ": layer count exceeds model depth");
  }

  std::vector<TraceLayer> layers;
  layers.reserve(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const std::uint32_t np = rd.u32("N_p");
    const std::uint32_t d = rd.u32("d");
    const std::uint32_t flags = rd.u32("flags");
    if (np == 0 || d == 0) {
      throw ValidationError(path.string() + ": layer " + std::to_string(l) + " has N_p or d = 0");
    }
    if (flags & ~(kFlagClsAttention | kFlagSizes)) {
      throw FormatError(path.string() + ": unknown flag bits in layer " + std::to_string(l));
    }
    if (static_cast<std::uint64_t>(np) * d > kMaxElements) {
      throw FormatError(path.string() + ": layer " + std::to_string(l) + " too large");
    }

    FeatureMatrix features(np, d);
    for (std::uint32_t i = 0; i < np; ++i) {
      for (std::uint32_t k = 0; k < d; ++k) features(i, k) = rd.f32("features");
    }
    std::optional<std::vector<double>> attention;
    if (flags & kFlagClsAttention) {
      attention.emplace(np);
      for (auto& a : *attention) a = rd.f32("cls attention");
    }
    std::vector<std::uint32_t> sizes(np, 1);
    if (flags & kFlagSizes) {
      for (auto& s : sizes) s = rd.u32("sizes");
    }
    try {
      auto pop = TokenPopulation::from_sizes(std::move(features), std::move(sizes));
      if (attention) validate_attention(*attention, pop.patch_count());
      layers.push_back({std::move(pop), std::move(attention)});
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": layer " + std::to_string(l) + ": " + e.what());
    }
  }
  return LayerTrace(depth, std::move(layers));
}

void save_trace(const LayerTrace& trace, const std::filesystem::path& path) {
  for (const auto& layer : trace.layers()) {
    if (layer.population.has_cls()) {
      throw ValidationError("trace files store patch tokens only; drop the CLS row first");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  Writer wr(out);

  out.write(kMagic.data(), kMagic.size());
  wr.u32(kTraceVersion);
  wr.u32(trace.model_depth());
  wr.u32(static_cast<std::uint32_t>(trace.size()));
  for (const auto& layer : trace.layers()) {
    const auto& pop = layer.population;
    const auto sizes = pop.sizes();
    const bool write_sizes =
        std::any_of(sizes.begin(), sizes.end(), [](std::uint32_t s) { return s != 1; });
    std::uint32_t flags = 0;
    if (layer.cls_attention) flags |= kFlagClsAttention;
    if (write_sizes) flags |= kFlagSizes;

    wr.u32(static_cast<std::uint32_t>(pop.rows()));
    wr.u32(static_cast<std::uint32_t>(pop.dim()));
    wr.u32(flags);
    const auto& f = pop.features();
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index k = 0; k < f.cols(); ++k) wr.f32(f(i, k));
    }
    if (layer.cls_attention) {
      for (double a : *layer.cls_attention) wr.f32(a);
    }
    if (write_sizes) {
      for (auto s : sizes) wr.u32(s);
    }
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace catis
