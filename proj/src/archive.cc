#include "polyprobe/archive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json_util.hpp"
#include "polyprobe/errors.hpp"

namespace polyprobe {
namespace {

static_assert(std::numeric_limits<float>::is_iec559);

constexpr std::size_t kChunkBytes = std::size_t{1} << 20;
// Metadata is a few bytes per sample id; anything past this is not a real header.
constexpr std::uint64_t kMaxMetadataBytes = std::uint64_t{1} << 30;

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw DimensionError("archive extent overflows 64 bits");
  return r;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int width) {
  std::uint64_t v = 0;
  for (int i = width - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void read_fixed(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw TruncationError(std::string("archive truncated in ") + what);
  }
}

// Reads `count` bytes, growing the buffer one chunk at a time.
std::vector<char> read_chunked(std::istream& in, std::uint64_t count, const char* what) {
  std::vector<char> out;
  while (out.size() < count) {
    auto step = static_cast<std::size_t>(std::min<std::uint64_t>(kChunkBytes, count - out.size()));
    auto old = out.size();
    out.resize(old + step);
    in.read(out.data() + old, static_cast<std::streamsize>(step));
    if (static_cast<std::size_t>(in.gcount()) != step) {
      throw TruncationError(std::string("archive truncated in ") + what);
    }
  }
  return out;
}

}  // namespace

std::uint64_t ArchiveMeta::tensor_extent() const {
  return checked_mul(checked_mul(num_layers, num_samples), hidden_dim);
}

void validate_meta(const ArchiveMeta& meta) {
  if (meta.format_version != kArchiveFormatVersion) {
    throw VersionError("unsupported archive format version " + std::to_string(meta.format_version));
  }
  if (meta.num_layers < 1) throw DimensionError("num_layers must be >= 1");
  if (meta.hidden_dim < 1) throw DimensionError("hidden_dim must be >= 1");
  if (meta.num_samples < 2) throw DimensionError("num_samples must be >= 2");
  if (meta.sample_ids.size() != meta.num_samples) {
    throw DimensionError("sample_ids has " + std::to_string(meta.sample_ids.size()) +
                         " entries, num_samples is " + std::to_string(meta.num_samples));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : meta.sample_ids) {
    if (!seen.insert(id).second) throw DataError("duplicate sample id '" + id + "'");
  }
  validate_language(meta.language);
  (void)meta.tensor_extent();
}

void validate_archive(const ArchiveMeta& meta, std::span<const float> tensors,
                      std::span<const std::uint8_t> labels) {
  validate_meta(meta);
  if (tensors.size() != meta.tensor_extent()) {
    throw DimensionError("tensor has " + std::to_string(tensors.size()) + " values, expected " +
                         std::to_string(meta.tensor_extent()));
  }
  if (labels.size() != meta.num_samples) {
    throw DimensionError("labels has " + std::to_string(labels.size()) + " entries, expected " +
                         std::to_string(meta.num_samples));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!std::isfinite(tensors[i])) {
      throw DataError("non-finite value at flat tensor index " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw DataError("label at sample " + std::to_string(i) + " is not 0 or 1");
  }
}

std::span<const float> Archive::layer(std::uint64_t slot) const {
  if (slot >= meta.num_layers) throw DimensionError("layer slot out of range");
  auto stride = meta.num_samples * meta.hidden_dim;
  return std::span<const float>(tensors).subspan(slot * stride, stride);
}

std::span<const float> Archive::row(std::uint64_t slot, std::uint64_t sample) const {
  if (sample >= meta.num_samples) throw DimensionError("sample index out of range");
  return layer(slot).subspan(sample * meta.hidden_dim, meta.hidden_dim);
}

std::string meta_to_json(const ArchiveMeta& meta) {
  detail::json j;
  j["format_version"] = meta.format_version;
  j["model_name"] = meta.model_name;
  j["dataset_name"] = meta.dataset_name;
  j["language"] = detail::language_to_json(meta.language);
  j["num_layers"] = meta.num_layers;
  j["hidden_dim"] = meta.hidden_dim;
  j["num_samples"] = meta.num_samples;
  j["sample_ids"] = meta.sample_ids;
  j["label_names"] = meta.label_names;
  return j.dump();
}

ArchiveMeta meta_from_json(std::string_view text) {
  ArchiveMeta meta;
  try {
    auto j = detail::json::parse(text);
    meta.format_version = j.at("format_version").get<std::uint32_t>();
    meta.model_name = j.at("model_name").get<std::string>();
    meta.dataset_name = j.at("dataset_name").get<std::string>();
    meta.language = detail::language_from_json(j.at("language"));
    meta.num_layers = j.at("num_layers").get<std::uint64_t>();
    meta.hidden_dim = j.at("hidden_dim").get<std::uint64_t>();
    meta.num_samples = j.at("num_samples").get<std::uint64_t>();
    meta.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    const auto& names = j.at("label_names");
    if (!names.is_array() || names.size() != 2) {
      throw FormatError("label_names must be a pair of strings");
    }
    meta.label_names = {names[0].get<std::string>(), names[1].get<std::string>()};
  } catch (const detail::json::exception& e) {
    throw FormatError(std::string("malformed archive metadata: ") + e.what());
  }
  return meta;
}

std::uint64_t write_archive(const ArchiveMeta& meta, std::span<const float> tensors,
                            std::span<const std::uint8_t> labels, std::ostream& out) {
  validate_archive(meta, tensors, labels);
  std::string buf(kArchiveMagic.begin(), kArchiveMagic.end());
  auto meta_json = meta_to_json(meta);
  put_u32(buf, meta.format_version);
  put_u64(buf, meta_json.size());
  buf += meta_json;
  std::uint64_t written = 0;
  auto flush = [&] {
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    written += buf.size();
    buf.clear();
  };
  for (float v : tensors) {
    put_u32(buf, std::bit_cast<std::uint32_t>(v));
    if (buf.size() >= kChunkBytes) flush();
  }
  buf.append(reinterpret_cast<const char*>(labels.data()), labels.size());
  flush();
  if (!out) throw Error("write failed");
  return written;
}

Archive read_archive(std::istream& in) {
  unsigned char header[16];
  read_fixed(in, reinterpret_cast<char*>(header), 4, "magic");
  if (!std::equal(kArchiveMagic.begin(), kArchiveMagic.end(), header,
                  [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
    throw FormatError("bad magic: not an HSAF archive");
  }
  read_fixed(in, reinterpret_cast<char*>(header + 4), 12, "header");
  auto version = static_cast<std::uint32_t>(get_le(header + 4, 4));
  if (version != kArchiveFormatVersion) {
    throw VersionError("unsupported archive format version " + std::to_string(version));
  }
  auto meta_len = get_le(header + 8, 8);
  if (meta_len > kMaxMetadataBytes) throw FormatError("metadata length is implausibly large");
  auto meta_bytes = read_chunked(in, meta_len, "metadata");

  Archive a;
  a.meta = meta_from_json(std::string_view(meta_bytes.data(), meta_bytes.size()));
  if (a.meta.format_version != version) {
    throw FormatError("metadata format_version disagrees with header");
  }
  validate_meta(a.meta);

  auto extent = a.meta.tensor_extent();
  auto raw = read_chunked(in, checked_mul(extent, 4), "tensor payload");
  a.tensors.resize(extent);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::uint64_t i = 0; i < extent; ++i) {
    a.tensors[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p + 4 * i, 4)));
  }
  raw = {};
  auto label_bytes = read_chunked(in, a.meta.num_samples, "labels");
  a.labels.assign(label_bytes.begin(), label_bytes.end());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after archive labels");
  }
  validate_archive(a);
  return a;
}

Archive read_archive_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open archive '" + path.string() + "'");
  return read_archive(in);
}

std::uint64_t write_archive_file(const Archive& a, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  std::uint64_t n;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    n = write_archive(a, out);
    out.close();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
  return n;
}

std::span<const ModelRegistryEntry> model_registry() {
  static const std::vector<ModelRegistryEntry> kRegistry = {
      {"Qwen-0.5B", 24, 1024}, {"Qwen-1.8B", 24, 2048}, {"Qwen-7B", 32, 4096},
      {"Gemma-2B", 18, 2048},  {"Gemma-7B", 28, 3072},
  };
  return kRegistry;
}

std::vector<Finding> validate_against_registry(const ArchiveMeta& meta,
                                               std::span<const ModelRegistryEntry> registry) {
  std::vector<Finding> findings;
  auto it = std::find_if(registry.begin(), registry.end(),
                         [&](const auto& e) { return e.model_name == meta.model_name; });
  if (it == registry.end()) return findings;
  if (meta.num_layers != it->layer_count && meta.num_layers != it->layer_count + 1) {
    findings.push_back({"num_layers", "num_layers expected " + std::to_string(it->layer_count) +
                                          " or " + std::to_string(it->layer_count + 1) +
                                          " (with embedding slot), got " +
                                          std::to_string(meta.num_layers)});
  }
  if (meta.hidden_dim != it->hidden_dim) {
    findings.push_back({"hidden_dim", "hidden_dim expected " + std::to_string(it->hidden_dim) +
                                          ", got " + std::to_string(meta.hidden_dim)});
  }
  return findings;
}

}  // namespace polyprobe
