#pragma once

// Hidden-State Archive Format (HSAF), version 1. Little-endian throughout:
//
//   "HSAF"                      4 bytes magic
//   format_version              u32 (= 1)
//   metadata_length             u64
//   metadata                    UTF-8 JSON object, see ArchiveMeta
//   tensors                     num_layers * num_samples * hidden_dim f32,
//                               layer-major, then sample, then dimension
//   labels                      num_samples bytes, each 0 or 1
//
// No padding, no compression, nothing after the labels.
//
// Slot 0 holds the embedding output; slot l >= 1 holds the residual stream
// at the end of transformer block l. An archive of a model with L blocks
// therefore has num_layers = L + 1.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "polyprobe/language.hpp"

namespace polyprobe {

inline constexpr std::uint32_t kArchiveFormatVersion = 1;
inline constexpr std::array<char, 4> kArchiveMagic = {'H', 'S', 'A', 'F'};

struct ArchiveMeta {
  std::uint32_t format_version = kArchiveFormatVersion;
  std::string model_name;
  std::string dataset_name;
  LanguageTag language;
  std::uint64_t num_layers = 0;
  std::uint64_t hidden_dim = 0;
  std::uint64_t num_samples = 0;
  std::vector<std::string> sample_ids;
  std::array<std::string, 2> label_names = {"negative", "positive"};

  // num_layers * num_samples * hidden_dim; throws DimensionError on overflow.
  std::uint64_t tensor_extent() const;

  friend bool operator==(const ArchiveMeta&, const ArchiveMeta&) = default;
};

// Throws DimensionError / DataError / LanguageError when an invariant fails.
void validate_meta(const ArchiveMeta& meta);

struct Archive {
  ArchiveMeta meta;
  std::vector<float> tensors;
  std::vector<std::uint8_t> labels;

  // All samples at one layer slot, row-major [num_samples][hidden_dim].
  std::span<const float> layer(std::uint64_t slot) const;
  std::span<const float> row(std::uint64_t slot, std::uint64_t sample) const;

  friend bool operator==(const Archive&, const Archive&) = default;
};

void validate_archive(const ArchiveMeta& meta, std::span<const float> tensors,
                      std::span<const std::uint8_t> labels);
inline void validate_archive(const Archive& a) { validate_archive(a.meta, a.tensors, a.labels); }

// Returns the number of bytes written. Validates before emitting anything.
std::uint64_t write_archive(const ArchiveMeta& meta, std::span<const float> tensors,
                            std::span<const std::uint8_t> labels, std::ostream& out);
inline std::uint64_t write_archive(const Archive& a, std::ostream& out) {
  return write_archive(a.meta, a.tensors, a.labels, out);
}

// Reads exactly one archive and requires the stream to end afterwards.
// Payload buffers grow as bytes actually arrive, so a header that claims a
// huge extent fails with TruncationError instead of a huge allocation.
Archive read_archive(std::istream& in);

Archive read_archive_file(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames over the destination.
std::uint64_t write_archive_file(const Archive& a, const std::filesystem::path& path);

std::string meta_to_json(const ArchiveMeta& meta);
ArchiveMeta meta_from_json(std::string_view text);

struct ModelRegistryEntry {
  std::string model_name;
  std::uint64_t layer_count = 0;
  std::uint64_t hidden_dim = 0;
};

// Qwen-0.5B, Qwen-1.8B, Qwen-7B, Gemma-2B, Gemma-7B.
std::span<const ModelRegistryEntry> model_registry();

struct Finding {
  std::string field;
  std::string message;
};

// Empty when the model is unknown or its shape matches the registry row.
// num_layers may count either the L block outputs or L + 1 slots including
// the embedding output.
std::vector<Finding> validate_against_registry(const ArchiveMeta& meta,
                                               std::span<const ModelRegistryEntry> registry);
inline std::vector<Finding> validate_against_registry(const ArchiveMeta& meta) {
  return validate_against_registry(meta, model_registry());
}

}  // namespace polyprobe
