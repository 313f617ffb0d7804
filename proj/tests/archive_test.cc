#include <doctest.h>

#include <bit>
#include <cstring>
#include <random>
#include <sstream>

#include "polyprobe/archive.hpp"
#include "polyprobe/errors.hpp"

using namespace polyprobe;

namespace {

ArchiveMeta small_meta() {
  ArchiveMeta m;
  m.model_name = "tiny";
  m.dataset_name = "cities";
  m.language = language_from_code("en");
  m.num_layers = 2;
  m.hidden_dim = 3;
  m.num_samples = 2;
  m.sample_ids = {"a", "b"};
  return m;
}

std::string to_bytes(const Archive& a) {
  std::ostringstream out;
  write_archive(a, out);
  return out.str();
}

Archive from_bytes(const std::string& s) {
  std::istringstream in(s);
  return read_archive(in);
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("write then read returns the same archive") {
  Archive a{small_meta(), {1, 2, 3, 4, 5, 6, -0.0f, 1e-38f, 7, 8, 9, 3.25f}, {0, 1}};
  auto bytes = to_bytes(a);
  auto b = from_bytes(bytes);
  CHECK(b.meta == a.meta);
  CHECK(bitwise_equal(b.tensors, a.tensors));
  CHECK(b.labels == a.labels);
}

TEST_CASE("byte layout") {
  Archive a{small_meta(), std::vector<float>(12, 1.5f), {0, 1}};
  auto bytes = to_bytes(a);
  REQUIRE(bytes.size() > 16);
  CHECK(bytes.substr(0, 4) == "HSAF");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 0);
  CHECK(bytes[7] == 0);
  std::uint64_t meta_len = 0;
  for (int i = 7; i >= 0; --i) meta_len = (meta_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  auto json = bytes.substr(16, meta_len);
  for (const char* key : {"\"format_version\"", "\"model_name\"", "\"dataset_name\"", "\"language\"",
                          "\"num_layers\"", "\"hidden_dim\"", "\"num_samples\"", "\"sample_ids\"",
                          "\"label_names\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
  CHECK(bytes.size() == 16 + meta_len + 12 * 4 + 2);
  // 1.5f = 0x3fc00000, little-endian
  auto p = 16 + meta_len;
  CHECK(static_cast<unsigned char>(bytes[p + 0]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[p + 1]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[p + 2]) == 0xc0);
  CHECK(static_cast<unsigned char>(bytes[p + 3]) == 0x3f);
  CHECK(bytes[bytes.size() - 2] == 0);
  CHECK(bytes[bytes.size() - 1] == 1);
}

TEST_CASE("write rejects bad inputs") {
  std::ostringstream out;
  auto meta = small_meta();
  std::vector<std::uint8_t> labels{0, 1};
  CHECK_THROWS_AS(write_archive(meta, std::vector<float>(11, 0.f), labels, out), DimensionError);
  auto nan_tensor = std::vector<float>(12, 0.f);
  nan_tensor[5] = NAN;
  CHECK_THROWS_AS(write_archive(meta, nan_tensor, labels, out), DataError);
  std::vector<std::uint8_t> bad_labels{0, 2};
  CHECK_THROWS_AS(write_archive(meta, std::vector<float>(12, 0.f), bad_labels, out), DataError);
  meta.sample_ids = {"a", "a"};
  CHECK_THROWS_AS(write_archive(meta, std::vector<float>(12, 0.f), labels, out), DataError);
  CHECK(out.str().empty());
}

TEST_CASE("read rejects malformed input") {
  Archive a{small_meta(), std::vector<float>(12, 1.0f), {0, 1}};
  auto bytes = to_bytes(a);

  auto bad_magic = bytes;
  bad_magic.replace(0, 4, "XXXX");
  CHECK_THROWS_AS(from_bytes(bad_magic), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(from_bytes(bad_version), VersionError);

  auto header_len = bytes.size() - 12 * 4 - 2;
  CHECK_THROWS_AS(from_bytes(bytes.substr(0, header_len + 20)), TruncationError);
  CHECK_THROWS_AS(from_bytes(bytes.substr(0, bytes.size() - 1)), TruncationError);
  CHECK_THROWS_AS(from_bytes(bytes + "x"), FormatError);
  CHECK_THROWS_AS(from_bytes(bytes.substr(0, 10)), TruncationError);

  auto bad_label = bytes;
  bad_label.back() = 5;
  CHECK_THROWS_AS(from_bytes(bad_label), DataError);
}

TEST_CASE("a header claiming a huge extent fails without allocating it") {
  auto meta = small_meta();
  meta.num_layers = 1'000'000'000;
  meta.hidden_dim = 1'000'000;
  auto json = meta_to_json(meta);
  std::string bytes = "HSAF";
  bytes += std::string("\x01\x00\x00\x00", 4);
  std::uint64_t len = json.size();
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  bytes += json;
  bytes += std::string(64, '\0');
  CHECK_THROWS_AS(from_bytes(bytes), TruncationError);

  meta.num_layers = std::uint64_t{1} << 40;
  meta.hidden_dim = std::uint64_t{1} << 40;
  CHECK_THROWS_AS(meta.tensor_extent(), DimensionError);
}

TEST_CASE("registry rows") {
  auto reg = model_registry();
  REQUIRE(reg.size() == 5);
  struct Row {
    const char* name;
    std::uint64_t layers, dim;
  };
  for (auto r : {Row{"Qwen-0.5B", 24, 1024}, Row{"Qwen-1.8B", 24, 2048}, Row{"Qwen-7B", 32, 4096},
                 Row{"Gemma-2B", 18, 2048}, Row{"Gemma-7B", 28, 3072}}) {
    auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& e) { return e.model_name == r.name; });
    REQUIRE(it != reg.end());
    CHECK(it->layer_count == r.layers);
    CHECK(it->hidden_dim == r.dim);
  }
}

TEST_CASE("validate_against_registry") {
  auto meta = small_meta();
  auto check = [&](const char* model, std::uint64_t layers, std::uint64_t dim) {
    meta.model_name = model;
    meta.num_layers = layers;
    meta.hidden_dim = dim;
    return validate_against_registry(meta);
  };
  CHECK(check("Qwen-0.5B", 24, 1024).empty());
  CHECK(check("Qwen-0.5B", 25, 1024).empty());
  CHECK(check("Gemma-2B", 18, 2048).empty());
  CHECK(check("Qwen-7B", 32, 4096).empty());
  auto f = check("Gemma-7B", 28, 4096);
  REQUIRE(f.size() == 1);
  CHECK(f[0].field == "hidden_dim");
  CHECK(f[0].message.find("3072") != std::string::npos);
  CHECK(check("Gemma-7B", 40, 4096).size() == 2);
  CHECK(check("SomeOtherModel", 3, 7).empty());
}

TEST_CASE("randomized round-trip property") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 100; ++k) {
    Archive a;
    a.meta.model_name = "m" + std::to_string(k);
    a.meta.dataset_name = "d";
    a.meta.language = language_from_code(k % 2 ? "hi" : "xx");
    a.meta.num_layers = 1 + rng() % 4;
    a.meta.hidden_dim = 1 + rng() % 9;
    a.meta.num_samples = 2 + rng() % 7;
    for (std::uint64_t i = 0; i < a.meta.num_samples; ++i) a.meta.sample_ids.push_back("id" + std::to_string(i));
    a.meta.label_names = {"no", "yes"};
    a.tensors.resize(a.meta.tensor_extent());
    for (auto& v : a.tensors) {
      float f;
      do {
        f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
      } while (!std::isfinite(f));
      v = f;
    }
    for (std::uint64_t i = 0; i < a.meta.num_samples; ++i) a.labels.push_back(rng() & 1);
    auto b = from_bytes(to_bytes(a));
    CHECK(b.meta == a.meta);
    CHECK(bitwise_equal(b.tensors, a.tensors));
    CHECK(b.labels == a.labels);
  }
}

TEST_CASE("layer and row views") {
  Archive a{small_meta(), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, {0, 1}};
  CHECK(a.layer(1)[0] == 7.0f);
  CHECK(a.row(1, 1)[2] == 12.0f);
  CHECK_THROWS_AS(a.layer(2), DimensionError);
}
