#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <limits>

#include "pivotmt/checkpoint.hpp"
#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"
#include "support/gradcheck.hpp"

using namespace pivotmt;

namespace {

bool same_bits(const Parameters& a, const Parameters& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second.shape() != t.shape()) return false;
    if (std::memcmp(t.data(), it->second.data(), t.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("serialization round-trips every bit") {
  const auto config = oracle::tiny_config();
  auto params = init_parameters(config, 13);
  params.at("output.b")[0] = -0.0;
  params.at("output.b")[1] = std::numeric_limits<double>::denorm_min();
  params.at("output.b")[2] = std::numeric_limits<double>::max();
  params.at("output.b")[3] = 0.1;

  const auto bytes = serialize_checkpoint(config, params);
  CHECK(bytes.starts_with("pivotmt-checkpoint 1\n"));
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back.config == config);
  CHECK(same_bits(back.params, params));
  CHECK(serialize_checkpoint(back.config, back.params) == bytes);
}

TEST_CASE("values are stored little-endian") {
  ModelConfig config = oracle::tiny_config();
  const auto params = init_parameters(config, 1);
  const auto bytes = serialize_checkpoint(config, params);
  const std::string header = "output.b 1 7\n";
  const auto at = bytes.find(header);
  REQUIRE(at != std::string::npos);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + at + header.size());
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | raw[i];
  CHECK(std::bit_cast<double>(bits) == params.at("output.b")[0]);
}

TEST_CASE("files round-trip and are byte-identical for equal contents") {
  const auto dir = std::filesystem::temp_directory_path() / "pivotmt_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto config = oracle::tiny_config();
  const auto params = init_parameters(config, 2);
  save_checkpoint(dir / "a.ckpt", config, params);
  save_checkpoint(dir / "b.ckpt", config, init_parameters(config, 2));
  CHECK(io::read_file(dir / "a.ckpt") == io::read_file(dir / "b.ckpt"));
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  CHECK(same_bits(loaded.params, params));
  CHECK_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt"), IoError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto config = oracle::tiny_config();
  const auto bytes = serialize_checkpoint(config, init_parameters(config, 3));
  CHECK_THROWS_AS(deserialize_checkpoint(""), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint("pivotmt-checkpoint 2\n"), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 9)), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "extra"), FormatError);
  std::string renamed = bytes;
  renamed.replace(renamed.find("output.b 1 7"), 12, "output.c 1 7");
  CHECK_THROWS(deserialize_checkpoint(renamed));
}
