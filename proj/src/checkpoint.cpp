#include "pivotmt/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>

#include <fmt/format.h>

#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"

namespace pivotmt {

namespace {

constexpr std::string_view kMagic = "pivotmt-checkpoint 1";

void put_double(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_double(std::string_view bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(bytes[i]);
  return std::bit_cast<double>(bits);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) throw FormatError("checkpoint: truncated header");
    auto out = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint: truncated tensor data");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::size_t parse_size(std::string_view text) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw FormatError(fmt::format("checkpoint: bad number '{}'", text));
  return v;
}

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    auto end = line.find(' ', start);
    if (end == std::string_view::npos) end = line.size();
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const ModelConfig& config, const Parameters& params) {
  check_parameters(params, config);
  std::string out(kMagic);
  out += '\n';
  out += config.to_keyvalues().to_string();
  out += fmt::format("params {}\n", params.size());
  for (const auto& [name, t] : params) {
    out += fmt::format("{} {}", name, t.rank());
    for (auto d : t.shape()) out += fmt::format(" {}", d);
    out += '\n';
    for (double v : t.values()) put_double(out, v);
    out += '\n';
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.line() != kMagic) throw FormatError("checkpoint: unrecognized header or version");

  std::string header;
  std::string_view line;
  while (!(line = in.line()).starts_with("params ")) {
    header += line;
    header += '\n';
  }
  Checkpoint ck;
  try {
    ck.config = ModelConfig::from_keyvalues(KeyValues::parse(header, "checkpoint header"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  const std::size_t count = parse_size(line.substr(7));
  for (std::size_t i = 0; i < count; ++i) {
    const auto fields = words(in.line());
    if (fields.size() < 2) throw FormatError("checkpoint: bad tensor header");
    const std::size_t rank = parse_size(fields[1]);
    if (fields.size() != rank + 2) throw FormatError("checkpoint: tensor rank does not match dims");
    Shape shape;
    for (std::size_t a = 0; a < rank; ++a) shape.push_back(parse_size(fields[a + 2]));
    std::vector<double> values(shape_size(shape));
    const auto raw = in.take(values.size() * 8);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = get_double(raw.substr(k * 8, 8));
    if (in.take(1) != "\n") throw FormatError("checkpoint: missing tensor terminator");
    if (!ck.params.emplace(std::string(fields[0]), Tensor(shape, std::move(values))).second)
      throw FormatError(fmt::format("checkpoint: duplicate tensor {}", fields[0]));
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes");
  try {
    check_parameters(ck.params, ck.config);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const Parameters& params) {
  io::write_file_atomic(path, serialize_checkpoint(config, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace pivotmt
