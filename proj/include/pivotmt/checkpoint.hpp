#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pivotmt/model.hpp"

namespace pivotmt {

struct Checkpoint {
  ModelConfig config;
  Parameters params;
};

/// Layout:
///
///     pivotmt-checkpoint 1
///     <ModelConfig as key=value lines>
///     params <count>
///     then per tensor, in name order:
///     <path> <rank> <dim>...
///     <product(dims) little-endian IEEE-754 binary64 values>
///     <newline>
///
/// Serialization is a pure function of the contents, so equal checkpoints
/// produce identical bytes.
std::string serialize_checkpoint(const ModelConfig& config, const Parameters& params);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const Parameters& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pivotmt
