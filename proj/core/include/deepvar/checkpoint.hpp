#pragma once

#include <memory>
#include <string>

#include "deepvar/network.hpp"
#include "deepvar/tokenizer.hpp"

namespace deepvar {

// Checkpoint container: "DVAR" magic, u32 version, u64 manifest length, JSON
// manifest (model config, alphabet, tokenizer config, vocabulary, tensor
// directory), then one length-prefixed little-endian f64 section per tensor
// in manifest order. Full byte layout in docs/checkpoint_format.md.
inline constexpr char kCheckpointMagic[4] = {'D', 'V', 'A', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedModel {
  std::unique_ptr<DeepVarModel> model;
  TokenizerConfig tokenizer;
};

void save_checkpoint(const std::string& path, const DeepVarModel& model,
                     const TokenizerConfig& tokenizer);

// Throws DataError with a manifest diagnostic on any corruption.
LoadedModel load_checkpoint(const std::string& path);

}  // namespace deepvar
