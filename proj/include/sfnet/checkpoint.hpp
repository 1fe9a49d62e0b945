#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sfnet/model.hpp"
#include "sfnet/training.hpp"

namespace sfnet {

// Binary checkpoint layout (all integers little-endian):
//   magic "SFNETCKP" (8 bytes), u32 version,
//   u32 config-JSON length + bytes,
//   u32 param count, then per param: u32 name length + bytes, u32 rank,
//     u32 dims[rank], f32 values[numel] (model registration order),
//   u8 optimizer-present flag, optional optimizer blob,
//   u32 epoch, u64 rng seed.
// Save -> load -> save reproduces the file byte for byte.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
    SFNetConfig config;
    std::unique_ptr<SFNet> model;  // parameters overwritten from the file
    bool has_optim = false;
    OptimState optim;
    int epoch = 0;
    std::uint64_t seed = 0;
};

// Writes model parameters (including batchnorm running stats) and, when
// given, the optimizer state. Throws std::runtime_error on I/O failure.
void save_checkpoint(const std::string& path, SFNet& model, int epoch,
                     std::uint64_t seed, const OptimState* optim = nullptr);

// Rebuilds the model from the stored config and overwrites its parameters.
// Throws std::runtime_error on bad magic, version mismatch, truncation,
// unknown/missing params, or shape mismatch.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace sfnet
