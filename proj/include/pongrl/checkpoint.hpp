#pragma once

#include <cstdint>
#include <string>

#include "pongrl/nn.hpp"

namespace pongrl {

// Checkpoint file layout ("PGNN" format, version 1):
//   magic        4 bytes  "PGNN"
//   version      u32 LE
//   desc_len     u32 LE
//   descriptor   desc_len bytes, UTF-8 canonical architecture string
//   blobs        per parameter block, float32 LE row-major, in network
//                block order (layer w, layer b, ..., value head w, b)
//   crc32        u32 LE over desc_len + descriptor + blobs
struct CheckpointMeta {
    uint32_t format_version = 1;
    std::string descriptor; // canonical, with head annotations
};

void save_checkpoint(const nn::Network<float>& net, const std::string& path);

// Throws IoError on missing file, truncation, CRC mismatch or version
// mismatch. If `expect_arch` is non-empty it must match the stored
// canonical descriptor.
nn::Network<float> load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr,
                                   const std::string& expect_arch = {});

// Zero-initialized network with the given architecture (checkpoint loading,
// tests).
template <class T> nn::Network<T> network_from_spec(const nn::ArchitectureSpec& spec) {
    auto net = nn::init_network<T>(spec, 0);
    nn::for_each_block(net, [](std::vector<T>& blk) { std::fill(blk.begin(), blk.end(), T(0)); });
    return net;
}

} // namespace pongrl
