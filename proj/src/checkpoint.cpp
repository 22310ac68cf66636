#include "pongrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

namespace pongrl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'G', 'N', 'N'};
constexpr uint32_t kVersion = 1;

void append_u32(std::vector<unsigned char>& buf, uint32_t v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf.insert(buf.end(), p, p + 4);
}

uint32_t read_u32(const unsigned char* p) {
    uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

} // namespace

void save_checkpoint(const nn::Network<float>& net, const std::string& path) {
    std::vector<unsigned char> payload;
    const std::string desc = net.arch.canonical();
    append_u32(payload, uint32_t(desc.size()));
    payload.insert(payload.end(), desc.begin(), desc.end());
    nn::for_each_block(net, [&](const std::vector<float>& blk) {
        const auto* p = reinterpret_cast<const unsigned char*>(blk.data());
        payload.insert(payload.end(), p, p + blk.size() * sizeof(float));
    });

    const uint32_t crc =
        uint32_t(::crc32(0L, payload.data(), uInt(payload.size())));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), 4);
    out.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
    out.write(reinterpret_cast<const char*>(&crc), 4);
    if (!out) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

nn::Network<float> load_checkpoint(const std::string& path, CheckpointMeta* meta,
                                   const std::string& expect_arch) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("load_checkpoint: '" + path + "' is not a PGNN checkpoint");
    const uint32_t version = read_u32(bytes.data() + 4);
    if (version != kVersion)
        throw IoError("load_checkpoint: '" + path + "' has format version " +
                      std::to_string(version) + ", expected " + std::to_string(kVersion));

    const size_t payload_len = bytes.size() - 8 - 4;
    const unsigned char* payload = bytes.data() + 8;
    const uint32_t stored_crc = read_u32(bytes.data() + bytes.size() - 4);
    const uint32_t crc = uint32_t(::crc32(0L, payload, uInt(payload_len)));
    if (crc != stored_crc)
        throw IoError("load_checkpoint: CRC mismatch in '" + path + "' (corrupt file)");

    if (payload_len < 4) throw IoError("load_checkpoint: truncated payload in '" + path + "'");
    const uint32_t desc_len = read_u32(payload);
    if (payload_len < 4 + size_t(desc_len))
        throw IoError("load_checkpoint: truncated descriptor in '" + path + "'");
    const std::string desc(reinterpret_cast<const char*>(payload + 4), desc_len);

    if (!expect_arch.empty()) {
        const std::string want = nn::parse_architecture(expect_arch).canonical();
        if (want != desc)
            throw IoError("load_checkpoint: architecture mismatch: checkpoint has '" + desc +
                          "', expected '" + want + "'");
    }

    auto spec = nn::parse_architecture(desc);
    auto net = network_from_spec<float>(spec);

    size_t need = 0;
    nn::for_each_block(net,
                       [&](const std::vector<float>& blk) { need += blk.size() * sizeof(float); });
    if (payload_len != 4 + size_t(desc_len) + need)
        throw IoError("load_checkpoint: parameter blob size mismatch in '" + path + "'");

    const unsigned char* p = payload + 4 + desc_len;
    nn::for_each_block(net, [&](std::vector<float>& blk) {
        std::memcpy(blk.data(), p, blk.size() * sizeof(float));
        p += blk.size() * sizeof(float);
    });

    if (meta) *meta = CheckpointMeta{version, desc};
    return net;
}

} // namespace pongrl
