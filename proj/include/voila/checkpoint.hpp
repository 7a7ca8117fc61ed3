#pragma once

#include <string>
#include <utility>
#include <vector>

#include "voila/common.hpp"
#include "voila/nn.hpp"

namespace voila::ckpt {

using Mat = Eigen::MatrixXd;

inline constexpr char kMagic[] = "VOILA-CKPT";
inline constexpr uint32_t kVersion = 1;

// Versioned tensor container: magic, version, UTF-8 JSON header, then named
// f32 little-endian tensors with per-tensor CRC32 checksums. Saves go to a
// temporary file followed by an atomic rename.
struct CheckpointContainer {
    uint32_t version = kVersion;
    std::string header_json = "{}";
    std::vector<std::pair<std::string, Mat>> tensors;

    void add(const std::string &name, const Mat &m);
    bool has(const std::string &name) const;
    const Mat &get(const std::string &name) const;
};

void save_checkpoint(const std::string &path, const CheckpointContainer &c);
CheckpointContainer load_checkpoint(const std::string &path);

// copy every entry of a parameter store into / out of the container,
// prefixing names ("model/", "codec/", ...)
void pack_params(CheckpointContainer &c, const std::string &prefix, const nn::ParamStore &ps);
void unpack_params(const CheckpointContainer &c, const std::string &prefix, nn::ParamStore &ps);

uint32_t crc32(const uint8_t *data, size_t n);

}  // namespace voila::ckpt
