#include "voila/checkpoint.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace voila::ckpt {

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

template <typename T>
void write_pod(std::ostream &out, T v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream &in) {
    T v{};
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated file");
    return v;
}

std::vector<uint8_t> tensor_payload(const Mat &m) {
    std::vector<uint8_t> bytes(size_t(m.size()) * 4);
    size_t at = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            float f = float(m(r, c));
            std::memcpy(bytes.data() + at, &f, 4);
            at += 4;
        }
    return bytes;
}

}  // namespace

uint32_t crc32(const uint8_t *data, size_t n) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void CheckpointContainer::add(const std::string &name, const Mat &m) {
    if (has(name)) throw InputError("checkpoint: duplicate tensor " + name);
    tensors.emplace_back(name, m);
}

bool CheckpointContainer::has(const std::string &name) const {
    for (const auto &[n, m] : tensors)
        if (n == name) return true;
    return false;
}

const Mat &CheckpointContainer::get(const std::string &name) const {
    for (const auto &[n, m] : tensors)
        if (n == name) return m;
    throw InputError("checkpoint: no tensor named " + name);
}

void save_checkpoint(const std::string &path, const CheckpointContainer &c) {
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("checkpoint: cannot write " + tmp.string());
        out.write(kMagic, sizeof(kMagic) - 1);
        write_pod<uint32_t>(out, c.version);
        write_pod<uint64_t>(out, c.header_json.size());
        out.write(c.header_json.data(), long(c.header_json.size()));
        write_pod<uint32_t>(out, uint32_t(c.tensors.size()));
        for (const auto &[name, m] : c.tensors) {
            write_pod<uint32_t>(out, uint32_t(name.size()));
            out.write(name.data(), long(name.size()));
            write_pod<uint32_t>(out, uint32_t(m.rows()));
            write_pod<uint32_t>(out, uint32_t(m.cols()));
            std::vector<uint8_t> payload = tensor_payload(m);
            out.write(reinterpret_cast<const char *>(payload.data()), long(payload.size()));
            write_pod<uint32_t>(out, crc32(payload.data(), payload.size()));
        }
        if (!out) throw IoError("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

CheckpointContainer load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);

    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in) throw IoError("checkpoint: truncated file");
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw InputError("checkpoint: bad magic, not a checkpoint file");

    CheckpointContainer c;
    c.version = read_pod<uint32_t>(in);
    if (c.version > kVersion)
        throw InputError("checkpoint: unknown format version " + std::to_string(c.version));

    uint64_t hlen = read_pod<uint64_t>(in);
    c.header_json.resize(hlen);
    in.read(c.header_json.data(), long(hlen));
    if (!in) throw IoError("checkpoint: truncated header");

    uint32_t n = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t nlen = read_pod<uint32_t>(in);
        std::string name(nlen, '\0');
        in.read(name.data(), long(nlen));
        uint32_t rows = read_pod<uint32_t>(in);
        uint32_t cols = read_pod<uint32_t>(in);
        std::vector<uint8_t> payload(size_t(rows) * cols * 4);
        in.read(reinterpret_cast<char *>(payload.data()), long(payload.size()));
        uint32_t want = read_pod<uint32_t>(in);
        if (!in) throw IoError("checkpoint: truncated tensor " + name);
        if (crc32(payload.data(), payload.size()) != want)
            throw InputError("checkpoint: checksum mismatch in tensor " + name);
        Mat m(rows, cols);
        size_t at = 0;
        for (uint32_t r = 0; r < rows; ++r)
            for (uint32_t col = 0; col < cols; ++col) {
                float f;
                std::memcpy(&f, payload.data() + at, 4);
                m(r, col) = double(f);
                at += 4;
            }
        c.add(name, m);
    }
    return c;
}

void pack_params(CheckpointContainer &c, const std::string &prefix, const nn::ParamStore &ps) {
    for (size_t i = 0; i < ps.size(); ++i)
        c.add(prefix + ps.entry(int(i)).name, ps.value(int(i)));
}

void unpack_params(const CheckpointContainer &c, const std::string &prefix,
                   nn::ParamStore &ps) {
    for (size_t i = 0; i < ps.size(); ++i) {
        const std::string name = prefix + ps.entry(int(i)).name;
        const Mat &m = c.get(name);
        Mat &dst = ps.value(int(i));
        if (m.rows() != dst.rows() || m.cols() != dst.cols())
            throw InputError("checkpoint: shape mismatch for tensor " + name);
        dst = m;
    }
}

}  // namespace voila::ckpt
