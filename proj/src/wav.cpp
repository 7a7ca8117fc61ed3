#include "voila/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace voila {

namespace {

void put_u32(std::string &s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u16(std::string &s, uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
}
uint32_t get_u32(const unsigned char *p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t get_u16(const unsigned char *p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

int16_t to_pcm16(double x) {
    double v = std::lround(x * 32767.0);
    if (v > 32767.0) v = 32767.0;
    if (v < -32768.0) v = -32768.0;
    return int16_t(v);
}

}  // namespace

Waveform read_wav(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
        std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw IoError("not a RIFF/WAVE file: " + path);

    Waveform w;
    size_t pos = 12;
    bool have_fmt = false, have_data = false;
    uint16_t channels = 0, bits = 0;
    while (pos + 8 <= buf.size()) {
        uint32_t sz = get_u32(buf.data() + pos + 4);
        const unsigned char *body = buf.data() + pos + 8;
        if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0 && sz >= 16) {
            uint16_t fmt = get_u16(body);
            channels = get_u16(body + 2);
            w.sample_rate_hz = int(get_u32(body + 4));
            bits = get_u16(body + 14);
            if (fmt != 1) throw IoError("WAV is not PCM: " + path);
            have_fmt = true;
        } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
            if (!have_fmt) throw IoError("WAV data chunk before fmt: " + path);
            if (channels != 1 || bits != 16)
                throw IoError("expected mono PCM16 WAV: " + path);
            size_t n = std::min<size_t>(sz, buf.size() - pos - 8) / 2;
            w.samples.resize(n);
            for (size_t i = 0; i < n; ++i) {
                int16_t s = int16_t(get_u16(body + 2 * i));
                w.samples[i] = double(s) / 32767.0;
            }
            have_data = true;
        }
        pos += 8 + sz + (sz & 1);
    }
    if (!have_data) throw IoError("WAV has no data chunk: " + path);
    return w;
}

void write_wav(const std::string &path, const Waveform &w) {
    std::string out;
    uint32_t data_bytes = uint32_t(w.samples.size() * 2);
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, uint32_t(w.sample_rate_hz));
    put_u32(out, uint32_t(w.sample_rate_hz) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (double x : w.samples) put_u16(out, uint16_t(to_pcm16(x)));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write WAV file: " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("short write on WAV file: " + path);
}

void quantize_pcm16(Waveform &w) {
    for (double &x : w.samples) x = double(to_pcm16(x)) / 32767.0;
}

}  // namespace voila
