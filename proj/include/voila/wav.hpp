#pragma once

#include <string>
#include <vector>

#include "voila/common.hpp"

namespace voila {

// Mono audio at a fixed sample rate, samples in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = 16000;

    size_t size() const { return samples.size(); }
    double duration_s() const { return double(samples.size()) / sample_rate_hz; }
};

// PCM16 mono WAV, bit-exact round trip of the quantized samples.
Waveform read_wav(const std::string &path);
void write_wav(const std::string &path, const Waveform &w);

// Quantize to the PCM16 grid in place; makes write(read(x)) byte-identical.
void quantize_pcm16(Waveform &w);

}  // namespace voila
