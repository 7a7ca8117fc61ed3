#pragma once

#include <vector>

#include "voila/dsp.hpp"
#include "voila/nn.hpp"
#include "voila/synth.hpp"
#include "voila/wav.hpp"

namespace voila::speaker {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct SpeakerConfig {
    int n_mel_bands = 40;
    int d_hidden = 128;
    int d_spk = 64;
    int n_speakers = 8;
    // frames whose mean log-mel is below this are treated as silence and
    // excluded from pooling, so padding never moves the statistics
    double voiced_floor = -13.0;
    int train_steps = 300;
    double lr = 3e-3;

    dsp::MelConfig mel_config() const;
};

// Mean + standard-deviation pooling over voiced mel frames, then a small
// classifier. The penultimate layer is the embedding.
struct SpeakerModel {
    SpeakerConfig cfg;
    nn::ParamStore params;
    bool trained = false;

    struct Ids {
        int w1, b1, w2, b2, w3, b3;
    } ids{};

    static SpeakerModel init(const SpeakerConfig &cfg, Rng rng);
};

// [mean(40); std(40)] over voiced frames of the waveform's log-mel.
Vec pooled_stats(const SpeakerModel &m, const Waveform &w);

// L2-normalized d_spk embedding. Deterministic; length-invariant under
// self-concatenation and silence padding.
Vec extract(const SpeakerModel &m, const Waveform &w);

double cosine_similarity(const Vec &a, const Vec &b);

struct SpeakerTrainReport {
    double final_loss = 0.0;
    double train_accuracy = 0.0;
};

SpeakerModel train_speaker(const std::vector<synth::Utterance> &corpus,
                           const SpeakerConfig &cfg, uint64_t seed,
                           SpeakerTrainReport *report = nullptr);

}  // namespace voila::speaker
