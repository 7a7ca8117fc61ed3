#pragma once

#include <string>
#include <vector>

#include "voila/align.hpp"
#include "voila/codec.hpp"
#include "voila/model.hpp"
#include "voila/synth.hpp"
#include "voila/vocab.hpp"

namespace voila::train {

using Vec = Eigen::VectorXd;

struct TaskMix {
    double asr = 0.30;
    double tts = 0.30;
    double instruct = 0.40;  // TITO/TIAO/AITO/AIAO instruction templates
};

struct TaskSample {
    align::InterleavedSequence seq;
    int speaker_id = -1;  // reference voice for audio-output samples
};

// encode an utterance with the codec and attach ground-truth word spans
align::AlignedUtterance align_utterance(const synth::Utterance &u,
                                        const codec::CodecState &codec,
                                        const vocab::VocabSpec &v);

// ASR/TTS pairs from corpus utterances plus template-generated instruction
// samples (greeting, echo, word count) in the four text/audio formats.
// Audio-output samples get a voice-reference triplet.
std::vector<TaskSample> make_task_samples(const std::vector<synth::Utterance> &corpus,
                                          const codec::CodecState &codec,
                                          const vocab::VocabSpec &v,
                                          const synth::Synthesizer &synth, const TaskMix &mix,
                                          int n_samples, Rng rng);

// next-step-prediction view of a rendered sequence
model::TrainSample to_train_sample(const align::InterleavedSequence &seq,
                                   const vocab::VocabSpec &v, const model::ModelConfig &cfg,
                                   const Vec *speaker);

// batch assembly: equal lengths via trailing <pad> steps, never masked
std::vector<model::TrainSample> make_batch(const std::vector<TaskSample> &samples,
                                           const vocab::VocabSpec &v,
                                           const model::ModelConfig &cfg,
                                           const std::vector<Vec> &speaker_embeddings);

using LossReport = model::LossReport;

LossReport train_step(model::Model &m, const std::vector<model::TrainSample> &batch,
                      nn::AdamW &opt, double lr);

// summed word edit distance over pairs / total reference words
double evaluate_wer(const std::vector<std::string> &hypotheses,
                    const std::vector<std::string> &references);

}  // namespace voila::train
