#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "voila/checkpoint.hpp"
#include "voila/codec.hpp"
#include "voila/config.hpp"
#include "voila/duplex.hpp"
#include "voila/model.hpp"
#include "voila/speaker.hpp"
#include "voila/synth.hpp"
#include "voila/train.hpp"
#include "voila/vocab.hpp"

namespace voila::pipeline {

using Vec = Eigen::VectorXd;

// knobs for the end-to-end stages; everything else lives in the module configs
struct StageParams {
    int corpus_train = 96;
    int corpus_heldout = 24;
    int max_words = 3;

    int codec_steps = 300;
    int codec_batch = 8;
    double codec_lr = 2e-3;
    long codec_warmup = 20;

    int enroll_utterances = 4;

    int task_samples = 192;
    int duplex_samples = 24;
    double barge_in_prob = 0.35;
    double mix_asr = 0.30, mix_tts = 0.30, mix_instruct = 0.40;
    int model_steps = 400;
    int model_batch = 8;
    double model_lr = 2e-3;
    long model_warmup = 30;

    static StageParams from_config(const Config &c);
};

// Everything the stages produce, in dependency order: corpus, codec,
// speaker voices, model. Stages mark their outputs trained.
struct Pipeline {
    Config raw;
    StageParams stages;
    uint64_t seed = 0;

    synth::Synthesizer synth;
    vocab::VocabSpec vocab;
    std::vector<synth::Utterance> train_set, heldout;

    codec::CodecState codec;
    speaker::SpeakerModel spk;
    std::vector<Vec> voices;  // one enrolled embedding per synthetic speaker
    model::ModelConfig mcfg;
    model::Model model;

    Pipeline(const Config &c, uint64_t seed);
};

Pipeline make_pipeline(const Config &c, uint64_t seed);

// each stage appends "step,lr,loss,..." CSV lines when given a log stream
void train_codec_stage(Pipeline &p, std::ostream *log = nullptr);
void train_speaker_stage(Pipeline &p);
void train_model_stage(Pipeline &p, std::ostream *log = nullptr);

// cluster purity of level-1 tokens against ground-truth phone labels
double level1_phone_purity(const Pipeline &p, const std::vector<synth::Utterance> &utts);

std::string infer_asr(const Pipeline &p, const Waveform &w);
Waveform infer_tts(const Pipeline &p, const std::string &text, int speaker_id,
                   std::vector<codec::FrameTokens> *tokens = nullptr);
model::GenerateResult infer_chat(const Pipeline &p, const std::string &text, int speaker_id);

double eval_asr_wer(const Pipeline &p, const std::vector<synth::Utterance> &utts);
// synthesize, then transcribe through the system's own ASR path
double eval_tts_wer(const Pipeline &p, const std::vector<synth::Utterance> &utts);

void save_pipeline(const std::string &path, const Pipeline &p);
Pipeline load_pipeline(const std::string &path);

}  // namespace voila::pipeline
