#pragma once

#include <optional>
#include <string>
#include <vector>

#include "voila/align.hpp"
#include "voila/codec.hpp"
#include "voila/model.hpp"
#include "voila/synth.hpp"
#include "voila/vocab.hpp"
#include "voila/wav.hpp"

namespace voila::duplex {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

// Full-duplex engine: every tick consumes one user frame and the agent's
// previous frame, fuses both embeddings by averaging, runs one backbone
// step and depth-decodes the next agent frame. Silence = the all-zero frame.

struct DuplexSession {
    const model::Model *m = nullptr;
    const codec::CodecState *cod = nullptr;
    const vocab::VocabSpec *v = nullptr;

    model::SessionState state;
    std::vector<codec::FrameTokens> user_stream, agent_stream;
    codec::FrameTokens prev_agent{};  // silence before the first tick
    long frame_clock = 0;
    int attention_window = 128;  // cached backbone rows kept per step
    model::SampleMode mode = model::SampleMode::Greedy;
    Rng rng{0};
    bool initialized = false;
};

// Feeds the persona prompt (typically a voice-reference triplet plus
// <voila>) through the backbone before the first tick.
DuplexSession open_session(const model::Model &m, const codec::CodecState &cod,
                           const vocab::VocabSpec &v, const std::vector<align::Step> &persona,
                           int ref_index, const std::optional<Vec> &speaker);

// (E_user + E_agent_prev) / 2, each a 4-lane mean embedding
RowVec fused_embedding(const model::Model &m, const vocab::VocabSpec &v,
                       const codec::FrameTokens &user, const codec::FrameTokens &agent_prev);

// one tick: exactly one agent frame out per user frame in
codec::FrameTokens duplex_step(DuplexSession &s, const codec::FrameTokens &user_frame);

// ---- scripted scenarios ----

struct ScriptEvent {
    long start_frame = 0;
    Waveform audio;
};

struct DuplexScript {
    std::vector<ScriptEvent> events;  // sorted, non-overlapping in frames
    long total_frames = 0;

    void validate(const codec::CodecConfig &cfg) const;
};

struct LatencyReport {
    std::vector<double> compute_ms;         // one sample per frame
    std::vector<double> response_onset_ms;  // per utterance with a response
    double real_time_factor = 0.0;          // mean compute per frame / hop_ms
};

struct ScriptResult {
    Waveform agent_audio;
    std::vector<codec::FrameTokens> user_tokens, agent_tokens;
    LatencyReport latency;
};

// Encodes the scripted user audio frame-by-frame (silence in the gaps),
// drives one duplex_step per frame, decodes the agent stream to audio.
ScriptResult run_script(DuplexSession &s, const DuplexScript &script);

struct BudgetCheck {
    bool pass = false;
    double algorithmic_ms = 0;  // hop + whole-frame frontend lookahead
    double margin_ms = 0;       // budget - algorithmic
    double real_time_factor = 0;
};

inline constexpr double kLatencyBudgetMs = 195.0;

BudgetCheck latency_budget_check(const codec::CodecConfig &cfg, const LatencyReport &rep);

// script files: {"total_frames": N, "events": [{"start_frame": k, "wav": path}]}
DuplexScript load_script(const std::string &path);
void save_script(const std::string &path, const DuplexScript &script,
                 const std::string &wav_dir);

// ---- training data ----

// Two parallel token tracks on the same frame clock.
struct DialogueTracks {
    std::vector<codec::FrameTokens> user, agent;
};

// Scripted dialogue: the user speaks, the agent answers with a fixed
// greeting after one frame, both fall silent. With barge_in, a second user
// utterance overlaps the reply; the agent cuts off and answers again.
// Lead/tail silence lengths vary in training so the reply is cued by the
// user's speech end rather than by absolute position.
DialogueTracks make_dialogue(const synth::Synthesizer &synth, const codec::CodecState &cod,
                             const std::vector<std::string> &user_words, int user_speaker,
                             int agent_speaker, bool barge_in, long lead_frames = 2,
                             long tail_frames = 3);

// persona prefix + one fused two-stream step per tick, all ticks masked
model::TrainSample dialogue_sample(const DialogueTracks &d, const vocab::VocabSpec &v,
                                   const model::ModelConfig &cfg,
                                   const std::vector<align::Step> &persona, int ref_index,
                                   const std::optional<Vec> &speaker);

std::vector<model::TrainSample> make_duplex_samples(
    const synth::Synthesizer &synth, const codec::CodecState &cod, const vocab::VocabSpec &v,
    const model::ModelConfig &cfg, const std::vector<Vec> &speaker_embeddings, int n,
    double barge_in_prob, Rng rng);

// the persona prefix used for duplex training and sessions
std::vector<align::Step> duplex_persona();

}  // namespace voila::duplex
