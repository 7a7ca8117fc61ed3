#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "voila/codec.hpp"
#include "voila/synth.hpp"
#include "voila/vocab.hpp"

namespace voila::align {

enum class TaskKind { Asr, Tts, Tito, Tiao, Aito, Aiao, Duplex };
enum class StepKind { Text, Audio, Special };

const char *task_name(TaskKind t);
TaskKind task_from_name(const std::string &name);

// One sequence position. Text and special steps repeat one id across all
// four lanes; audio steps carry one level-q audio token per lane.
struct Step {
    StepKind kind = StepKind::Special;
    std::array<int, 4> lanes{0, 0, 0, 0};

    static Step text(int token_id);
    static Step special(int token_id);
    static Step audio(const vocab::VocabSpec &v, const codec::FrameTokens &f);

    int token() const;  // id of a text/special step
    codec::FrameTokens frame(const vocab::VocabSpec &v) const;
    bool operator==(const Step &o) const { return kind == o.kind && lanes == o.lanes; }
};

// validates the kind/lane discipline against a vocabulary
void validate_step(const Step &s, const vocab::VocabSpec &v);

struct AlignedUtterance {
    struct WordSpan {
        std::string word;
        int frame_begin = 0;  // inclusive
        int frame_end = 0;    // exclusive
    };
    std::vector<WordSpan> words;
    std::vector<codec::FrameTokens> frames;
    int speaker_id = 0;

    // spans sorted, non-empty, non-overlapping, tiling [0, frames.size())
    void validate() const;
};

// Pairs a synthesized utterance with its encoded frames. Silence before a
// word is absorbed into that word's span; trailing silence goes to the
// last word, so the spans tile the frame range exactly.
AlignedUtterance make_aligned(const synth::Utterance &u,
                              std::vector<codec::FrameTokens> frames,
                              const vocab::VocabSpec &v);

// Fig.-3 style layout: each word's text step, then that word's audio steps.
std::vector<Step> build_interleaved(const AlignedUtterance &u, const vocab::VocabSpec &v);
AlignedUtterance deinterleave(const std::vector<Step> &steps, const vocab::VocabSpec &v,
                              int speaker_id);

struct InterleavedSequence {
    std::vector<Step> steps;
    std::vector<char> loss_mask;  // one flag per step
    TaskKind task = TaskKind::Tito;
    int ref_index = -1;  // step carrying the speaker embedding, -1 if none
};

struct ChatSample {
    TaskKind task = TaskKind::Tito;
    std::vector<int> input_text;                    // token ids, text-input tasks
    std::vector<codec::FrameTokens> input_audio;    // audio-input tasks
    std::vector<int> output_text;                   // text-output tasks
    std::optional<AlignedUtterance> output_aligned; // audio-output tasks
};

// <human> prompt <voila> response <eos> with response-only loss mask.
InterleavedSequence render_chat(const ChatSample &sample, const vocab::VocabSpec &v);

// Prepends the three voice-reference tokens; records ref_index (always 1).
void inject_voice_ref(InterleavedSequence &seq, TaskKind ref_kind);
void strip_voice_ref(InterleavedSequence &seq);

// ---- JSON-lines snapshots ----
std::string to_jsonl(const InterleavedSequence &seq);
InterleavedSequence from_jsonl(const std::string &line);

}  // namespace voila::align
