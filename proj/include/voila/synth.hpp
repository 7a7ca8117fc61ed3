#pragma once

#include <string>
#include <vector>

#include "voila/config.hpp"
#include "voila/rng.hpp"
#include "voila/wav.hpp"

namespace voila::synth {

// Phone inventory: one phone per letter a..z, plus silence last.
inline constexpr int kNPhones = 27;
inline constexpr int kSilPhone = 26;

int phone_id(char letter);  // 'a'..'z' -> 0..25
bool is_vowel(char letter);

struct SpeakerVoice {
    double pitch_hz = 120.0;
    double formant_scale = 1.0;
    int vowel_frames = 2;  // frames per vowel phone (consonants take 1)
    double gain = 0.3;
};

struct WordSpan {
    std::string word;
    int frame_begin = 0;  // inclusive
    int frame_end = 0;    // exclusive
};

struct Utterance {
    Waveform audio;
    std::vector<std::string> words;
    std::vector<WordSpan> spans;
    std::vector<int> frame_phones;  // one phone id per frame, kSilPhone for gaps
    int speaker_id = 0;
};

struct SynthConfig {
    int sample_rate_hz = 16000;
    int hop_samples = 1280;
    int n_speakers = 8;
    int lead_frames = 2;   // silence before the first word
    int trail_frames = 2;  // silence after the last word
    int gap_frames = 1;    // silence between words
    int lexicon_size = 200;

    static SynthConfig from_config(const Config &c);
};

// Deterministic formant-resonator speech generator over a closed lexicon.
// Word durations are exact whole frames by construction, so frame-level
// phone labels and word spans are never approximate.
class Synthesizer {
  public:
    Synthesizer(SynthConfig cfg, uint64_t seed);

    const SynthConfig &config() const { return cfg_; }
    const std::vector<std::string> &lexicon() const { return lexicon_; }
    bool in_lexicon(const std::string &word) const;

    SpeakerVoice voice(int speaker) const;

    int phone_frames(char letter, const SpeakerVoice &v) const;
    int word_frames(const std::string &word, const SpeakerVoice &v) const;

    // Renders the word sequence for one speaker. Words must be lexicon
    // entries (lowercase letters only).
    Utterance utter(const std::vector<std::string> &words, int speaker) const;

    // n random utterances of 1..max_words lexicon words each.
    std::vector<Utterance> sample_utterances(int n, int max_words, Rng rng) const;

  private:
    SynthConfig cfg_;
    uint64_t seed_;
    std::vector<std::string> lexicon_;

    void render_phone(char letter, const SpeakerVoice &v, Rng &rng,
                      std::vector<double> &out) const;
};

}  // namespace voila::synth
