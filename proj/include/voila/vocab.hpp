#pragma once

#include <array>
#include <string>
#include <vector>

#include "voila/common.hpp"

namespace voila::vocab {

// Fixed special-token order; ids 0..11.
inline constexpr std::array<const char *, 12> kSpecials = {
    "<pad>",          "<human>",        "<voila>",         "<eos>",
    "<audio_step>",   "<silence>",      "<TTS_REF_START>", "<TTS_REF>",
    "<TTS_REF_END>",  "<CHAT_REF_START>", "<CHAT_REF>",    "<CHAT_REF_END>"};

enum Special : int {
    kPad = 0,
    kHuman = 1,
    kVoila = 2,
    kEos = 3,
    kAudioStep = 4,
    kSilence = 5,
    kTtsRefStart = 6,
    kTtsRef = 7,
    kTtsRefEnd = 8,
    kChatRefStart = 9,
    kChatRef = 10,
    kChatRefEnd = 11,
};

enum class TokenKind { Special, Text, Audio };

struct Classified {
    TokenKind kind;
    int special = -1;     // Special enum value
    std::string word;     // for Text
    int level = 0;        // 1..Q for Audio
    int index = 0;        // 0..K-1 for Audio
};

// The unified token space: specials, closed word list + <unk>, then Q*K
// audio tokens in level-major order. Immutable once built.
class VocabSpec {
  public:
    static VocabSpec build(std::vector<std::string> words, int codebook_size, int n_levels = 4);

    int n_specials() const { return int(kSpecials.size()); }
    int n_text() const { return int(text_units_.size()); }  // includes <unk>
    int K() const { return K_; }
    int Q() const { return Q_; }
    int total_size() const { return n_specials() + n_text() + Q_ * K_; }

    int specials_base() const { return 0; }
    int text_base() const { return n_specials(); }
    int audio_base(int level) const;  // level in 1..Q
    int unk_id() const { return text_base() + n_text() - 1; }

    int text_id(const std::string &word) const;  // <unk> for unknown
    int audio_token_id(int level, int index) const;
    Classified classify(int id) const;

    std::vector<int> tokenize_text(const std::string &text) const;
    std::string detokenize(const std::vector<int> &ids) const;

    const std::vector<std::string> &text_units() const { return text_units_; }
    bool in_lexicon(const std::string &word) const;

    std::string manifest() const;
    static VocabSpec from_manifest(const std::string &text);
    uint64_t manifest_hash() const { return fnv1a64(manifest()); }

  private:
    std::vector<std::string> text_units_;  // words + "<unk>" last
    int K_ = 0, Q_ = 4;
};

std::string case_fold(const std::string &s);

}  // namespace voila::vocab
