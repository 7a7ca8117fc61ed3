#include "voila/vocab.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace voila::vocab {

static const std::string kManifestHeader = "voila-vocab-v1";

std::string case_fold(const std::string &s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

VocabSpec VocabSpec::build(std::vector<std::string> words, int codebook_size, int n_levels) {
    if (codebook_size < 2) throw ConfigError("vocab: codebook size must be >= 2");
    if (n_levels != 4) throw ConfigError("vocab: exactly 4 audio levels required");
    VocabSpec v;
    for (auto &w : words) {
        if (w.empty()) throw ConfigError("vocab: empty word");
        v.text_units_.push_back(case_fold(w));
    }
    v.text_units_.push_back("<unk>");
    v.K_ = codebook_size;
    v.Q_ = n_levels;
    // reject duplicates; ids must be a bijection
    std::vector<std::string> sorted = v.text_units_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("vocab: duplicate word in lexicon");
    return v;
}

int VocabSpec::audio_base(int level) const {
    if (level < 1 || level > Q_) throw InputError("audio_base: level out of range");
    return n_specials() + n_text() + (level - 1) * K_;
}

int VocabSpec::text_id(const std::string &word) const {
    std::string w = case_fold(word);
    for (size_t i = 0; i < text_units_.size(); ++i)
        if (text_units_[i] == w) return text_base() + int(i);
    return unk_id();
}

bool VocabSpec::in_lexicon(const std::string &word) const {
    std::string w = case_fold(word);
    for (size_t i = 0; i + 1 < text_units_.size(); ++i)
        if (text_units_[i] == w) return true;
    return false;
}

int VocabSpec::audio_token_id(int level, int index) const {
    if (level < 1 || level > Q_ || index < 0 || index >= K_)
        throw InputError("audio_token_id: level/index out of range");
    return audio_base(level) + index;
}

Classified VocabSpec::classify(int id) const {
    if (id < 0 || id >= total_size()) throw InputError("classify: id out of range");
    Classified c{};
    if (id < text_base()) {
        c.kind = TokenKind::Special;
        c.special = id;
        c.word = kSpecials[size_t(id)];
        return c;
    }
    if (id < text_base() + n_text()) {
        c.kind = TokenKind::Text;
        c.word = text_units_[size_t(id - text_base())];
        return c;
    }
    int a = id - audio_base(1);
    c.kind = TokenKind::Audio;
    c.level = a / K_ + 1;
    c.index = a % K_;
    return c;
}

std::vector<int> VocabSpec::tokenize_text(const std::string &text) const {
    std::vector<int> out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) out.push_back(text_id(word));
    return out;
}

std::string VocabSpec::detokenize(const std::vector<int> &ids) const {
    std::string out;
    for (int id : ids) {
        Classified c = classify(id);
        if (c.kind != TokenKind::Text) throw InputError("detokenize: non-text token id");
        if (!out.empty()) out += ' ';
        out += c.word;
    }
    return out;
}

std::string VocabSpec::manifest() const {
    std::ostringstream out;
    out << kManifestHeader << ' ' << K_ << ' ' << Q_ << '\n';
    for (const char *s : kSpecials) out << s << '\n';
    for (const auto &w : text_units_) out << w << '\n';
    for (int q = 1; q <= Q_; ++q)
        for (int i = 0; i < K_; ++i) out << "<audio_l" << q << '_' << i << ">\n";
    return out.str();
}

VocabSpec VocabSpec::from_manifest(const std::string &text) {
    std::istringstream in(text);
    std::string header;
    int K = 0, Q = 0;
    in >> header >> K >> Q;
    if (header != kManifestHeader) throw InputError("vocab manifest: unknown version header");
    std::string line;
    std::getline(in, line);
    std::vector<std::string> lines;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);

    size_t expect_audio = size_t(K) * size_t(Q);
    if (lines.size() < kSpecials.size() + 1 + expect_audio)
        throw InputError("vocab manifest: truncated");
    for (size_t i = 0; i < kSpecials.size(); ++i)
        if (lines[i] != kSpecials[i]) throw InputError("vocab manifest: special token mismatch");

    size_t n_text = lines.size() - kSpecials.size() - expect_audio;
    std::vector<std::string> words(lines.begin() + long(kSpecials.size()),
                                   lines.begin() + long(kSpecials.size() + n_text));
    if (words.empty() || words.back() != "<unk>")
        throw InputError("vocab manifest: missing <unk> sentinel");
    words.pop_back();
    return build(std::move(words), K, Q);
}

}  // namespace voila::vocab
