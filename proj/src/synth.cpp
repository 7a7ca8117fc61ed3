#include "voila/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace voila::synth {

namespace {

const char *kCoreWords[] = {
    "hello", "hi",   "hey",   "i",     "am",    "voila", "you",  "are",
    "there", "say",  "echo",  "count", "word",  "words", "one",  "two",
    "three", "four", "five",  "yes",   "no",    "good",  "day",  "how",
    "what",  "this", "is",    "the",   "to",    "me",
};

constexpr double kTau = 6.283185307179586;

// Two-pole resonator, unity gain near the center frequency.
struct Resonator {
    double a1, a2, g;
    double y1 = 0, y2 = 0;
    Resonator(double hz, double bw, double sr) {
        double r = std::exp(-M_PI * bw / sr);
        a1 = 2.0 * r * std::cos(kTau * hz / sr);
        a2 = -r * r;
        g = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * kTau * hz / sr) + r * r);
    }
    double step(double x) {
        double y = g * x + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

bool is_fricative(char c) { return std::string("fshvzxj").find(c) != std::string::npos; }
bool is_stop(char c) { return std::string("ptkbdg").find(c) != std::string::npos; }

// Distinct per-phone formant pair; spread over the band so every letter has
// its own mel signature.
void phone_formants(char c, double &f1, double &f2) {
    int p = phone_id(c);
    f1 = 280.0 + 95.0 * p;
    f2 = 900.0 + 150.0 * ((p * 7) % 26) + 40.0 * p;
}

}  // namespace

int phone_id(char letter) {
    if (letter < 'a' || letter > 'z') throw InputError("phone_id: letter out of range");
    return letter - 'a';
}

bool is_vowel(char letter) {
    return letter == 'a' || letter == 'e' || letter == 'i' || letter == 'o' || letter == 'u';
}

SynthConfig SynthConfig::from_config(const Config &c) {
    SynthConfig s;
    s.sample_rate_hz = int(c.get_int("synth.sample_rate_hz", s.sample_rate_hz));
    s.hop_samples = int(c.get_int("synth.hop_samples", s.hop_samples));
    s.n_speakers = int(c.get_int("synth.n_speakers", s.n_speakers));
    s.lead_frames = int(c.get_int("synth.lead_frames", s.lead_frames));
    s.trail_frames = int(c.get_int("synth.trail_frames", s.trail_frames));
    s.gap_frames = int(c.get_int("synth.gap_frames", s.gap_frames));
    s.lexicon_size = int(c.get_int("synth.lexicon_size", s.lexicon_size));
    if (s.n_speakers < 1 || s.lexicon_size < 1) throw ConfigError("synth: bad config");
    return s;
}

Synthesizer::Synthesizer(SynthConfig cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {
    std::set<std::string> seen;
    for (const char *w : kCoreWords) {
        lexicon_.push_back(w);
        seen.insert(w);
    }
    // fill with CV / CVCV pseudowords, deterministic order
    const std::string cons = "bdfgklmnprstvz", vows = "aeiou";
    Rng rng = Rng(seed).fork("lexicon");
    while (int(lexicon_.size()) < cfg_.lexicon_size) {
        std::string w;
        int syllables = 1 + int(rng.uniform_int(0, 1));
        for (int s = 0; s < syllables; ++s) {
            w += cons[size_t(rng.uniform_int(0, int64_t(cons.size()) - 1))];
            w += vows[size_t(rng.uniform_int(0, int64_t(vows.size()) - 1))];
        }
        if (seen.insert(w).second) lexicon_.push_back(w);
    }
}

bool Synthesizer::in_lexicon(const std::string &word) const {
    return std::find(lexicon_.begin(), lexicon_.end(), word) != lexicon_.end();
}

SpeakerVoice Synthesizer::voice(int speaker) const {
    if (speaker < 0 || speaker >= cfg_.n_speakers) throw InputError("voice: speaker out of range");
    Rng rng = Rng(seed_).fork("voice", uint64_t(speaker));
    SpeakerVoice v;
    v.pitch_hz = 90.0 + 130.0 * rng.uniform();
    v.formant_scale = 0.9 + 0.25 * rng.uniform();
    v.vowel_frames = 2 + int(rng.uniform_int(0, 1));
    v.gain = 0.25 + 0.1 * rng.uniform();
    return v;
}

int Synthesizer::phone_frames(char letter, const SpeakerVoice &v) const {
    return is_vowel(letter) ? v.vowel_frames : 1;
}

int Synthesizer::word_frames(const std::string &word, const SpeakerVoice &v) const {
    int n = 0;
    for (char c : word) n += phone_frames(c, v);
    return n;
}

void Synthesizer::render_phone(char letter, const SpeakerVoice &v, Rng &rng,
                               std::vector<double> &out) const {
    int n = phone_frames(letter, v) * cfg_.hop_samples;
    double sr = cfg_.sample_rate_hz;
    double f1, f2;
    phone_formants(letter, f1, f2);
    f1 *= v.formant_scale;
    f2 *= v.formant_scale;
    f2 = std::min(f2, 0.45 * sr);

    std::vector<double> x(size_t(n), 0.0);
    if (is_fricative(letter)) {
        for (auto &s : x) s = rng.uniform(-1.0, 1.0);
    } else if (is_stop(letter)) {
        int burst = int(0.02 * sr);
        for (int i = 0; i < burst && i < n; ++i) x[size_t(i)] = rng.uniform(-1.0, 1.0);
    } else {
        int period = std::max(1, int(sr / v.pitch_hz));
        for (int i = 0; i < n; i += period) x[size_t(i)] = 1.0;
    }

    Resonator r1(f1, 90.0, sr), r2(f2, 140.0, sr);
    std::vector<double> y(size_t(n), 0.0);
    double peak = 1e-9;
    for (int i = 0; i < n; ++i) {
        y[size_t(i)] = r1.step(x[size_t(i)]) + 0.7 * r2.step(x[size_t(i)]);
        peak = std::max(peak, std::abs(y[size_t(i)]));
    }
    // short raised-cosine edges to avoid clicks at phone boundaries
    int edge = std::min(n / 4, int(0.005 * sr));
    for (int i = 0; i < n; ++i) {
        double env = 1.0;
        if (i < edge) env = 0.5 - 0.5 * std::cos(M_PI * i / edge);
        else if (i >= n - edge) env = 0.5 - 0.5 * std::cos(M_PI * (n - 1 - i) / edge);
        out.push_back(v.gain * env * y[size_t(i)] / peak);
    }
}

Utterance Synthesizer::utter(const std::vector<std::string> &words, int speaker) const {
    if (words.empty()) throw InputError("utter: empty word list");
    SpeakerVoice v = voice(speaker);
    Utterance u;
    u.words = words;
    u.speaker_id = speaker;
    u.audio.sample_rate_hz = cfg_.sample_rate_hz;

    auto add_silence = [&](int frames) {
        for (int f = 0; f < frames; ++f) {
            u.frame_phones.push_back(kSilPhone);
            u.audio.samples.insert(u.audio.samples.end(), size_t(cfg_.hop_samples), 0.0);
        }
    };

    add_silence(cfg_.lead_frames);
    for (size_t wi = 0; wi < words.size(); ++wi) {
        if (wi > 0) add_silence(cfg_.gap_frames);
        const std::string &w = words[wi];
        // noise realization is keyed per (speaker, word): a word is pronounced
        // the same way regardless of sentence context
        Rng rng = Rng(seed_).fork("word", fnv1a64(w) ^ uint64_t(speaker));
        WordSpan span;
        span.word = w;
        span.frame_begin = int(u.frame_phones.size());
        for (char c : w) {
            if (c < 'a' || c > 'z') throw InputError("utter: word has non-letter characters");
            render_phone(c, v, rng, u.audio.samples);
            for (int f = 0; f < phone_frames(c, v); ++f) u.frame_phones.push_back(phone_id(c));
        }
        span.frame_end = int(u.frame_phones.size());
        u.spans.push_back(span);
    }
    add_silence(cfg_.trail_frames);

    if (u.audio.samples.size() != u.frame_phones.size() * size_t(cfg_.hop_samples))
        throw StateError("utter: frame bookkeeping out of sync");
    return u;
}

std::vector<Utterance> Synthesizer::sample_utterances(int n, int max_words, Rng rng) const {
    std::vector<Utterance> out;
    for (int i = 0; i < n; ++i) {
        Rng ur = rng.fork("sample", uint64_t(i));
        int n_words = 1 + int(ur.uniform_int(0, max_words - 1));
        std::vector<std::string> words;
        for (int w = 0; w < n_words; ++w)
            words.push_back(lexicon_[size_t(ur.uniform_int(0, int64_t(lexicon_.size()) - 1))]);
        out.push_back(utter(words, int(ur.uniform_int(0, cfg_.n_speakers - 1))));
    }
    return out;
}

}  // namespace voila::synth
