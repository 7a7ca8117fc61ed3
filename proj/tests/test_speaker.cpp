#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "voila/speaker.hpp"

using namespace voila;
using namespace voila::speaker;

namespace {

// shared tiny corpus so the expensive training runs once
struct Fixture {
    synth::Synthesizer synth{synth::SynthConfig{}, 11};
    std::vector<synth::Utterance> corpus;
    SpeakerConfig cfg;
    SpeakerModel model{SpeakerModel::init(SpeakerConfig{}, Rng(0))};
    SpeakerTrainReport report;

    Fixture() {
        corpus = synth.sample_utterances(64, 3, Rng(21));
        model = train_speaker(corpus, cfg, 99, &report);
    }
};

Fixture &fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("training reaches high accuracy on the synthetic speakers") {
    CHECK(fx().report.train_accuracy >= 0.95);
    CHECK(fx().report.final_loss < 1.0);
}

TEST_CASE("embeddings are unit norm") {
    for (int i = 0; i < 5; ++i) {
        Vec e = extract(fx().model, fx().corpus[size_t(i)].audio);
        CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(int(e.size()) == fx().cfg.d_spk);
    }
}

TEST_CASE("same-speaker clips are closer than cross-speaker clips") {
    auto &f = fx();
    // cache embeddings once; extraction is deterministic
    std::vector<Vec> emb;
    for (const auto &u : f.corpus) emb.push_back(extract(f.model, u.audio));

    Rng rng(7);
    int ok = 0, total = 0;
    while (total < 500) {
        auto pick = [&] { return size_t(rng.uniform_int(0, int64_t(f.corpus.size()) - 1)); };
        size_t a = pick();
        size_t p = pick(), n = pick();
        // resample until p shares the speaker and n does not
        while (p == a || f.corpus[p].speaker_id != f.corpus[a].speaker_id) p = pick();
        while (f.corpus[n].speaker_id == f.corpus[a].speaker_id) n = pick();
        total++;
        if (cosine_similarity(emb[a], emb[p]) > cosine_similarity(emb[a], emb[n])) ok++;
    }
    CHECK(double(ok) / double(total) >= 0.95);
}

TEST_CASE("self-concatenation leaves the embedding nearly unchanged") {
    auto &f = fx();
    for (int i = 0; i < 4; ++i) {
        const Waveform &w = f.corpus[size_t(i)].audio;
        Waveform ww = w;
        ww.samples.insert(ww.samples.end(), w.samples.begin(), w.samples.end());
        Vec e1 = extract(f.model, w), e2 = extract(f.model, ww);
        CHECK(1.0 - cosine_similarity(e1, e2) < 1e-3);
    }
}

TEST_CASE("silence padding leaves the embedding nearly unchanged") {
    auto &f = fx();
    const Waveform &w = f.corpus[0].audio;
    Waveform padded = w;
    padded.samples.insert(padded.samples.begin(), 16000, 0.0);
    padded.samples.insert(padded.samples.end(), 16000, 0.0);
    Vec e1 = extract(f.model, w), e2 = extract(f.model, padded);
    CHECK(1.0 - cosine_similarity(e1, e2) < 1e-2);
}

TEST_CASE("extraction is deterministic, training is seed-determined") {
    auto &f = fx();
    Vec a = extract(f.model, f.corpus[0].audio);
    Vec b = extract(f.model, f.corpus[0].audio);
    CHECK((a - b).norm() == 0.0);

    SpeakerConfig quick = f.cfg;
    quick.train_steps = 10;
    SpeakerModel m1 = train_speaker(f.corpus, quick, 5);
    SpeakerModel m2 = train_speaker(f.corpus, quick, 5);
    for (size_t pid = 0; pid < m1.params.size(); ++pid)
        CHECK((m1.params.value(int(pid)) - m2.params.value(int(pid))).norm() == 0.0);
}

TEST_CASE("shuffled labels stay near the chance floor") {
    auto &f = fx();
    std::vector<synth::Utterance> shuffled = f.corpus;
    Rng rng(3);
    for (auto &u : shuffled) u.speaker_id = int(rng.uniform_int(0, f.cfg.n_speakers - 1));
    // with labels decoupled from the audio, a short run cannot do better
    // than memorization, which needs far more steps
    SpeakerTrainReport rep;
    SpeakerConfig quick = f.cfg;
    quick.train_steps = 5;
    train_speaker(shuffled, quick, 17, &rep);
    CHECK(rep.train_accuracy < 1.0 / f.cfg.n_speakers + 0.25);
}

TEST_CASE("input validation") {
    auto &f = fx();
    Waveform empty;
    CHECK_THROWS_AS(extract(f.model, empty), InputError);
    SpeakerModel raw = SpeakerModel::init(f.cfg, Rng(0));
    CHECK_THROWS_AS(extract(raw, f.corpus[0].audio), StateError);

    std::vector<synth::Utterance> mono(f.corpus.begin(), f.corpus.begin() + 4);
    for (auto &u : mono) u.speaker_id = 0;
    CHECK_THROWS_AS(train_speaker(mono, f.cfg, 1), ConfigError);
}
