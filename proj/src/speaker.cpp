#include "voila/speaker.hpp"

#include <cmath>
#include <set>

namespace voila::speaker {

dsp::MelConfig SpeakerConfig::mel_config() const {
    dsp::MelConfig m;
    m.n_mel_bands = n_mel_bands;
    return m;
}

SpeakerModel SpeakerModel::init(const SpeakerConfig &cfg, Rng rng) {
    SpeakerModel m;
    m.cfg = cfg;
    auto w = [&](int r, int c) { return nn::randn(rng, r, c, 1.0 / std::sqrt(double(r))); };
    auto &p = m.params;
    m.ids.w1 = p.add("spk.w1", w(2 * cfg.n_mel_bands, cfg.d_hidden));
    m.ids.b1 = p.add("spk.b1", Mat::Zero(1, cfg.d_hidden), false);
    m.ids.w2 = p.add("spk.w2", w(cfg.d_hidden, cfg.d_spk));
    m.ids.b2 = p.add("spk.b2", Mat::Zero(1, cfg.d_spk), false);
    m.ids.w3 = p.add("spk.w3", w(cfg.d_spk, cfg.n_speakers));
    m.ids.b3 = p.add("spk.b3", Mat::Zero(1, cfg.n_speakers), false);
    return m;
}

Vec pooled_stats(const SpeakerModel &m, const Waveform &w) {
    if (w.samples.empty()) throw InputError("pooled_stats: empty waveform");
    dsp::MelFrontend fe(m.cfg.mel_config());
    Mat mel = fe.mel(w);
    if (mel.rows() == 0) throw InputError("pooled_stats: waveform shorter than one frame");

    std::vector<Eigen::Index> voiced;
    for (Eigen::Index t = 0; t < mel.rows(); ++t)
        if (mel.row(t).mean() > m.cfg.voiced_floor) voiced.push_back(t);
    if (voiced.empty())
        for (Eigen::Index t = 0; t < mel.rows(); ++t) voiced.push_back(t);

    int n_mel = m.cfg.n_mel_bands;
    Vec mean = Vec::Zero(n_mel), var = Vec::Zero(n_mel);
    for (Eigen::Index t : voiced) mean += mel.row(t).transpose();
    mean /= double(voiced.size());
    for (Eigen::Index t : voiced) {
        Vec d = mel.row(t).transpose() - mean;
        var += d.cwiseProduct(d);
    }
    var /= double(voiced.size());

    Vec out(2 * n_mel);
    out.head(n_mel) = mean;
    out.tail(n_mel) = var.cwiseSqrt();
    return out;
}

namespace {

// embedding (penultimate activations) for pooled feature rows; the input
// scale is log-mel sized, so shrink it for a well-conditioned MLP
Mat embed_rows(const SpeakerModel &m, const Mat &feats_raw) {
    const auto &p = m.params;
    Mat feats = feats_raw / 5.0;
    Mat h = ((feats * p.value(m.ids.w1)).rowwise() + p.value(m.ids.b1).row(0)).cwiseMax(0.0);
    return (h * p.value(m.ids.w2)).rowwise() + p.value(m.ids.b2).row(0);
}

}  // namespace

Vec extract(const SpeakerModel &m, const Waveform &w) {
    if (!m.trained) throw StateError("extract: untrained speaker model");
    Mat e = embed_rows(m, pooled_stats(m, w).transpose());
    double n = e.row(0).norm();
    if (n < 1e-12) throw StateError("extract: degenerate zero embedding");
    return e.row(0).transpose() / n;
}

double cosine_similarity(const Vec &a, const Vec &b) {
    double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) throw InputError("cosine_similarity: zero vector");
    return a.dot(b) / (na * nb);
}

SpeakerModel train_speaker(const std::vector<synth::Utterance> &corpus,
                           const SpeakerConfig &cfg, uint64_t seed,
                           SpeakerTrainReport *report) {
    std::set<int> speakers;
    for (const auto &u : corpus) speakers.insert(u.speaker_id);
    if (speakers.size() < 2) throw ConfigError("train_speaker: need at least 2 speakers");
    for (int s : speakers)
        if (s < 0 || s >= cfg.n_speakers)
            throw ConfigError("train_speaker: speaker id outside configured range");

    SpeakerModel m = SpeakerModel::init(cfg, Rng(seed).fork("speaker-init"));

    Mat feats(Eigen::Index(corpus.size()), 2 * cfg.n_mel_bands);
    std::vector<int> labels;
    for (size_t i = 0; i < corpus.size(); ++i) {
        feats.row(Eigen::Index(i)) = pooled_stats(m, corpus[i].audio).transpose();
        labels.push_back(corpus[i].speaker_id);
    }
    nn::AdamW opt(m.params);
    std::vector<double> weights(corpus.size(), 1.0);
    double loss = 0.0;
    for (int step = 0; step < cfg.train_steps; ++step) {
        nn::Grads grads(m.params);
        nn::Var x = nn::constant(feats / 5.0);
        nn::Var h = nn::relu(nn::linear(x, nn::param(m.params, m.ids.w1), nn::param(m.params, m.ids.b1)));
        nn::Var e = nn::linear(h, nn::param(m.params, m.ids.w2), nn::param(m.params, m.ids.b2));
        nn::Var logits = nn::linear(e, nn::param(m.params, m.ids.w3), nn::param(m.params, m.ids.b3));
        nn::Var ce = nn::softmax_ce(logits, labels, weights, double(corpus.size()));
        loss = ce->scalar();
        nn::backward(ce, grads);
        opt.step(m.params, grads, cfg.lr);
    }
    m.trained = true;

    if (report) {
        report->final_loss = loss;
        Mat e = embed_rows(m, feats);
        Mat logits = ((e * m.params.value(m.ids.w3)).rowwise() + m.params.value(m.ids.b3).row(0));
        int correct = 0;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::Index best;
            logits.row(i).maxCoeff(&best);
            if (int(best) == labels[size_t(i)]) ++correct;
        }
        report->train_accuracy = double(correct) / double(corpus.size());
    }
    return m;
}

}  // namespace voila::speaker
