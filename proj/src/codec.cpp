#include "voila/codec.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace voila::codec {

namespace {

constexpr double kMelNorm = 0.2;       // encoder input scale for log-mel
constexpr double kDeadUsage = 1e-3;    // usage EMA below this reinitializes
constexpr double kSilenceAmp = 1e-6;   // windows quieter than this are silence
constexpr double kDistillNormEps = 1e-9;

Mat stack_hist(const Mat &x, int k) {
    Mat out = Mat::Zero(x.rows(), k * x.cols());
    for (int j = 0; j < k; ++j)
        for (Eigen::Index t = j; t < x.rows(); ++t)
            out.block(t, j * x.cols(), 1, x.cols()) = x.row(t - j);
    return out;
}

}  // namespace

CodecConfig CodecConfig::from_config(const Config &c) {
    CodecConfig cfg;
    cfg.sample_rate_hz = int(c.get_int("codec.sample_rate_hz", cfg.sample_rate_hz));
    cfg.hop_samples = int(c.get_int("codec.hop_samples", cfg.hop_samples));
    cfg.window_samples = int(c.get_int("codec.window_samples", cfg.window_samples));
    cfg.n_mel_bands = int(c.get_int("codec.n_mel_bands", cfg.n_mel_bands));
    cfg.d_latent = int(c.get_int("codec.d_latent", cfg.d_latent));
    cfg.codebook_size = int(c.get_int("codec.codebook_size", cfg.codebook_size));
    cfg.ema_decay = c.get_real("codec.ema_decay", cfg.ema_decay);
    cfg.commit_weight = c.get_real("codec.commit_weight", cfg.commit_weight);
    cfg.distill_weight = c.get_real("codec.distill_weight", cfg.distill_weight);
    cfg.silence_anchor_weight = c.get_real("codec.silence_anchor_weight", cfg.silence_anchor_weight);
    cfg.enc_hidden = int(c.get_int("codec.enc_hidden", cfg.enc_hidden));
    cfg.dec_hidden = int(c.get_int("codec.dec_hidden", cfg.dec_hidden));
    cfg.d_teacher = int(c.get_int("codec.d_teacher", cfg.d_teacher));
    cfg.validate();
    return cfg;
}

void CodecConfig::validate() const {
    if (n_levels != 4) throw ConfigError("codec: exactly 4 RVQ levels required");
    if (codebook_size < 2) throw ConfigError("codec: codebook size must be >= 2");
    if (window_samples < hop_samples) throw ConfigError("codec: window < hop");
    if (window_samples - hop_samples > hop_samples)
        throw ConfigError("codec: frontend lookahead exceeds one frame");
    if (ema_decay <= 0.0) throw ConfigError("codec: ema_decay must be positive");
    if (commit_weight < 0.0 || distill_weight < 0.0)
        throw ConfigError("codec: loss weights must be non-negative");
}

dsp::MelConfig CodecConfig::mel_config() const {
    dsp::MelConfig m;
    m.sample_rate_hz = sample_rate_hz;
    m.hop_samples = hop_samples;
    m.window_samples = window_samples;
    m.n_mel_bands = n_mel_bands;
    return m;
}

QuantizeResult rvq_quantize(const Vec &latent, const std::vector<Mat> &books) {
    if (!latent.allFinite()) throw InputError("rvq_quantize: non-finite latent");
    QuantizeResult r;
    r.quantized = Vec::Zero(latent.size());
    Vec residual = latent;
    for (const Mat &book : books) {
        int best = 0;
        double best_d = (book.row(0).transpose() - residual).squaredNorm();
        for (int i = 1; i < book.rows(); ++i) {
            double d = (book.row(i).transpose() - residual).squaredNorm();
            if (d < best_d) {  // strict: lowest index wins ties
                best_d = d;
                best = i;
            }
        }
        r.indices.push_back(best);
        r.quantized += book.row(best).transpose();
        residual -= book.row(best).transpose();
        r.residuals.push_back(residual);
    }
    return r;
}

Vec rvq_dequantize(const std::vector<int> &indices, const std::vector<Mat> &books) {
    if (indices.size() != books.size()) throw InputError("rvq_dequantize: level count mismatch");
    Vec out = Vec::Zero(books[0].cols());
    for (size_t q = 0; q < books.size(); ++q) {
        if (indices[q] < 0 || indices[q] >= books[q].rows())
            throw InputError("rvq_dequantize: index out of range");
        out += books[q].row(indices[q]).transpose();
    }
    return out;
}

double semantic_distill_loss(const Vec &level1_quantized, const Mat &projection,
                             const Vec &teacher, bool *degenerate) {
    Vec p = projection.transpose() * level1_quantized;
    double np = p.norm(), nt = teacher.norm();
    if (degenerate) *degenerate = false;
    if (np < kDistillNormEps || nt < kDistillNormEps) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    return 1.0 - p.dot(teacher) / (np * nt);
}

CodecState CodecState::init(const CodecConfig &cfg, Rng rng) {
    cfg.validate();
    CodecState s;
    s.cfg = cfg;
    auto w = [&](int r, int c) { return nn::randn(rng, r, c, 1.0 / std::sqrt(double(r))); };
    int k = cfg.conv_kernel, H = cfg.enc_hidden, Hd = cfg.dec_hidden;
    auto &p = s.params;
    s.ids.enc_w1 = p.add("enc.w1", w(k * cfg.n_mel_bands, H));
    s.ids.enc_b1 = p.add("enc.b1", Mat::Zero(1, H), false);
    s.ids.enc_w2 = p.add("enc.w2", w(k * H, H));
    s.ids.enc_b2 = p.add("enc.b2", Mat::Zero(1, H), false);
    s.ids.enc_w3 = p.add("enc.w3", w(H, cfg.d_latent));
    s.ids.enc_b3 = p.add("enc.b3", Mat::Zero(1, cfg.d_latent), false);
    s.ids.dec_w1 = p.add("dec.w1", w(k * cfg.d_latent, Hd));
    s.ids.dec_b1 = p.add("dec.b1", Mat::Zero(1, Hd), false);
    s.ids.dec_w2 = p.add("dec.w2", w(k * Hd, Hd));
    s.ids.dec_b2 = p.add("dec.b2", Mat::Zero(1, Hd), false);
    s.ids.dec_w3 = p.add("dec.w3", w(Hd, cfg.hop_samples));
    s.ids.dec_b3 = p.add("dec.b3", Mat::Zero(1, cfg.hop_samples), false);
    s.ids.proj = p.add("distill.proj", w(cfg.d_latent, cfg.d_teacher));
    s.ids.teacher = p.add("distill.teacher", nn::randn(rng, cfg.n_phones, cfg.d_teacher, 1.0), false);
    for (int q = 0; q < 4; ++q) {
        Mat book = nn::randn(rng, cfg.codebook_size, cfg.d_latent, 0.05);
        book.row(0).setZero();  // pinned silence/identity anchor
        s.ids.book[size_t(q)] = p.add("rvq.book" + std::to_string(q + 1), std::move(book), false);
        s.ids.usage[size_t(q)] =
            p.add("rvq.usage" + std::to_string(q + 1), Mat::Ones(cfg.codebook_size, 1), false);
    }
    return s;
}

std::vector<Mat> CodecState::books_vec() const {
    std::vector<Mat> v;
    for (int q = 0; q < 4; ++q) v.push_back(book(q));
    return v;
}

void CodecState::require_trained(const char *op) const {
    if (!trained) throw StateError(std::string(op) + ": untrained codec");
}

// ---- plain forward paths ----

Mat encoder_forward(const CodecState &s, const Mat &mel) {
    const auto &p = s.params;
    int k = s.cfg.conv_kernel;
    Mat x = mel * kMelNorm;
    Mat h1 = ((stack_hist(x, k) * p.value(s.ids.enc_w1)).rowwise() +
              p.value(s.ids.enc_b1).row(0)).cwiseMax(0.0);
    Mat h2 = ((stack_hist(h1, k) * p.value(s.ids.enc_w2)).rowwise() +
              p.value(s.ids.enc_b2).row(0)).cwiseMax(0.0);
    return (h2 * p.value(s.ids.enc_w3)).rowwise() + p.value(s.ids.enc_b3).row(0);
}

Mat decoder_forward(const CodecState &s, const Mat &latents) {
    const auto &p = s.params;
    int k = s.cfg.conv_kernel;
    Mat h1 = ((stack_hist(latents, k) * p.value(s.ids.dec_w1)).rowwise() +
              p.value(s.ids.dec_b1).row(0)).cwiseMax(0.0);
    Mat h2 = ((stack_hist(h1, k) * p.value(s.ids.dec_w2)).rowwise() +
              p.value(s.ids.dec_b2).row(0)).cwiseMax(0.0);
    Mat y = (h2 * p.value(s.ids.dec_w3)).rowwise() + p.value(s.ids.dec_b3).row(0);
    return y.array().tanh().matrix();
}

std::vector<FrameTokens> quantize_latents(const CodecState &s, const Mat &latents) {
    std::vector<Mat> books = s.books_vec();
    std::vector<FrameTokens> out;
    out.reserve(size_t(latents.rows()));
    for (Eigen::Index t = 0; t < latents.rows(); ++t) {
        QuantizeResult q = rvq_quantize(latents.row(t).transpose(), books);
        FrameTokens f;
        for (int l = 0; l < 4; ++l) f.idx[size_t(l)] = uint16_t(q.indices[size_t(l)]);
        out.push_back(f);
    }
    return out;
}

Mat dequantize_frames(const CodecState &s, const std::vector<FrameTokens> &frames) {
    std::vector<Mat> books = s.books_vec();
    Mat out(Eigen::Index(frames.size()), s.cfg.d_latent);
    for (size_t t = 0; t < frames.size(); ++t) {
        std::vector<int> idx(frames[t].idx.begin(), frames[t].idx.end());
        out.row(Eigen::Index(t)) = rvq_dequantize(idx, books).transpose();
    }
    return out;
}

std::vector<FrameTokens> encode_waveform(const CodecState &s, const Waveform &w) {
    s.require_trained("encode_waveform");
    if (w.sample_rate_hz != s.cfg.sample_rate_hz)
        throw ConfigError("encode_waveform: sample-rate mismatch");
    if (w.samples.empty()) return {};
    dsp::MelFrontend fe(s.cfg.mel_config());
    Mat latents = encoder_forward(s, fe.mel(w));
    std::vector<FrameTokens> out = quantize_latents(s, latents);
    // quiet windows snap to the canonical all-zero silence frame
    Mat win = fe.windowed_frames(w);
    for (size_t t = 0; t < out.size(); ++t)
        if (win.row(Eigen::Index(t)).cwiseAbs().maxCoeff() < kSilenceAmp) out[t] = {};
    return out;
}

Waveform decode_tokens(const CodecState &s, const std::vector<FrameTokens> &frames) {
    s.require_trained("decode_tokens");
    Waveform w;
    w.sample_rate_hz = s.cfg.sample_rate_hz;
    if (frames.empty()) return w;
    Mat y = decoder_forward(s, dequantize_frames(s, frames));
    w.samples.resize(size_t(y.rows()) * size_t(y.cols()));
    for (Eigen::Index t = 0; t < y.rows(); ++t)
        for (Eigen::Index j = 0; j < y.cols(); ++j)
            w.samples[size_t(t) * size_t(y.cols()) + size_t(j)] = y(t, j);
    return w;
}

CodecBatchItem make_codec_item(const CodecState &s, const Waveform &w,
                               std::vector<int> phone_labels) {
    dsp::MelFrontend fe(s.cfg.mel_config());
    CodecBatchItem item;
    item.mel = fe.mel(w);
    item.windowed = fe.windowed_frames(w);
    item.phone_labels = std::move(phone_labels);
    if (Eigen::Index(item.phone_labels.size()) != item.mel.rows())
        throw InputError("codec item: phone label count != frame count");
    return item;
}

// ---- training ----

namespace {

nn::Var encoder_graph(const CodecState &s, const Mat &mel) {
    const auto &p = s.params;
    int k = s.cfg.conv_kernel;
    nn::Var x = nn::constant(mel * kMelNorm);
    nn::Var h1 = nn::relu(nn::linear(nn::stack_shift(x, k), nn::param(p, s.ids.enc_w1),
                                     nn::param(p, s.ids.enc_b1)));
    nn::Var h2 = nn::relu(nn::linear(nn::stack_shift(h1, k), nn::param(p, s.ids.enc_w2),
                                     nn::param(p, s.ids.enc_b2)));
    return nn::linear(h2, nn::param(p, s.ids.enc_w3), nn::param(p, s.ids.enc_b3));
}

nn::Var decoder_graph(const CodecState &s, nn::Var zq) {
    const auto &p = s.params;
    int k = s.cfg.conv_kernel;
    nn::Var h1 = nn::relu(nn::linear(nn::stack_shift(std::move(zq), k),
                                     nn::param(p, s.ids.dec_w1), nn::param(p, s.ids.dec_b1)));
    nn::Var h2 = nn::relu(nn::linear(nn::stack_shift(h1, k), nn::param(p, s.ids.dec_w2),
                                     nn::param(p, s.ids.dec_b2)));
    return nn::tanh_(nn::linear(h2, nn::param(p, s.ids.dec_w3), nn::param(p, s.ids.dec_b3)));
}

}  // namespace

CodecLossReport train_codec_step(CodecState &s, const std::vector<CodecBatchItem> &batch,
                                 nn::AdamW &opt, double lr, Rng &rng) {
    if (batch.empty()) throw InputError("train_codec_step: empty batch");
    const auto &cfg = s.cfg;
    dsp::MelFrontend fe(cfg.mel_config());
    bool frozen = cfg.ema_decay >= 1.0;
    int sil = cfg.n_phones - 1;

    nn::Grads grads(s.params);
    CodecLossReport rep;
    double inv_b = 1.0 / double(batch.size());

    // per-level EMA assignment stats for this step
    std::vector<Mat> books = s.books_vec();
    std::array<Mat, 4> assign_sum;
    std::array<Vec, 4> assign_n;
    for (int q = 0; q < 4; ++q) {
        assign_sum[size_t(q)] = Mat::Zero(cfg.codebook_size, cfg.d_latent);
        assign_n[size_t(q)] = Vec::Zero(cfg.codebook_size);
    }
    std::vector<Vec> batch_latents;  // for dead-entry reinit

    for (const CodecBatchItem &item : batch) {
        Eigen::Index T = item.mel.rows();
        if (T == 0) continue;

        nn::Var latent = encoder_graph(s, item.mel);
        const Mat &lv = latent->v();

        // quantize each frame (plain) and collect EMA stats; silence-labeled
        // frames commit to the all-zero frame and stay out of the statistics
        Mat quantized(T, cfg.d_latent);
        std::vector<int> idx1(size_t(T), 0);
        for (Eigen::Index t = 0; t < T; ++t) {
            if (item.phone_labels[size_t(t)] == sil) {
                quantized.row(t).setZero();
                continue;
            }
            QuantizeResult q = rvq_quantize(lv.row(t).transpose(), books);
            quantized.row(t) = q.quantized.transpose();
            idx1[size_t(t)] = q.indices[0];
            Vec res_in = lv.row(t).transpose();
            for (int l = 0; l < 4; ++l) {
                assign_sum[size_t(l)].row(q.indices[size_t(l)]) += res_in.transpose();
                assign_n[size_t(l)](q.indices[size_t(l)]) += 1.0;
                res_in = q.residuals[size_t(l)];
            }
            batch_latents.push_back(lv.row(t).transpose());
        }

        // reconstruction: straight-through quantized latents -> decoder -> mel L1
        nn::Var zq = nn::add(latent, nn::constant(quantized - lv));
        nn::Var y = decoder_graph(s, zq);
        nn::Var mel_dec = fe.mel_graph(fe.window_graph(nn::overlap_frames(y, cfg.window_samples)));
        nn::Var recon = nn::mean_all(nn::abs_(nn::sub(mel_dec, nn::constant(item.mel))));

        // commitment: pull encoder toward the (frozen) quantized values
        nn::Var commit = nn::mean_all(
            nn::cmul(nn::sub(latent, nn::constant(quantized)), nn::sub(latent, nn::constant(quantized))));

        // distillation on level 1 with gradient to encoder and level-1 book
        nn::Var q1 = nn::add(nn::gather(s.params, s.ids.book[0], idx1),
                             nn::sub(latent, nn::constant(lv)));
        nn::Var proj = nn::matmul(q1, nn::param(s.params, s.ids.proj));
        nn::Var teacher = nn::gather(s.params, s.ids.teacher, item.phone_labels);
        std::vector<nn::Var> dists;
        for (Eigen::Index t = 0; t < T; ++t) {
            if (item.phone_labels[size_t(t)] == sil) continue;
            bool degen = false;
            dists.push_back(nn::cosine_distance(nn::rows(proj, int(t), 1),
                                                nn::rows(teacher, int(t), 1), kDistillNormEps,
                                                &degen));
            if (degen) rep.degenerate_frames++;
        }
        nn::Var distill =
            dists.empty() ? nn::constant_scalar(0.0) : nn::mean_all(nn::vstack(dists));

        // silence anchor: latents of silence-labeled frames pulled to zero
        std::vector<nn::Var> sil_rows;
        for (Eigen::Index t = 0; t < T; ++t)
            if (item.phone_labels[size_t(t)] == sil)
                sil_rows.push_back(nn::rows(latent, int(t), 1));
        nn::Var anchor = sil_rows.empty()
                             ? nn::constant_scalar(0.0)
                             : nn::mean_all(nn::cmul(nn::vstack(sil_rows), nn::vstack(sil_rows)));

        nn::Var total = nn::add(
            nn::add(recon, nn::scale(commit, cfg.commit_weight)),
            nn::add(nn::scale(distill, cfg.distill_weight),
                    nn::scale(anchor, cfg.silence_anchor_weight)));

        rep.recon += recon->scalar() * inv_b;
        rep.commit += commit->scalar() * inv_b;
        rep.distill += distill->scalar() * inv_b;
        rep.anchor += anchor->scalar() * inv_b;
        rep.total += total->scalar() * inv_b;

        nn::backward(nn::scale(total, inv_b), grads);
    }

    if (!std::isfinite(rep.total))
        throw StateError("train_codec_step: non-finite loss; snapshot recon=" +
                         std::to_string(rep.recon) + " commit=" + std::to_string(rep.commit) +
                         " distill=" + std::to_string(rep.distill));

    if (frozen) {
        // no-update limit: codebooks must stay bit-identical
        for (int q = 0; q < 4; ++q) {
            grads.has[size_t(s.ids.book[size_t(q)])] = 0;
            grads.has[size_t(s.ids.usage[size_t(q)])] = 0;
        }
    }

    opt.step(s.params, grads, lr);

    if (!frozen) {
        double g = cfg.ema_decay;
        for (int q = 0; q < 4; ++q) {
            Mat &book = s.book(q);
            Mat &usage = s.usage(q);
            for (int i = 0; i < cfg.codebook_size; ++i) {
                double n = assign_n[size_t(q)](i);
                usage(i, 0) = g * usage(i, 0) + (1.0 - g) * n;
                if (n > 0.0)
                    book.row(i) = g * book.row(i) +
                                  (1.0 - g) * (assign_sum[size_t(q)].row(i) / n);
            }
            // dead-entry reinit to random batch latents
            for (int i = 1; i < cfg.codebook_size && !batch_latents.empty(); ++i) {
                if (usage(i, 0) < kDeadUsage) {
                    size_t pick = size_t(rng.uniform_int(0, int64_t(batch_latents.size()) - 1));
                    book.row(i) = batch_latents[pick].transpose();
                    usage(i, 0) = 1.0;
                }
            }
            book.row(0).setZero();  // keep the anchor pinned
        }
    }
    return rep;
}

// ---- streaming ----

EncodeStream::EncodeStream(const CodecState &s)
    : s_(s), fe_(s.cfg.mel_config()), hist_needed_(size_t(2 * (s.cfg.conv_kernel - 1) + 1)) {
    s.require_trained("EncodeStream");
}

FrameTokens EncodeStream::push_windowed(const Eigen::RowVectorXd &windowed) {
    mel_hist_.push_back(fe_.mel_row(windowed));
    while (mel_hist_.size() > hist_needed_) mel_hist_.pop_front();
    if (windowed.cwiseAbs().maxCoeff() < kSilenceAmp) return {};
    Mat mel(Eigen::Index(mel_hist_.size()), s_.cfg.n_mel_bands);
    for (size_t i = 0; i < mel_hist_.size(); ++i) mel.row(Eigen::Index(i)) = mel_hist_[i];
    Mat latents = encoder_forward(s_, mel);
    QuantizeResult q = rvq_quantize(latents.row(latents.rows() - 1).transpose(), s_.books_vec());
    FrameTokens f;
    for (int l = 0; l < 4; ++l) f.idx[size_t(l)] = uint16_t(q.indices[size_t(l)]);
    return f;
}

DecodeStream::DecodeStream(const CodecState &s)
    : s_(s), hist_needed_(size_t(2 * (s.cfg.conv_kernel - 1) + 1)) {
    s.require_trained("DecodeStream");
}

Eigen::RowVectorXd DecodeStream::push_frame(const FrameTokens &t) {
    std::vector<int> idx(t.idx.begin(), t.idx.end());
    latent_hist_.push_back(rvq_dequantize(idx, s_.books_vec()));
    while (latent_hist_.size() > hist_needed_) latent_hist_.pop_front();
    Mat latents(Eigen::Index(latent_hist_.size()), s_.cfg.d_latent);
    for (size_t i = 0; i < latent_hist_.size(); ++i)
        latents.row(Eigen::Index(i)) = latent_hist_[i].transpose();
    Mat y = decoder_forward(s_, latents);
    return y.row(y.rows() - 1);
}

// ---- token files ----

void write_tokens(const std::string &path, const std::vector<FrameTokens> &frames, int K) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write token file: " + path);
    auto u16 = [&](uint16_t v) {
        char b[2] = {char(v & 0xff), char(v >> 8)};
        f.write(b, 2);
    };
    f.write("VTOK", 4);
    f.put(1);  // version
    u16(uint16_t(K));
    f.put(4);  // Q
    uint32_t n = uint32_t(frames.size());
    char nb[4] = {char(n & 0xff), char((n >> 8) & 0xff), char((n >> 16) & 0xff), char(n >> 24)};
    f.write(nb, 4);
    for (const auto &fr : frames)
        for (uint16_t v : fr.idx) u16(v);
    if (!f) throw IoError("short write on token file: " + path);
}

std::pair<std::vector<FrameTokens>, int> read_tokens(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read token file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "VTOK", 4) != 0) throw IoError("bad token file magic: " + path);
    int version = f.get();
    if (version != 1) throw IoError("unsupported token file version: " + path);
    auto u16 = [&]() {
        int lo = f.get(), hi = f.get();
        return uint16_t(lo | (hi << 8));
    };
    int K = u16();
    int Q = f.get();
    if (Q != 4) throw IoError("token file: expected 4 levels");
    unsigned char nb[4];
    f.read(reinterpret_cast<char *>(nb), 4);
    uint32_t n = uint32_t(nb[0]) | uint32_t(nb[1]) << 8 | uint32_t(nb[2]) << 16 | uint32_t(nb[3]) << 24;
    std::vector<FrameTokens> frames(n);
    for (auto &fr : frames)
        for (auto &v : fr.idx) v = u16();
    if (!f) throw IoError("truncated token file: " + path);
    for (const auto &fr : frames)
        for (uint16_t v : fr.idx)
            if (v >= K) throw IoError("token file: index out of codebook range");
    return {std::move(frames), K};
}

double mel_snr_db(const CodecState &s, const Waveform &ref, const Waveform &test) {
    dsp::MelFrontend fe(s.cfg.mel_config());
    Mat mr = fe.mel(ref), mt = fe.mel(test);
    Eigen::Index T = std::min(mr.rows(), mt.rows());
    if (T == 0) throw InputError("mel_snr_db: empty input");
    double sig = mr.topRows(T).squaredNorm();
    double noise = (mr.topRows(T) - mt.topRows(T)).squaredNorm();
    if (noise <= 0.0) return 120.0;
    return 10.0 * std::log10(sig / noise);
}

}  // namespace voila::codec
