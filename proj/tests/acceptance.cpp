// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 2 and 7-11 share one trained toy pipeline.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#include "voila/pipeline.hpp"

using namespace voila;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const std::string &name, bool pass, const std::string &detail,
            double seconds) {
    if (!pass) g_failures++;
    std::printf("[%s] %2d. %-22s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
}

template <class F>
void criterion(int id, const std::string &name, F f) {
    auto t0 = Clock::now();
    bool pass = false;
    std::string detail;
    try {
        pass = f(detail);
    } catch (const std::exception &e) {
        detail = std::string("exception: ") + e.what();
    }
    report(id, name, pass, detail, std::chrono::duration<double>(Clock::now() - t0).count());
}

// toy profile used for the trained-pipeline criteria
Config acceptance_config() {
    return Config::parse_text(R"(
synth.lexicon_size = 48
synth.n_speakers = 4
corpus.train_utterances = 3072
corpus.heldout_utterances = 20
corpus.max_words = 2
codec.codebook_size = 64
codec.d_latent = 32
codec.enc_hidden = 64
codec.dec_hidden = 64
codec.d_teacher = 16
codec.train_steps = 1000
codec.ema_decay = 0.96
codec.distill_weight = 1.5
codec.batch_size = 8
codec.lr = 2e-3
speaker.d_hidden = 64
speaker.train_steps = 300
model.d_model = 128
model.n_layers = 4
model.n_heads = 4
model.max_context_steps = 256
model.d_depth = 96
model.n_layers_depth = 2
model.n_heads_depth = 2
model.d_spk = 32
train.mix_asr = 0.40
train.mix_tts = 0.40
train.mix_instruct = 0.20
train.task_samples = 4608
train.duplex_samples = 96
train.model_steps = 14000
train.batch_size = 8
train.lr = 2e-3
train.warmup_steps = 700
)");
}

constexpr uint64_t kSeed = 20260824;

// small fixtures for the structural criteria
struct TinyFixture {
    synth::Synthesizer syn;
    vocab::VocabSpec v;
    codec::CodecState cod;
    model::ModelConfig mcfg;
    std::vector<Eigen::VectorXd> spk_emb;

    TinyFixture()
        : syn(
              [] {
                  synth::SynthConfig c;
                  c.lexicon_size = 40;
                  return c;
              }(),
              3),
          v(vocab::VocabSpec::build(syn.lexicon(), 8)) {
        codec::CodecConfig cc;
        cc.codebook_size = 8;
        cc.d_latent = 8;
        cc.enc_hidden = 16;
        cc.dec_hidden = 16;
        cc.d_teacher = 8;
        cod = codec::CodecState::init(cc, Rng(4));
        cod.trained = true;  // structure only; content does not matter here
        mcfg.d_model = 32;
        mcfg.n_layers = 2;
        mcfg.n_heads = 2;
        mcfg.d_depth = 16;
        mcfg.n_layers_depth = 1;
        mcfg.n_heads_depth = 2;
        mcfg.d_spk = 8;
        mcfg.attach_vocab(v);
        for (int s = 0; s < syn.config().n_speakers; ++s) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(mcfg.d_spk);
            e(s % mcfg.d_spk) = 1.0;
            spk_emb.push_back(e);
        }
    }

    std::vector<model::TrainSample> samples(int n, uint64_t seed) const {
        auto corpus = syn.sample_utterances(6, 2, Rng(9));
        auto tasks = train::make_task_samples(corpus, cod, v, syn, train::TaskMix{}, n,
                                              Rng(seed));
        return train::make_batch(tasks, v, mcfg, spk_emb);
    }
};

TinyFixture &tiny() {
    static TinyFixture f;
    return f;
}

codec::FrameTokens ft(int a, int b, int c, int d) {
    codec::FrameTokens f;
    f.idx = {uint16_t(a), uint16_t(b), uint16_t(c), uint16_t(d)};
    return f;
}

std::string transcribe(const model::Model &m, const codec::CodecState &cod,
                       const vocab::VocabSpec &v, const Waveform &w, int max_words) {
    auto frames = codec::encode_waveform(cod, w);
    align::InterleavedSequence prompt;
    prompt.task = align::TaskKind::Asr;
    prompt.steps.push_back(align::Step::special(vocab::kHuman));
    for (const auto &f : frames) prompt.steps.push_back(align::Step::audio(v, f));
    prompt.steps.push_back(align::Step::special(vocab::kVoila));
    prompt.loss_mask.assign(prompt.steps.size(), 0);
    Rng rng(1);
    model::GenerateLimits lim;
    lim.max_steps = max_words * 2 + 8;
    auto res =
        model::generate(m, v, prompt, std::nullopt, lim, model::SampleMode::Greedy, rng);
    std::vector<int> ids;
    for (const auto &s : res.response.steps)
        if (s.kind == align::StepKind::Text) ids.push_back(s.token());
    return v.detokenize(ids);
}

// teacher-forced greedy accuracy over every masked position and depth level
double masked_token_accuracy(const model::Model &m, const vocab::VocabSpec &v,
                             const std::vector<model::TrainSample> &data) {
    long correct = 0, total = 0;
    for (const auto &s : data) {
        Eigen::MatrixXd x = model::embed_steps(m, s.inputs, s.ref_index,
                                               s.speaker ? &*s.speaker : nullptr, &s.fused);
        Eigen::MatrixXd h = model::backbone_forward(m, x);
        for (size_t t = 0; t < s.inputs.size(); ++t) {
            if (!s.mask[t]) continue;
            Eigen::RowVectorXd logits = model::head_logits(m, h.row(Eigen::Index(t)));
            Eigen::Index best;
            logits.maxCoeff(&best);
            total++;
            if (int(best) == s.head_targets[t]) correct++;
            if (s.head_targets[t] == m.cfg.audio_step_slot()) {
                Eigen::MatrixXd dl = model::depth_logits_teacher(m, h.row(Eigen::Index(t)),
                                                                 s.depth_targets[t]);
                for (int q = 0; q < 4; ++q) {
                    dl.row(q).maxCoeff(&best);
                    total++;
                    if (int(best) == int(s.depth_targets[t].idx[size_t(q)])) correct++;
                }
            }
        }
    }
    return total ? double(correct) / double(total) : 0.0;
}

std::string run_cli(const std::string &args, int *exit_code) {
    FILE *p = popen(("./voila " + args + " 2>/dev/null").c_str(), "r");
    std::string out;
    char buf[4096];
    if (p) {
        while (size_t n = fread(buf, 1, sizeof(buf), p)) out.append(buf, n);
        *exit_code = WEXITSTATUS(pclose(p));
    } else {
        *exit_code = -1;
    }
    return out;
}

std::string fmt(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.4g", v);
    return b;
}

}  // namespace

int main() {
    std::printf("acceptance suite, seed %llu\n", (unsigned long long)kSeed);

    // ---- 1. RVQ structural suite ----
    criterion(1, "rvq-structural", [](std::string &detail) {
        Rng rng(11);
        // residual monotonicity, 4 levels
        std::vector<Eigen::MatrixXd> books;
        for (int q = 0; q < 4; ++q) {
            Eigen::MatrixXd b = nn::randn(rng, 16, 8, 0.5);
            b.row(0).setZero();
            books.push_back(b);
        }
        int mono = 0, ident = 0;
        for (int i = 0; i < 1000; ++i) {
            Eigen::VectorXd z = nn::randn(rng, 8, 1, 1.0).col(0);
            auto q = codec::rvq_quantize(z, books);
            bool ok = true;
            for (size_t l = 1; l < q.residuals.size(); ++l)
                if (q.residuals[l].squaredNorm() > q.residuals[l - 1].squaredNorm() + 1e-12)
                    ok = false;
            if (ok) mono++;
            if ((codec::rvq_dequantize(q.indices, books) - q.quantized).norm() == 0.0) ident++;
        }
        // greedy-oracle equality on K=4 / Q=2 micro configs
        int oracle_ok = 0;
        for (int cfg = 0; cfg < 200; ++cfg) {
            Rng cr = rng.fork("micro", uint64_t(cfg));
            std::vector<Eigen::MatrixXd> mb;
            for (int q = 0; q < 2; ++q) {
                Eigen::MatrixXd b = nn::randn(cr, 4, 3, 1.0);
                b.row(0).setZero();
                mb.push_back(b);
            }
            Eigen::VectorXd z = nn::randn(cr, 3, 1, 1.0).col(0);
            // independent per-level exhaustive nearest neighbor
            Eigen::VectorXd r = z;
            std::vector<int> want;
            for (int q = 0; q < 2; ++q) {
                int best = 0;
                double bd = (r.transpose() - mb[size_t(q)].row(0)).squaredNorm();
                for (int k = 1; k < 4; ++k) {
                    double d = (r.transpose() - mb[size_t(q)].row(k)).squaredNorm();
                    if (d < bd) {
                        bd = d;
                        best = k;
                    }
                }
                want.push_back(best);
                r -= mb[size_t(q)].row(best).transpose();
            }
            if (codec::rvq_quantize(z, mb).indices == want) oracle_ok++;
        }
        detail = "monotonic " + std::to_string(mono) + "/1000, dequantize " +
                 std::to_string(ident) + "/1000, oracle " + std::to_string(oracle_ok) + "/200";
        return mono == 1000 && ident == 1000 && oracle_ok == 200;
    });

    // ---- 3. interleaving round trip + golden ----
    criterion(3, "interleaving", [](std::string &detail) {
        vocab::VocabSpec v = vocab::VocabSpec::build({"hello", "i", "am", "voila", "hi"}, 8);
        Rng rng(1234);
        const auto &words = v.text_units();
        int ok = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            Rng tr = rng.fork("rt", uint64_t(trial));
            align::AlignedUtterance u;
            int n_words = 1 + int(tr.uniform_int(0, 3));
            int frame = 0;
            for (int w = 0; w < n_words; ++w) {
                align::AlignedUtterance::WordSpan span;
                span.word = words[size_t(tr.uniform_int(0, int64_t(words.size()) - 2))];
                span.frame_begin = frame;
                frame += 1 + int(tr.uniform_int(0, 2));
                span.frame_end = frame;
                u.words.push_back(span);
            }
            for (int t = 0; t < frame; ++t)
                u.frames.push_back(ft(int(tr.uniform_int(0, 7)), int(tr.uniform_int(0, 7)),
                                      int(tr.uniform_int(0, 7)), int(tr.uniform_int(0, 7))));
            u.speaker_id = int(tr.uniform_int(0, 5));
            align::AlignedUtterance rt =
                align::deinterleave(align::build_interleaved(u, v), v, u.speaker_id);
            bool same = rt.frames == u.frames && rt.words.size() == u.words.size();
            for (size_t i = 0; same && i < u.words.size(); ++i)
                same = rt.words[i].word == u.words[i].word &&
                       rt.words[i].frame_begin == u.words[i].frame_begin &&
                       rt.words[i].frame_end == u.words[i].frame_end;
            if (same) ok++;
        }

        // Fig.-3 golden: hello(2 frames) i(1) am(1) voila(2)
        align::AlignedUtterance u;
        u.frames = {ft(1, 2, 3, 4), ft(5, 6, 7, 0), ft(2, 2, 2, 2),
                    ft(3, 1, 0, 7), ft(4, 4, 1, 1), ft(0, 0, 0, 0)};
        u.words = {{"hello", 0, 2}, {"i", 2, 3}, {"am", 3, 4}, {"voila", 4, 6}};
        auto steps = align::build_interleaved(u, v);
        const char *want_text[] = {"hello", nullptr, nullptr, "i",     nullptr,
                                   "am",    nullptr, "voila", nullptr, nullptr};
        size_t frame_pos[] = {1, 2, 4, 6, 8, 9};
        bool golden = steps.size() == 10;
        for (size_t i = 0; golden && i < 10; ++i) {
            if (want_text[i])
                golden = steps[i].kind == align::StepKind::Text &&
                         steps[i].token() == v.text_id(want_text[i]);
            else
                golden = steps[i].kind == align::StepKind::Audio;
        }
        for (size_t t = 0; golden && t < 6; ++t)
            golden = steps[frame_pos[t]].frame(v) == u.frames[t];

        detail = "round-trip " + std::to_string(ok) + "/1000, golden " +
                 (golden ? "ok" : "mismatch");
        return ok == 1000 && golden;
    });

    // ---- 4. mask contract ----
    criterion(4, "mask-contract", [](std::string &detail) {
        auto &f = tiny();
        model::Model m = model::Model::init(f.mcfg, Rng(41));
        int ok = 0;
        for (int trial = 0; trial < 100; ++trial) {
            auto batch = f.samples(2, 1000 + uint64_t(trial));
            model::LossReport a = model_loss(m, batch, nullptr);
            Rng cr{uint64_t(trial)};
            for (auto &s : batch)
                for (size_t t = 0; t < s.inputs.size(); ++t)
                    if (!s.mask[t]) {
                        s.head_targets[t] =
                            int(cr.uniform_int(0, f.mcfg.head_size() - 1));
                        s.depth_targets[t] = ft(int(cr.uniform_int(0, 7)), 0, 7, 3);
                    }
            model::LossReport b = model_loss(m, batch, nullptr);
            if (a.total == b.total && a.head == b.head && a.depth == b.depth &&
                a.depth_level == b.depth_level && a.masked == b.masked &&
                a.audio_masked == b.audio_masked && a.head_accuracy == b.head_accuracy)
                ok++;
        }
        detail = std::to_string(ok) + "/100 trials bit-identical";
        return ok == 100;
    });

    // ---- 5. gradient check ----
    criterion(5, "gradient-check", [](std::string &detail) {
        auto &f = tiny();
        model::Model m = model::Model::init(f.mcfg, Rng(51));
        auto batch = f.samples(2, 7);
        nn::Grads grads(m.params);
        model_loss(m, batch, &grads);
        Rng rng(77);
        int checked = 0, ok = 0;
        double h = 1e-4, worst = 0;
        while (checked < 64) {
            int pid = int(rng.uniform_int(0, int64_t(m.params.size()) - 1));
            if (!grads.has[size_t(pid)]) continue;
            Eigen::MatrixXd &w = m.params.value(pid);
            int r = int(rng.uniform_int(0, w.rows() - 1));
            int c = int(rng.uniform_int(0, w.cols() - 1));
            double orig = w(r, c);
            w(r, c) = orig + h;
            double up = model_loss(m, batch, nullptr).total;
            w(r, c) = orig - h;
            double dn = model_loss(m, batch, nullptr).total;
            w(r, c) = orig;
            double num = (up - dn) / (2.0 * h);
            double ana = grads.g[size_t(pid)](r, c);
            double rel = std::abs(num - ana) / std::max({1.0, std::abs(num), std::abs(ana)});
            worst = std::max(worst, rel);
            if (rel < 1e-4) ok++;
            checked++;
        }
        detail = std::to_string(ok) + "/64 within 1e-4, worst rel " + fmt(worst);
        return ok == 64;
    });

    // ---- 6. cache equivalence ----
    criterion(6, "cache-equivalence", [](std::string &detail) {
        auto &f = tiny();
        model::Model m = model::Model::init(f.mcfg, Rng(61));
        auto batch = f.samples(20, 13);
        double worst = 0;
        for (const auto &s : batch) {
            Eigen::MatrixXd x = model::embed_steps(m, s.inputs, s.ref_index,
                                                   s.speaker ? &*s.speaker : nullptr);
            Eigen::MatrixXd hb = model::backbone_forward(m, x);
            model::SessionState st;
            for (Eigen::Index t = 0; t < x.rows(); ++t) {
                Eigen::RowVectorXd hi = model::backbone_step(m, st, x.row(t));
                Eigen::RowVectorXd la = model::head_logits(m, hi);
                Eigen::RowVectorXd lb = model::head_logits(m, hb.row(t));
                worst = std::max(worst, (la - lb).norm() / std::max(1.0, lb.norm()));
            }
        }
        detail = "20 sequences, worst rel " + fmt(worst);
        return worst < 1e-5;
    });

    // ---- trained toy pipeline for the remaining criteria ----
    std::printf("-- training toy pipeline (codec, speaker, model) --\n");
    std::fflush(stdout);
    pipeline::Pipeline P = pipeline::make_pipeline(acceptance_config(), kSeed);

    // ---- 2. semantic purity (includes codec training) ----
    criterion(2, "semantic-purity", [&](std::string &detail) {
        auto t0 = Clock::now();
        pipeline::train_codec_stage(P);
        double train_s = std::chrono::duration<double>(Clock::now() - t0).count();
        double purity = pipeline::level1_phone_purity(P, P.heldout);
        detail = "purity " + fmt(purity) + " (codec training " + fmt(train_s) + "s)";
        return purity >= 0.80 && train_s <= 900.0;
    });

    pipeline::train_speaker_stage(P);

    // ---- 8. held-out proxy (includes model training) ----
    criterion(8, "held-out-wer", [&](std::string &detail) {
        auto t0 = Clock::now();
        pipeline::train_model_stage(P);
        double train_s = std::chrono::duration<double>(Clock::now() - t0).count();
        double asr = pipeline::eval_asr_wer(P, P.heldout);
        double tts = pipeline::eval_tts_wer(P, P.heldout);
        detail = "asr_wer " + fmt(asr) + ", tts_wer " + fmt(tts) + " (model training " +
                 fmt(train_s) + "s)";
        return asr <= 0.15 && tts <= 0.15;
    });

    // ---- 7. overfit proxy ----
    criterion(7, "overfit-proxy", [&](std::string &detail) {
        auto utts = P.synth.sample_utterances(16, 2, Rng(kSeed).fork("overfit"));
        std::vector<model::TrainSample> data;
        for (const auto &u : utts) {
            align::ChatSample asr;
            asr.task = align::TaskKind::Asr;
            asr.input_audio = codec::encode_waveform(P.codec, u.audio);
            for (const auto &w : u.words) asr.output_text.push_back(P.vocab.text_id(w));
            data.push_back(train::to_train_sample(align::render_chat(asr, P.vocab), P.vocab,
                                                  P.mcfg, nullptr));

            align::ChatSample tts;
            tts.task = align::TaskKind::Tts;
            for (const auto &w : u.words) tts.input_text.push_back(P.vocab.text_id(w));
            tts.output_aligned = train::align_utterance(u, P.codec, P.vocab);
            align::InterleavedSequence seq = align::render_chat(tts, P.vocab);
            align::inject_voice_ref(seq, align::TaskKind::Tts);
            data.push_back(train::to_train_sample(seq, P.vocab, P.mcfg,
                                                  &P.voices[size_t(u.speaker_id)]));
        }

        model::Model m = model::Model::init(P.mcfg, Rng(kSeed).fork("overfit-model"));
        m.trained = true;  // generate() refuses otherwise; weights converge below
        nn::AdamW opt(m.params);
        Rng rng(kSeed ^ 0x5eed);
        double acc = 0;
        int steps = 0;
        for (; steps < 500; ++steps) {
            std::vector<model::TrainSample> batch;
            for (int b = 0; b < 8; ++b)
                batch.push_back(data[size_t(rng.uniform_int(0, int64_t(data.size()) - 1))]);
            double lr = nn::lr_schedule(steps, 30, 500, 2e-3);
            train::train_step(m, batch, opt, lr);
            if (steps % 25 == 24) {
                acc = masked_token_accuracy(m, P.vocab, data);
                if (acc >= 0.99) break;
            }
        }
        acc = masked_token_accuracy(m, P.vocab, data);
        std::vector<std::string> hyp, ref;
        for (const auto &u : utts) {
            hyp.push_back(transcribe(m, P.codec, P.vocab, u.audio, 2));
            std::string r;
            for (const auto &w : u.words) r += (r.empty() ? "" : " ") + w;
            ref.push_back(r);
        }
        double wer = train::evaluate_wer(hyp, ref);
        detail = "accuracy " + fmt(acc) + " after " + std::to_string(steps + 1) +
                 " steps, train wer " + fmt(wer);
        return acc >= 0.99 && wer <= 0.02;
    });

    // ---- 9. voice conditioning ----
    criterion(9, "voice-conditioning", [&](std::string &detail) {
        std::vector<codec::FrameTokens> ta, tb, ta2;
        const std::string word = P.synth.lexicon()[0];
        pipeline::infer_tts(P, word, 0, &ta);
        pipeline::infer_tts(P, word, 1, &tb);
        pipeline::infer_tts(P, word, 0, &ta2);
        bool repeat_identical = ta == ta2;
        size_t common = std::min(ta.size(), tb.size());
        size_t diff = std::max(ta.size(), tb.size()) - common;
        for (size_t t = 0; t < common; ++t)
            if (!(ta[t] == tb[t])) diff++;
        double frac = ta.empty() && tb.empty()
                          ? 0.0
                          : double(diff) / double(std::max(ta.size(), tb.size()));

        // speaker triplet separation on constructive triplets
        Rng rng(kSeed ^ 0x717);
        const auto &lex = P.synth.lexicon();
        auto sample_emb = [&](int spk) {
            std::vector<std::string> words = {
                lex[size_t(rng.uniform_int(0, int64_t(lex.size()) - 1))]};
            return speaker::extract(P.spk, P.synth.utter(words, spk).audio);
        };
        int n_spk = P.synth.config().n_speakers;
        int good = 0;
        const int trials = 500;
        for (int i = 0; i < trials; ++i) {
            int a = int(rng.uniform_int(0, n_spk - 1));
            int b = int(rng.uniform_int(0, n_spk - 2));
            if (b >= a) b++;
            Eigen::VectorXd anchor = sample_emb(a), pos = sample_emb(a), neg = sample_emb(b);
            if (speaker::cosine_similarity(anchor, pos) >
                speaker::cosine_similarity(anchor, neg))
                good++;
        }
        detail = "audio-step divergence " + fmt(frac) + ", repeat " +
                 (repeat_identical ? "identical" : "DIFFERS") + ", triplets " +
                 std::to_string(good) + "/" + std::to_string(trials);
        return frac >= 0.30 && repeat_identical && good >= int(0.95 * trials);
    });

    // ---- 10. duplex suite ----
    criterion(10, "duplex-suite", [&](std::string &detail) {
        auto session = [&] {
            return duplex::open_session(P.model, P.codec, P.vocab, duplex::duplex_persona(), 1,
                                        P.voices[0]);
        };
        // silence run: rate matching, O(1) compute, quiescence, latency
        duplex::DuplexScript quiet;
        quiet.total_frames = 500;
        duplex::DuplexSession s1 = session();
        duplex::ScriptResult rq = duplex::run_script(s1, quiet);
        bool rate_ok = rq.agent_tokens.size() == 500 && rq.user_tokens.size() == 500;

        // least-squares slope of compute vs frame, after a warmup
        const auto &cm = rq.latency.compute_ms;
        size_t skip = 30, n = cm.size() - skip;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < n; ++i) {
            double x = double(i), y = cm[skip + i];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double slope = (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
        double mean = sy / double(n);
        double drift = std::abs(slope) * double(n) / mean;  // total drift / mean
        bool o1_ok = drift <= 0.10;

        int tail_silent = 0;
        for (size_t t = rq.agent_tokens.size() - 100; t < rq.agent_tokens.size(); ++t)
            if (rq.agent_tokens[t].is_silence()) tail_silent++;
        bool quiesce_ok = tail_silent >= 90;

        duplex::BudgetCheck bc = duplex::latency_budget_check(P.codec.cfg, rq.latency);
        bool latency_ok = bc.pass && bc.algorithmic_ms == 160.0;

        // barge-in A/B: second utterance overlapping the agent reply
        Waveform u1 = P.synth.utter({P.synth.lexicon()[1]}, 1).audio;
        long u1_frames = long(u1.size()) / P.codec.cfg.hop_samples;
        duplex::DuplexScript a;
        a.total_frames = 80;
        a.events.push_back({3, u1});
        duplex::DuplexScript b = a;
        long barge_at = 3 + u1_frames + 2;
        b.events.push_back({barge_at, P.synth.utter({P.synth.lexicon()[2]}, 2).audio});
        duplex::DuplexSession sa = session(), sb = session();
        duplex::ScriptResult ra = duplex::run_script(sa, a);
        duplex::ScriptResult rb = duplex::run_script(sb, b);
        bool same_before = true, diverged = false;
        for (long t = 0; t < barge_at; ++t)
            if (!(ra.agent_tokens[size_t(t)] == rb.agent_tokens[size_t(t)]))
                same_before = false;
        for (long t = barge_at; t < 80; ++t)
            if (!(ra.agent_tokens[size_t(t)] == rb.agent_tokens[size_t(t)])) diverged = true;
        bool rate2_ok = ra.agent_tokens.size() == 80 && rb.agent_tokens.size() == 80;

        detail = "rate " + std::string(rate_ok && rate2_ok ? "ok" : "BAD") + ", drift " +
                 fmt(drift) + ", quiescence " + std::to_string(tail_silent) + "/100, barge " +
                 (same_before && diverged ? "ok" : "BAD") + ", rtf " +
                 fmt(bc.real_time_factor);
        return rate_ok && rate2_ok && o1_ok && quiesce_ok && latency_ok && same_before &&
               diverged;
    });

    // ---- 11. persistence ----
    criterion(11, "persistence", [&](std::string &detail) {
        namespace fs = std::filesystem;
        fs::path dir = fs::temp_directory_path() / "voila_acceptance";
        fs::create_directories(dir);
        std::string path = (dir / "p.ckpt").string();
        pipeline::save_pipeline(path, P);
        pipeline::Pipeline L = pipeline::load_pipeline(path);

        bool bits_ok = true;
        for (size_t i = 0; i < P.model.params.size(); ++i) {
            Eigen::MatrixXd f32 = P.model.params.value(int(i)).cast<float>().cast<double>();
            if ((L.model.params.value(int(i)) - f32).norm() != 0.0) bits_ok = false;
        }
        // a second save of the loaded state is byte-identical
        std::string path2 = (dir / "p2.ckpt").string();
        pipeline::save_pipeline(path2, L);
        std::ifstream fa(path, std::ios::binary), fb(path2, std::ios::binary);
        std::string ba((std::istreambuf_iterator<char>(fa)), {});
        std::string bb((std::istreambuf_iterator<char>(fb)), {});
        bool bytes_ok = !ba.empty() && ba == bb;

        // fault injection: corrupt the first tensor's payload
        size_t at = 10 + 4;  // magic + version
        uint64_t hlen;
        std::memcpy(&hlen, ba.data() + at, 8);
        at += 8 + hlen + 4;  // header + tensor count
        uint32_t nlen;
        std::memcpy(&nlen, ba.data() + at, 4);
        std::string victim = ba.substr(at + 4, nlen);
        size_t payload = at + 4 + nlen + 8;
        std::string corrupted = ba;
        corrupted[payload] = char(corrupted[payload] ^ 0x20);
        std::string path3 = (dir / "bad.ckpt").string();
        std::ofstream(path3, std::ios::binary).write(corrupted.data(), long(corrupted.size()));
        bool named_ok = false;
        try {
            pipeline::load_pipeline(path3);
        } catch (const InputError &e) {
            named_ok = std::string(e.what()).find(victim) != std::string::npos;
        }

        // CLI reproducibility under a fixed seed
        int e1 = 0, e2 = 0;
        std::string o1 = run_cli("bench invariants --seed 99", &e1);
        std::string o2 = run_cli("bench invariants --seed 99", &e2);
        bool cli_ok = e1 == 0 && e2 == 0 && !o1.empty() && o1 == o2;

        fs::remove_all(dir);
        detail = std::string("round-trip ") + (bits_ok && bytes_ok ? "ok" : "BAD") +
                 ", fault names '" + victim + "' " + (named_ok ? "ok" : "BAD") + ", cli " +
                 (cli_ok ? "reproducible" : "BAD");
        return bits_ok && bytes_ok && named_ok && cli_ok;
    });

    std::printf("%s: %d/11 criteria passed\n", g_failures ? "FAILURE" : "SUCCESS",
                11 - g_failures);
    return g_failures ? 1 : 0;
}
