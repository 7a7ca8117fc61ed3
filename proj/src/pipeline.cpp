#include "voila/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace voila::pipeline {

using nlohmann::json;

StageParams StageParams::from_config(const Config &c) {
    StageParams s;
    s.corpus_train = int(c.get_int("corpus.train_utterances", s.corpus_train));
    s.corpus_heldout = int(c.get_int("corpus.heldout_utterances", s.corpus_heldout));
    s.max_words = int(c.get_int("corpus.max_words", s.max_words));
    s.codec_steps = int(c.get_int("codec.train_steps", s.codec_steps));
    s.codec_batch = int(c.get_int("codec.batch_size", s.codec_batch));
    s.codec_lr = c.get_real("codec.lr", s.codec_lr);
    s.codec_warmup = c.get_int("codec.warmup_steps", s.codec_warmup);
    s.enroll_utterances = int(c.get_int("speaker.enroll_utterances", s.enroll_utterances));
    s.task_samples = int(c.get_int("train.task_samples", s.task_samples));
    s.duplex_samples = int(c.get_int("train.duplex_samples", s.duplex_samples));
    s.barge_in_prob = c.get_real("train.barge_in_prob", s.barge_in_prob);
    s.mix_asr = c.get_real("train.mix_asr", s.mix_asr);
    s.mix_tts = c.get_real("train.mix_tts", s.mix_tts);
    s.mix_instruct = c.get_real("train.mix_instruct", s.mix_instruct);
    s.model_steps = int(c.get_int("train.model_steps", s.model_steps));
    s.model_batch = int(c.get_int("train.batch_size", s.model_batch));
    s.model_lr = c.get_real("train.lr", s.model_lr);
    s.model_warmup = c.get_int("train.warmup_steps", s.model_warmup);
    return s;
}

namespace {

speaker::SpeakerConfig speaker_config(const Config &c, const synth::SynthConfig &syn,
                                      const model::ModelConfig &m) {
    speaker::SpeakerConfig s;
    s.n_speakers = syn.n_speakers;
    s.d_spk = m.d_spk;
    s.d_hidden = int(c.get_int("speaker.d_hidden", s.d_hidden));
    s.train_steps = int(c.get_int("speaker.train_steps", s.train_steps));
    s.lr = c.get_real("speaker.lr", s.lr);
    return s;
}

}  // namespace

Pipeline::Pipeline(const Config &c, uint64_t seed_in)
    : raw(c),
      stages(StageParams::from_config(c)),
      seed(seed_in),
      synth(synth::SynthConfig::from_config(c), seed_in ^ fnv1a64("synth")),
      vocab(vocab::VocabSpec::build(synth.lexicon(),
                                    int(c.get_int("codec.codebook_size", 256)))),
      codec(codec::CodecState::init(codec::CodecConfig::from_config(c),
                                    Rng(seed_in).fork("codec-init"))),
      spk(speaker::SpeakerModel::init(
          speaker_config(c, synth.config(), model::ModelConfig::from_config(c, vocab)),
          Rng(seed_in).fork("speaker-init"))),
      mcfg(model::ModelConfig::from_config(c, vocab)),
      model(model::Model::init(mcfg, Rng(seed_in).fork("model-init"))) {
    Rng root(seed);
    train_set = synth.sample_utterances(stages.corpus_train, stages.max_words,
                                        root.fork("corpus-train"));
    heldout = synth.sample_utterances(stages.corpus_heldout, stages.max_words,
                                      root.fork("corpus-heldout"));
}

Pipeline make_pipeline(const Config &c, uint64_t seed) { return Pipeline(c, seed); }

void train_codec_stage(Pipeline &p, std::ostream *log) {
    Rng root(p.seed);
    Rng rng = root.fork("codec-train");
    nn::AdamW opt(p.codec.params);
    p.codec.trained = true;  // forward paths are exercised during training
    if (log) *log << "step,lr,total,recon,commit,distill,anchor\n";
    for (int step = 0; step < p.stages.codec_steps; ++step) {
        std::vector<codec::CodecBatchItem> batch;
        for (int b = 0; b < p.stages.codec_batch; ++b) {
            const synth::Utterance &u =
                p.train_set[size_t(rng.uniform_int(0, int64_t(p.train_set.size()) - 1))];
            batch.push_back(codec::make_codec_item(p.codec, u.audio, u.frame_phones));
        }
        double lr = nn::lr_schedule(step, p.stages.codec_warmup, p.stages.codec_steps,
                                    p.stages.codec_lr);
        codec::CodecLossReport rep = codec::train_codec_step(p.codec, batch, opt, lr, rng);
        if (log)
            *log << step << "," << lr << "," << rep.total << "," << rep.recon << ","
                 << rep.commit << "," << rep.distill << "," << rep.anchor << "\n";
    }
}

double level1_phone_purity(const Pipeline &p, const std::vector<synth::Utterance> &utts) {
    std::map<int, std::map<int, long>> counts;  // token -> phone -> frames
    long total = 0;
    for (const auto &u : utts) {
        auto frames = codec::encode_waveform(p.codec, u.audio);
        size_t n = std::min(frames.size(), u.frame_phones.size());
        for (size_t t = 0; t < n; ++t) {
            counts[frames[t].idx[0]][u.frame_phones[t]]++;
            total++;
        }
    }
    if (total == 0) throw InputError("phone purity: no frames");
    long pure = 0;
    for (const auto &[tok, phones] : counts) {
        long best = 0;
        for (const auto &[ph, c] : phones) best = std::max(best, c);
        pure += best;
    }
    return double(pure) / double(total);
}

void train_speaker_stage(Pipeline &p) {
    Rng root(p.seed);
    speaker::SpeakerTrainReport rep;
    p.spk = speaker::train_speaker(p.train_set, p.spk.cfg, p.seed ^ fnv1a64("speaker-train"),
                                   &rep);
    p.voices.clear();
    Rng er = root.fork("enroll");
    const auto &lex = p.synth.lexicon();
    for (int s = 0; s < p.synth.config().n_speakers; ++s) {
        Vec acc = Vec::Zero(p.spk.cfg.d_spk);
        for (int k = 0; k < p.stages.enroll_utterances; ++k) {
            std::vector<std::string> words;
            int n = 1 + int(er.uniform_int(0, 1));
            for (int w = 0; w < n; ++w)
                words.push_back(lex[size_t(er.uniform_int(0, int64_t(lex.size()) - 1))]);
            acc += speaker::extract(p.spk, p.synth.utter(words, s).audio);
        }
        p.voices.push_back(acc.normalized());
    }
}

void train_model_stage(Pipeline &p, std::ostream *log) {
    if (!p.codec.trained) throw StateError("train_model_stage: codec not trained");
    if (p.voices.empty()) throw StateError("train_model_stage: no enrolled voices");
    Rng root(p.seed);
    train::TaskMix mix{p.stages.mix_asr, p.stages.mix_tts, p.stages.mix_instruct};
    auto tasks = train::make_task_samples(p.train_set, p.codec, p.vocab, p.synth, mix,
                                          p.stages.task_samples, root.fork("tasks"));
    std::vector<model::TrainSample> data =
        train::make_batch(tasks, p.vocab, p.mcfg, p.voices);
    auto dup = duplex::make_duplex_samples(p.synth, p.codec, p.vocab, p.mcfg, p.voices,
                                           p.stages.duplex_samples, p.stages.barge_in_prob,
                                           root.fork("duplex-data"));
    data.insert(data.end(), dup.begin(), dup.end());

    Rng rng = root.fork("model-train");
    nn::AdamW opt(p.model.params);
    if (log) *log << "step,lr,total,head,depth,head_accuracy\n";
    for (int step = 0; step < p.stages.model_steps; ++step) {
        std::vector<model::TrainSample> batch;
        for (int b = 0; b < p.stages.model_batch; ++b)
            batch.push_back(data[size_t(rng.uniform_int(0, int64_t(data.size()) - 1))]);
        double lr = nn::lr_schedule(step, p.stages.model_warmup, p.stages.model_steps,
                                    p.stages.model_lr);
        train::LossReport rep = train::train_step(p.model, batch, opt, lr);
        if (log)
            *log << step << "," << lr << "," << rep.total << "," << rep.head << ","
                 << rep.depth << "," << rep.head_accuracy << "\n";
    }
    p.model.trained = true;
}

std::string infer_asr(const Pipeline &p, const Waveform &w) {
    auto frames = codec::encode_waveform(p.codec, w);
    align::InterleavedSequence prompt;
    prompt.task = align::TaskKind::Asr;
    prompt.steps.push_back(align::Step::special(vocab::kHuman));
    for (const auto &f : frames) prompt.steps.push_back(align::Step::audio(p.vocab, f));
    prompt.steps.push_back(align::Step::special(vocab::kVoila));
    prompt.loss_mask.assign(prompt.steps.size(), 0);

    Rng rng = Rng(p.seed).fork("infer-asr");
    model::GenerateLimits lim;
    lim.max_steps = p.stages.max_words * 2 + 8;
    auto res = model::generate(p.model, p.vocab, prompt, std::nullopt, lim,
                               model::SampleMode::Greedy, rng);
    std::vector<int> ids;
    for (const auto &s : res.response.steps)
        if (s.kind == align::StepKind::Text) ids.push_back(s.token());
    return p.vocab.detokenize(ids);
}

Waveform infer_tts(const Pipeline &p, const std::string &text, int speaker_id,
                   std::vector<codec::FrameTokens> *tokens) {
    if (speaker_id < 0 || speaker_id >= int(p.voices.size()))
        throw InputError("infer_tts: no enrolled voice for speaker");
    align::InterleavedSequence prompt;
    prompt.task = align::TaskKind::Tts;
    prompt.steps.push_back(align::Step::special(vocab::kHuman));
    for (int id : p.vocab.tokenize_text(text))
        prompt.steps.push_back(align::Step::text(id));
    prompt.steps.push_back(align::Step::special(vocab::kVoila));
    prompt.loss_mask.assign(prompt.steps.size(), 0);
    align::inject_voice_ref(prompt, align::TaskKind::Tts);

    Rng rng = Rng(p.seed).fork("infer-tts");
    model::GenerateLimits lim;
    lim.max_steps = 120;
    auto res = model::generate(p.model, p.vocab, prompt, p.voices[size_t(speaker_id)], lim,
                               model::SampleMode::Greedy, rng);
    std::vector<codec::FrameTokens> frames;
    for (const auto &s : res.response.steps)
        if (s.kind == align::StepKind::Audio) frames.push_back(s.frame(p.vocab));
    if (tokens) *tokens = frames;
    if (frames.empty()) {
        Waveform w;
        w.sample_rate_hz = p.codec.cfg.sample_rate_hz;
        return w;
    }
    return codec::decode_tokens(p.codec, frames);
}

model::GenerateResult infer_chat(const Pipeline &p, const std::string &text, int speaker_id) {
    if (speaker_id < 0 || speaker_id >= int(p.voices.size()))
        throw InputError("infer_chat: no enrolled voice for speaker");
    align::InterleavedSequence prompt;
    prompt.task = align::TaskKind::Tiao;
    prompt.steps.push_back(align::Step::special(vocab::kHuman));
    for (int id : p.vocab.tokenize_text(text))
        prompt.steps.push_back(align::Step::text(id));
    prompt.steps.push_back(align::Step::special(vocab::kVoila));
    prompt.loss_mask.assign(prompt.steps.size(), 0);
    align::inject_voice_ref(prompt, align::TaskKind::Tiao);

    Rng rng = Rng(p.seed).fork("infer-chat");
    model::GenerateLimits lim;
    lim.max_steps = 120;
    return model::generate(p.model, p.vocab, prompt, p.voices[size_t(speaker_id)], lim,
                           model::SampleMode::Greedy, rng);
}

double eval_asr_wer(const Pipeline &p, const std::vector<synth::Utterance> &utts) {
    std::vector<std::string> hyp, ref;
    for (const auto &u : utts) {
        hyp.push_back(infer_asr(p, u.audio));
        std::string r;
        for (const auto &w : u.words) r += (r.empty() ? "" : " ") + w;
        ref.push_back(r);
    }
    return train::evaluate_wer(hyp, ref);
}

double eval_tts_wer(const Pipeline &p, const std::vector<synth::Utterance> &utts) {
    std::vector<std::string> hyp, ref;
    for (const auto &u : utts) {
        std::string text;
        for (const auto &w : u.words) text += (text.empty() ? "" : " ") + w;
        Waveform synthesized = infer_tts(p, text, u.speaker_id);
        hyp.push_back(synthesized.size() == 0 ? "" : infer_asr(p, synthesized));
        ref.push_back(text);
    }
    return train::evaluate_wer(hyp, ref);
}

void save_pipeline(const std::string &path, const Pipeline &p) {
    ckpt::CheckpointContainer c;
    json header;
    header["configs"] = p.raw.entries();
    header["seed"] = p.seed;
    header["vocab_manifest"] = p.vocab.manifest();
    header["vocab_hash"] = p.vocab.manifest_hash();
    header["codec_trained"] = p.codec.trained;
    header["speaker_trained"] = p.spk.trained;
    header["model_trained"] = p.model.trained;
    header["format"] = "voila-pipeline";
    c.header_json = header.dump();

    ckpt::pack_params(c, "codec/", p.codec.params);
    ckpt::pack_params(c, "speaker/", p.spk.params);
    ckpt::pack_params(c, "model/", p.model.params);
    if (!p.voices.empty()) {
        Eigen::MatrixXd voices(p.voices.size(), p.voices[0].size());
        for (size_t i = 0; i < p.voices.size(); ++i) voices.row(Eigen::Index(i)) = p.voices[i];
        c.add("voices", voices);
    }
    ckpt::save_checkpoint(path, c);
}

Pipeline load_pipeline(const std::string &path) {
    ckpt::CheckpointContainer c = ckpt::load_checkpoint(path);
    json header;
    try {
        header = json::parse(c.header_json);
    } catch (const json::exception &e) {
        throw InputError(std::string("load_pipeline: bad header: ") + e.what());
    }
    Config cfg;
    for (const auto &[k, v] : header.at("configs").items())
        cfg.set(k, v.get<std::string>());
    Pipeline p(cfg, header.at("seed").get<uint64_t>());

    if (p.vocab.manifest_hash() != header.at("vocab_hash").get<uint64_t>())
        throw InputError("load_pipeline: vocabulary hash mismatch");

    ckpt::unpack_params(c, "codec/", p.codec.params);
    ckpt::unpack_params(c, "speaker/", p.spk.params);
    ckpt::unpack_params(c, "model/", p.model.params);
    p.codec.trained = header.value("codec_trained", false);
    p.spk.trained = header.value("speaker_trained", false);
    p.model.trained = header.value("model_trained", false);
    if (c.has("voices")) {
        const Eigen::MatrixXd &voices = c.get("voices");
        p.voices.clear();
        for (Eigen::Index i = 0; i < voices.rows(); ++i)
            p.voices.push_back(voices.row(i).transpose());
    }
    return p;
}

}  // namespace voila::pipeline
