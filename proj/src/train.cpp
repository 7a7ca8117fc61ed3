#include "voila/train.hpp"

#include <algorithm>
#include <sstream>

namespace voila::train {

align::AlignedUtterance align_utterance(const synth::Utterance &u,
                                        const codec::CodecState &codec,
                                        const vocab::VocabSpec &v) {
    return align::make_aligned(u, codec::encode_waveform(codec, u.audio), v);
}

namespace {

struct Instruction {
    std::vector<std::string> input;
    std::vector<std::string> output;
};

Instruction make_instruction(const synth::Synthesizer &synth, Rng &rng) {
    const auto &lex = synth.lexicon();
    auto rand_word = [&] { return lex[size_t(rng.uniform_int(0, int64_t(lex.size()) - 1))]; };
    switch (rng.uniform_int(0, 2)) {
        case 0: {  // greeting
            const char *greet[] = {"hello", "hi", "hey"};
            return {{greet[rng.uniform_int(0, 2)]}, {greet[rng.uniform_int(0, 2)], "there"}};
        }
        case 1: {  // echo
            std::string w = rand_word();
            const char *verb[] = {"say", "echo"};
            return {{verb[rng.uniform_int(0, 1)], w}, {w}};
        }
        default: {  // word count
            int n = 1 + int(rng.uniform_int(0, 2));
            Instruction ins;
            ins.input.push_back("count");
            for (int i = 0; i < n; ++i) ins.input.push_back(rand_word());
            const char *nums[] = {"one", "two", "three"};
            ins.output.push_back(nums[n - 1]);
            return ins;
        }
    }
}

std::vector<int> to_ids(const std::vector<std::string> &words, const vocab::VocabSpec &v) {
    std::vector<int> ids;
    for (const auto &w : words) ids.push_back(v.text_id(w));
    return ids;
}

}  // namespace

std::vector<TaskSample> make_task_samples(const std::vector<synth::Utterance> &corpus,
                                          const codec::CodecState &codec,
                                          const vocab::VocabSpec &v,
                                          const synth::Synthesizer &synth, const TaskMix &mix,
                                          int n_samples, Rng rng) {
    if (corpus.empty()) throw InputError("make_task_samples: empty corpus");
    double total_w = mix.asr + mix.tts + mix.instruct;
    if (total_w <= 0.0 || mix.asr < 0 || mix.tts < 0 || mix.instruct < 0)
        throw ConfigError("make_task_samples: task mix has no positive weight");

    std::vector<TaskSample> out;
    // round-robin per task so the whole corpus is covered before any
    // utterance repeats; the corpus order is already a random shuffle
    size_t asr_next = 0, tts_next = 0;
    for (int i = 0; i < n_samples; ++i) {
        Rng sr = rng.fork("task", uint64_t(i));
        double pick = sr.uniform() * total_w;
        size_t &cursor = pick < mix.asr ? asr_next : tts_next;
        const synth::Utterance &u = corpus[cursor++ % corpus.size()];

        TaskSample ts;
        align::ChatSample cs;
        if (pick < mix.asr) {
            cs.task = align::TaskKind::Asr;
            cs.input_audio = codec::encode_waveform(codec, u.audio);
            // some samples hear codec-reconstructed audio so transcription
            // also holds up on synthesized speech (the TTS round trip)
            if (sr.uniform() < 0.4)
                cs.input_audio = codec::encode_waveform(
                    codec, codec::decode_tokens(codec, cs.input_audio));
            cs.output_text = to_ids(u.words, v);
            ts.seq = align::render_chat(cs, v);
        } else if (pick < mix.asr + mix.tts) {
            cs.task = align::TaskKind::Tts;
            cs.input_text = to_ids(u.words, v);
            cs.output_aligned = align_utterance(u, codec, v);
            ts.seq = align::render_chat(cs, v);
            align::inject_voice_ref(ts.seq, align::TaskKind::Tts);
            ts.speaker_id = u.speaker_id;
        } else {
            Instruction ins = make_instruction(synth, sr);
            int spk = int(sr.uniform_int(0, synth.config().n_speakers - 1));
            align::TaskKind fmt[] = {align::TaskKind::Tito, align::TaskKind::Tiao,
                                     align::TaskKind::Aito, align::TaskKind::Aiao};
            cs.task = fmt[sr.uniform_int(0, 3)];
            bool audio_in = cs.task == align::TaskKind::Aito || cs.task == align::TaskKind::Aiao;
            bool audio_out = cs.task == align::TaskKind::Tiao || cs.task == align::TaskKind::Aiao;
            if (audio_in)
                cs.input_audio =
                    codec::encode_waveform(codec, synth.utter(ins.input, spk).audio);
            else
                cs.input_text = to_ids(ins.input, v);
            if (audio_out)
                cs.output_aligned = align_utterance(synth.utter(ins.output, spk), codec, v);
            else
                cs.output_text = to_ids(ins.output, v);
            ts.seq = align::render_chat(cs, v);
            if (audio_out) {
                align::inject_voice_ref(ts.seq, cs.task);
                ts.speaker_id = spk;
            }
        }
        out.push_back(std::move(ts));
    }
    return out;
}

model::TrainSample to_train_sample(const align::InterleavedSequence &seq,
                                   const vocab::VocabSpec &v, const model::ModelConfig &cfg,
                                   const Vec *speaker) {
    if (seq.steps.size() < 2) throw InputError("to_train_sample: sequence too short");
    model::TrainSample s;
    s.inputs = seq.steps;
    size_t T = s.inputs.size();
    s.head_targets.assign(T, 0);
    s.depth_targets.assign(T, codec::FrameTokens{});
    s.mask.assign(T, 0);
    for (size_t t = 0; t + 1 < T; ++t) {
        if (!seq.loss_mask[t + 1]) continue;
        s.mask[t] = 1;
        s.head_targets[t] = model::head_target(cfg, s.inputs[t + 1]);
        if (s.inputs[t + 1].kind == align::StepKind::Audio)
            s.depth_targets[t] = s.inputs[t + 1].frame(v);
    }
    s.ref_index = seq.ref_index;
    if (seq.ref_index >= 0) {
        if (!speaker) throw InputError("to_train_sample: ref sequence needs a speaker embedding");
        s.speaker = *speaker;
    }
    return s;
}

std::vector<model::TrainSample> make_batch(const std::vector<TaskSample> &samples,
                                           const vocab::VocabSpec &v,
                                           const model::ModelConfig &cfg,
                                           const std::vector<Vec> &speaker_embeddings) {
    if (samples.empty()) throw InputError("make_batch: empty batch");
    std::vector<model::TrainSample> out;
    size_t longest = 0;
    for (const auto &ts : samples) {
        const Vec *spk = nullptr;
        if (ts.speaker_id >= 0) {
            if (ts.speaker_id >= int(speaker_embeddings.size()))
                throw InputError("make_batch: missing speaker embedding");
            spk = &speaker_embeddings[size_t(ts.speaker_id)];
        }
        out.push_back(to_train_sample(ts.seq, v, cfg, spk));
        longest = std::max(longest, out.back().inputs.size());
    }
    for (auto &s : out)
        while (s.inputs.size() < longest) {
            s.inputs.push_back(align::Step::special(vocab::kPad));
            s.head_targets.push_back(0);
            s.depth_targets.push_back(codec::FrameTokens{});
            s.mask.push_back(0);
        }
    return out;
}

LossReport train_step(model::Model &m, const std::vector<model::TrainSample> &batch,
                      nn::AdamW &opt, double lr) {
    nn::Grads grads(m.params);
    LossReport rep = model_loss(m, batch, &grads);
    opt.step(m.params, grads, lr);
    return rep;
}

double evaluate_wer(const std::vector<std::string> &hypotheses,
                    const std::vector<std::string> &references) {
    if (hypotheses.size() != references.size())
        throw InputError("evaluate_wer: list length mismatch");
    auto split = [](const std::string &s) {
        std::vector<std::string> words;
        std::istringstream in(s);
        std::string w;
        while (in >> w) words.push_back(vocab::case_fold(w));
        return words;
    };
    long edits = 0, total = 0;
    for (size_t i = 0; i < references.size(); ++i) {
        std::vector<std::string> r = split(references[i]), h = split(hypotheses[i]);
        total += long(r.size());
        // word-level Levenshtein distance
        std::vector<long> prev(h.size() + 1, 0), cur(h.size() + 1, 0);
        for (size_t j = 0; j <= h.size(); ++j) prev[j] = long(j);
        for (size_t a = 1; a <= r.size(); ++a) {
            cur[0] = long(a);
            for (size_t b = 1; b <= h.size(); ++b) {
                long sub = prev[b - 1] + (r[a - 1] == h[b - 1] ? 0 : 1);
                cur[b] = std::min({prev[b] + 1, cur[b - 1] + 1, sub});
            }
            std::swap(prev, cur);
        }
        edits += prev[h.size()];
    }
    if (total == 0) throw InputError("evaluate_wer: no reference words");
    return double(edits) / double(total);
}

}  // namespace voila::train
