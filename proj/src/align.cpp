#include "voila/align.hpp"

#include <json.hpp>

namespace voila::align {

using nlohmann::json;

const char *task_name(TaskKind t) {
    switch (t) {
        case TaskKind::Asr: return "ASR";
        case TaskKind::Tts: return "TTS";
        case TaskKind::Tito: return "TITO";
        case TaskKind::Tiao: return "TIAO";
        case TaskKind::Aito: return "AITO";
        case TaskKind::Aiao: return "AIAO";
        case TaskKind::Duplex: return "DUPLEX";
    }
    throw InputError("task_name: bad task");
}

TaskKind task_from_name(const std::string &name) {
    for (TaskKind t : {TaskKind::Asr, TaskKind::Tts, TaskKind::Tito, TaskKind::Tiao,
                       TaskKind::Aito, TaskKind::Aiao, TaskKind::Duplex})
        if (name == task_name(t)) return t;
    throw InputError("task_from_name: unknown task " + name);
}

Step Step::text(int token_id) {
    Step s;
    s.kind = StepKind::Text;
    s.lanes = {token_id, token_id, token_id, token_id};
    return s;
}

Step Step::special(int token_id) {
    Step s;
    s.kind = StepKind::Special;
    s.lanes = {token_id, token_id, token_id, token_id};
    return s;
}

Step Step::audio(const vocab::VocabSpec &v, const codec::FrameTokens &f) {
    Step s;
    s.kind = StepKind::Audio;
    for (int q = 0; q < 4; ++q) s.lanes[size_t(q)] = v.audio_token_id(q + 1, f.idx[size_t(q)]);
    return s;
}

int Step::token() const {
    if (kind == StepKind::Audio) throw InputError("Step::token on an audio step");
    return lanes[0];
}

codec::FrameTokens Step::frame(const vocab::VocabSpec &v) const {
    if (kind != StepKind::Audio) throw InputError("Step::frame on a non-audio step");
    codec::FrameTokens f;
    for (int q = 0; q < 4; ++q) {
        vocab::Classified c = v.classify(lanes[size_t(q)]);
        if (c.kind != vocab::TokenKind::Audio || c.level != q + 1)
            throw InputError("Step::frame: lane carries a wrong-level token");
        f.idx[size_t(q)] = uint16_t(c.index);
    }
    return f;
}

void validate_step(const Step &s, const vocab::VocabSpec &v) {
    if (s.kind == StepKind::Audio) {
        (void)s.frame(v);
        return;
    }
    if (s.lanes[0] != s.lanes[1] || s.lanes[0] != s.lanes[2] || s.lanes[0] != s.lanes[3])
        throw InputError("validate_step: text/special lanes differ");
    vocab::Classified c = v.classify(s.lanes[0]);
    if (s.kind == StepKind::Text && c.kind != vocab::TokenKind::Text)
        throw InputError("validate_step: text step carries a non-text id");
    if (s.kind == StepKind::Special && c.kind != vocab::TokenKind::Special)
        throw InputError("validate_step: special step carries a non-special id");
}

void AlignedUtterance::validate() const {
    if (words.empty()) throw InputError("aligned utterance: no words");
    int expect = 0;
    for (const auto &w : words) {
        if (w.frame_begin != expect || w.frame_end <= w.frame_begin)
            throw InputError("aligned utterance: spans must be non-empty and tile the frames");
        expect = w.frame_end;
    }
    if (expect != int(frames.size()))
        throw InputError("aligned utterance: spans do not cover every frame");
}

AlignedUtterance make_aligned(const synth::Utterance &u,
                              std::vector<codec::FrameTokens> frames,
                              const vocab::VocabSpec &v) {
    if (frames.size() != u.frame_phones.size())
        throw InputError("make_aligned: frame count mismatch");
    AlignedUtterance a;
    a.frames = std::move(frames);
    a.speaker_id = u.speaker_id;
    for (size_t i = 0; i < u.spans.size(); ++i) {
        AlignedUtterance::WordSpan w;
        w.word = u.spans[i].word;
        if (!v.in_lexicon(w.word)) throw InputError("make_aligned: word outside the lexicon");
        w.frame_begin = i == 0 ? 0 : a.words.back().frame_end;
        w.frame_end = i + 1 == u.spans.size() ? int(a.frames.size()) : u.spans[i].frame_end;
        a.words.push_back(w);
    }
    a.validate();
    return a;
}

std::vector<Step> build_interleaved(const AlignedUtterance &u, const vocab::VocabSpec &v) {
    u.validate();
    std::vector<Step> steps;
    for (const auto &w : u.words) {
        steps.push_back(Step::text(v.text_id(w.word)));
        for (int t = w.frame_begin; t < w.frame_end; ++t)
            steps.push_back(Step::audio(v, u.frames[size_t(t)]));
    }
    return steps;
}

AlignedUtterance deinterleave(const std::vector<Step> &steps, const vocab::VocabSpec &v,
                              int speaker_id) {
    AlignedUtterance u;
    u.speaker_id = speaker_id;
    for (const Step &s : steps) {
        if (s.kind == StepKind::Text) {
            AlignedUtterance::WordSpan w;
            w.word = v.classify(s.token()).word;
            w.frame_begin = int(u.frames.size());
            w.frame_end = w.frame_begin;
            u.words.push_back(w);
        } else if (s.kind == StepKind::Audio) {
            if (u.words.empty()) throw InputError("deinterleave: audio step before any word");
            u.frames.push_back(s.frame(v));
            u.words.back().frame_end = int(u.frames.size());
        } else {
            throw InputError("deinterleave: unexpected special step");
        }
    }
    u.validate();
    return u;
}

InterleavedSequence render_chat(const ChatSample &sample, const vocab::VocabSpec &v) {
    bool audio_in = sample.task == TaskKind::Asr || sample.task == TaskKind::Aito ||
                    sample.task == TaskKind::Aiao;
    bool audio_out = sample.task == TaskKind::Tts || sample.task == TaskKind::Tiao ||
                     sample.task == TaskKind::Aiao;
    if (sample.task == TaskKind::Duplex)
        throw InputError("render_chat: duplex sequences are built elsewhere");
    if (audio_in && sample.input_audio.empty())
        throw InputError("render_chat: task needs audio input");
    if (!audio_in && sample.input_text.empty())
        throw InputError("render_chat: task needs text input");
    if (audio_out && !sample.output_aligned)
        throw InputError("render_chat: task needs an aligned audio output");
    if (!audio_out && sample.output_text.empty())
        throw InputError("render_chat: task needs text output");

    InterleavedSequence seq;
    seq.task = sample.task;
    seq.steps.push_back(Step::special(vocab::kHuman));
    if (audio_in)
        for (const auto &f : sample.input_audio) seq.steps.push_back(Step::audio(v, f));
    else
        for (int id : sample.input_text) seq.steps.push_back(Step::text(id));
    seq.steps.push_back(Step::special(vocab::kVoila));
    size_t voila_at = seq.steps.size() - 1;
    if (audio_out)
        for (Step &s : build_interleaved(*sample.output_aligned, v))
            seq.steps.push_back(std::move(s));
    else
        for (int id : sample.output_text) seq.steps.push_back(Step::text(id));
    seq.steps.push_back(Step::special(vocab::kEos));

    // response-only loss: strictly after <voila> through <eos> inclusive
    seq.loss_mask.assign(seq.steps.size(), 0);
    for (size_t i = voila_at + 1; i < seq.steps.size(); ++i) seq.loss_mask[i] = 1;
    return seq;
}

void inject_voice_ref(InterleavedSequence &seq, TaskKind ref_kind) {
    if (seq.ref_index >= 0) throw InputError("inject_voice_ref: already injected");
    bool chat = !(ref_kind == TaskKind::Tts || ref_kind == TaskKind::Asr);
    int start = chat ? vocab::kChatRefStart : vocab::kTtsRefStart;
    int mid = chat ? vocab::kChatRef : vocab::kTtsRef;
    int end = chat ? vocab::kChatRefEnd : vocab::kTtsRefEnd;
    std::vector<Step> steps{Step::special(start), Step::special(mid), Step::special(end)};
    seq.steps.insert(seq.steps.begin(), steps.begin(), steps.end());
    seq.loss_mask.insert(seq.loss_mask.begin(), 3, 0);
    seq.ref_index = 1;
}

void strip_voice_ref(InterleavedSequence &seq) {
    if (seq.ref_index < 0) throw InputError("strip_voice_ref: no ref triplet present");
    seq.steps.erase(seq.steps.begin(), seq.steps.begin() + 3);
    seq.loss_mask.erase(seq.loss_mask.begin(), seq.loss_mask.begin() + 3);
    seq.ref_index = -1;
}

std::string to_jsonl(const InterleavedSequence &seq) {
    json rec;
    rec["task"] = task_name(seq.task);
    rec["ref_index"] = seq.ref_index;
    json steps = json::array();
    for (size_t i = 0; i < seq.steps.size(); ++i) {
        const Step &s = seq.steps[i];
        json js;
        js["k"] = s.kind == StepKind::Text ? "t" : s.kind == StepKind::Audio ? "a" : "s";
        js["l"] = s.lanes;
        js["m"] = int(seq.loss_mask[i]);
        steps.push_back(std::move(js));
    }
    rec["steps"] = std::move(steps);
    return rec.dump();
}

InterleavedSequence from_jsonl(const std::string &line) {
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw IoError("from_jsonl: malformed record");
    InterleavedSequence seq;
    try {
        seq.task = task_from_name(rec.at("task").get<std::string>());
        seq.ref_index = rec.at("ref_index").get<int>();
        for (const json &js : rec.at("steps")) {
            Step s;
            std::string k = js.at("k").get<std::string>();
            s.kind = k == "t"   ? StepKind::Text
                     : k == "a" ? StepKind::Audio
                     : k == "s" ? StepKind::Special
                                : throw IoError("from_jsonl: bad step kind");
            auto lanes = js.at("l").get<std::vector<int>>();
            if (lanes.size() != 4) throw IoError("from_jsonl: bad lane count");
            for (int q = 0; q < 4; ++q) s.lanes[size_t(q)] = lanes[size_t(q)];
            seq.steps.push_back(s);
            seq.loss_mask.push_back(char(js.at("m").get<int>()));
        }
    } catch (const json::exception &e) {
        throw IoError(std::string("from_jsonl: ") + e.what());
    }
    return seq;
}

}  // namespace voila::align
