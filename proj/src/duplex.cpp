#include "voila/duplex.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "voila/dsp.hpp"

namespace voila::duplex {

using nlohmann::json;

std::vector<align::Step> duplex_persona() {
    return {align::Step::special(vocab::kChatRefStart), align::Step::special(vocab::kChatRef),
            align::Step::special(vocab::kChatRefEnd), align::Step::special(vocab::kVoila)};
}

DuplexSession open_session(const model::Model &m, const codec::CodecState &cod,
                           const vocab::VocabSpec &v, const std::vector<align::Step> &persona,
                           int ref_index, const std::optional<Vec> &speaker) {
    DuplexSession s;
    s.m = &m;
    s.cod = &cod;
    s.v = &v;
    if (!persona.empty()) {
        Mat x = model::embed_steps(m, persona, ref_index, speaker ? &*speaker : nullptr);
        for (Eigen::Index t = 0; t < x.rows(); ++t) model::backbone_step(m, s.state, x.row(t));
        if (s.attention_window > 0) model::trim_context(s.state, s.attention_window);
    }
    s.initialized = true;
    return s;
}

RowVec fused_embedding(const model::Model &m, const vocab::VocabSpec &v,
                       const codec::FrameTokens &user, const codec::FrameTokens &agent_prev) {
    Mat eu = model::embed_steps(m, {align::Step::audio(v, user)}, -1, nullptr);
    Mat ea = model::embed_steps(m, {align::Step::audio(v, agent_prev)}, -1, nullptr);
    return 0.5 * (eu.row(0) + ea.row(0));
}

codec::FrameTokens duplex_step(DuplexSession &s, const codec::FrameTokens &user_frame) {
    if (!s.initialized) throw StateError("duplex_step: session not initialized");
    RowVec x = fused_embedding(*s.m, *s.v, user_frame, s.prev_agent);
    RowVec hidden = model::backbone_step(*s.m, s.state, x);
    if (s.attention_window > 0) model::trim_context(s.state, s.attention_window);
    codec::FrameTokens agent = model::depth_decode(*s.m, hidden, s.mode, s.rng);
    s.user_stream.push_back(user_frame);
    s.agent_stream.push_back(agent);
    s.prev_agent = agent;
    s.frame_clock++;
    return agent;
}

// ---- scripted scenarios ----

void DuplexScript::validate(const codec::CodecConfig &cfg) const {
    if (total_frames <= 0) throw InputError("script: total_frames must be positive");
    long prev_end = 0;
    for (const auto &e : events) {
        if (e.audio.sample_rate_hz != cfg.sample_rate_hz)
            throw InputError("script: event sample rate mismatch");
        long frames = long(e.audio.size()) / cfg.hop_samples;
        if (frames < 1) throw InputError("script: event shorter than one frame");
        if (e.start_frame < prev_end)
            throw InputError("script: events overlap or are unsorted");
        if (e.start_frame + frames > total_frames)
            throw InputError("script: event runs past total_frames");
        prev_end = e.start_frame + frames;
    }
}

ScriptResult run_script(DuplexSession &s, const DuplexScript &script) {
    if (!s.initialized) throw StateError("run_script: session not initialized");
    const codec::CodecConfig &ccfg = s.cod->cfg;
    script.validate(ccfg);
    long context_used = s.state.step_counter;
    if (s.attention_window <= 0 &&
        context_used + script.total_frames > s.m->cfg.max_context_steps)
        throw InputError("run_script: script longer than the model context");

    // assemble the user track: silence with events pasted in at their frames
    std::vector<double> user(size_t(script.total_frames) * size_t(ccfg.hop_samples), 0.0);
    for (const auto &e : script.events) {
        size_t at = size_t(e.start_frame) * size_t(ccfg.hop_samples);
        size_t n = std::min(e.audio.size(), user.size() - at);
        std::copy(e.audio.samples.begin(), e.audio.samples.begin() + long(n),
                  user.begin() + long(at));
    }

    dsp::MelFrontend fe(ccfg.mel_config());
    codec::EncodeStream enc(*s.cod);
    codec::DecodeStream dec(*s.cod);

    ScriptResult out;
    out.agent_audio.sample_rate_hz = ccfg.sample_rate_hz;
    double hop_ms = ccfg.hop_ms();
    for (long t = 0; t < script.total_frames; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        Eigen::RowVectorXd win = fe.windowed_frame(user.data(), user.size(), size_t(t));
        codec::FrameTokens uf = enc.push_windowed(win);
        codec::FrameTokens af = duplex_step(s, uf);
        Eigen::RowVectorXd hop = dec.push_frame(af);
        auto t1 = std::chrono::steady_clock::now();
        out.latency.compute_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        out.user_tokens.push_back(uf);
        out.agent_tokens.push_back(af);
        for (Eigen::Index i = 0; i < hop.size(); ++i) out.agent_audio.samples.push_back(hop(i));
    }

    for (const auto &e : script.events) {
        long end = e.start_frame + long(e.audio.size()) / ccfg.hop_samples;
        for (long t = end; t < script.total_frames; ++t)
            if (!out.agent_tokens[size_t(t)].is_silence()) {
                out.latency.response_onset_ms.push_back(double(t - end) * hop_ms);
                break;
            }
    }
    double mean = 0;
    for (double c : out.latency.compute_ms) mean += c;
    mean /= double(out.latency.compute_ms.size());
    out.latency.real_time_factor = mean / hop_ms;
    return out;
}

BudgetCheck latency_budget_check(const codec::CodecConfig &cfg, const LatencyReport &rep) {
    BudgetCheck b;
    double hop_ms = cfg.hop_ms();
    long lookahead_frames =
        (cfg.lookahead_samples() + cfg.hop_samples - 1) / cfg.hop_samples;
    b.algorithmic_ms = hop_ms * double(1 + lookahead_frames);
    b.margin_ms = kLatencyBudgetMs - b.algorithmic_ms;
    b.real_time_factor = rep.real_time_factor;
    b.pass = b.margin_ms >= 0.0 && b.real_time_factor < 1.0 &&
             std::isfinite(b.real_time_factor);
    return b;
}

// ---- script files ----

DuplexScript load_script(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw InputError("load_script: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw InputError(std::string("load_script: bad JSON: ") + e.what());
    }
    if (!j.contains("total_frames") || !j.contains("events"))
        throw InputError("load_script: missing total_frames or events");
    DuplexScript s;
    s.total_frames = j["total_frames"].get<long>();
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    for (const auto &je : j["events"]) {
        ScriptEvent e;
        e.start_frame = je["start_frame"].get<long>();
        std::filesystem::path wav = je["wav"].get<std::string>();
        if (wav.is_relative()) wav = base / wav;
        e.audio = read_wav(wav.string());
        s.events.push_back(std::move(e));
    }
    return s;
}

void save_script(const std::string &path, const DuplexScript &script,
                 const std::string &wav_dir) {
    json j;
    j["total_frames"] = script.total_frames;
    j["events"] = json::array();
    for (size_t i = 0; i < script.events.size(); ++i) {
        std::string name = "event_" + std::to_string(i) + ".wav";
        write_wav((std::filesystem::path(wav_dir) / name).string(), script.events[i].audio);
        json je;
        je["start_frame"] = script.events[i].start_frame;
        je["wav"] = (std::filesystem::path(wav_dir) / name).string();
        j["events"].push_back(je);
    }
    std::ofstream out(path);
    if (!out) throw InputError("save_script: cannot write " + path);
    out << j.dump(2) << "\n";
}

// ---- training data ----

namespace {

void place(std::vector<codec::FrameTokens> &track, long at,
           const std::vector<codec::FrameTokens> &frames) {
    if (at + long(frames.size()) > long(track.size()))
        track.resize(size_t(at + long(frames.size())));
    for (size_t i = 0; i < frames.size(); ++i) track[size_t(at) + i] = frames[i];
}

// utterance frames with the built-in lead/trail silence stripped
std::vector<codec::FrameTokens> speech_core(const synth::Synthesizer &synth,
                                            const codec::CodecState &cod,
                                            const std::vector<std::string> &words, int speaker) {
    const auto &sc = synth.config();
    auto frames = codec::encode_waveform(cod, synth.utter(words, speaker).audio);
    if (long(frames.size()) <= sc.lead_frames + sc.trail_frames)
        throw StateError("speech_core: utterance shorter than its silence padding");
    return {frames.begin() + sc.lead_frames, frames.end() - sc.trail_frames};
}

}  // namespace

DialogueTracks make_dialogue(const synth::Synthesizer &synth, const codec::CodecState &cod,
                             const std::vector<std::string> &user_words, int user_speaker,
                             int agent_speaker, bool barge_in, long lead_frames,
                             long tail_frames) {
    const std::vector<std::string> reply_words = {"hello", "there"};
    auto u1 = speech_core(synth, cod, user_words, user_speaker);
    auto reply = speech_core(synth, cod, reply_words, agent_speaker);

    const long lead = lead_frames, react = 1, tail = tail_frames;
    DialogueTracks d;
    place(d.user, lead, u1);
    long u1_end = lead + long(u1.size());
    long onset = u1_end + react;

    if (!barge_in) {
        place(d.agent, onset, reply);
        long total = onset + long(reply.size()) + tail;
        d.user.resize(size_t(total));
        d.agent.resize(size_t(total));
        return d;
    }

    // second user utterance lands inside the reply; the agent cuts off one
    // frame later and answers again once the interruption ends
    long barge_at = onset + 2;
    place(d.user, barge_at, u1);
    long cut = barge_at + react;
    std::vector<codec::FrameTokens> partial(reply.begin(),
                                            reply.begin() + std::min<long>(long(reply.size()),
                                                                           cut - onset));
    place(d.agent, onset, partial);
    long onset2 = barge_at + long(u1.size()) + react;
    place(d.agent, onset2, reply);
    long total = onset2 + long(reply.size()) + tail;
    d.user.resize(size_t(total));
    d.agent.resize(size_t(total));
    return d;
}

model::TrainSample dialogue_sample(const DialogueTracks &d, const vocab::VocabSpec &v,
                                   const model::ModelConfig &cfg,
                                   const std::vector<align::Step> &persona, int ref_index,
                                   const std::optional<Vec> &speaker) {
    if (d.user.size() != d.agent.size() || d.user.empty())
        throw InputError("dialogue_sample: tracks must be parallel and non-empty");
    model::TrainSample s;
    for (const auto &p : persona) {
        s.inputs.push_back(p);
        s.fused.push_back(std::nullopt);
        s.head_targets.push_back(0);
        s.depth_targets.push_back({});
        s.mask.push_back(0);
    }
    codec::FrameTokens prev{};  // silence before the first tick
    for (size_t t = 0; t < d.user.size(); ++t) {
        s.inputs.push_back(align::Step::audio(v, prev));
        s.fused.push_back(align::Step::audio(v, d.user[t]));
        s.head_targets.push_back(cfg.audio_step_slot());
        s.depth_targets.push_back(d.agent[t]);
        s.mask.push_back(1);
        prev = d.agent[t];
    }
    s.ref_index = ref_index;
    if (ref_index >= 0) s.speaker = speaker;
    s.validate(cfg);
    return s;
}

std::vector<model::TrainSample> make_duplex_samples(
    const synth::Synthesizer &synth, const codec::CodecState &cod, const vocab::VocabSpec &v,
    const model::ModelConfig &cfg, const std::vector<Vec> &speaker_embeddings, int n,
    double barge_in_prob, Rng rng) {
    if (speaker_embeddings.size() < size_t(synth.config().n_speakers))
        throw InputError("make_duplex_samples: missing speaker embeddings");
    const auto &lex = synth.lexicon();
    std::vector<model::TrainSample> out;
    for (int i = 0; i < n; ++i) {
        Rng sr = rng.fork("duplex", uint64_t(i));
        int us = int(sr.uniform_int(0, synth.config().n_speakers - 1));
        int as = int(sr.uniform_int(0, synth.config().n_speakers - 1));
        // some sessions are pure mutual silence so quiet never cues a reply
        if (sr.uniform() < 0.25) {
            DialogueTracks d;
            d.user.assign(size_t(16 + sr.uniform_int(0, 24)), {});
            d.agent.assign(d.user.size(), {});
            out.push_back(dialogue_sample(d, v, cfg, duplex_persona(), 1,
                                          speaker_embeddings[size_t(as)]));
            continue;
        }
        int n_words = 1 + int(sr.uniform_int(0, 1));
        std::vector<std::string> words;
        for (int w = 0; w < n_words; ++w)
            words.push_back(lex[size_t(sr.uniform_int(0, int64_t(lex.size()) - 1))]);
        bool barge = sr.uniform() < barge_in_prob;
        long lead = 2 + sr.uniform_int(0, 10);
        long tail = 3 + sr.uniform_int(0, 5);
        DialogueTracks d = make_dialogue(synth, cod, words, us, as, barge, lead, tail);
        out.push_back(dialogue_sample(d, v, cfg, duplex_persona(), 1,
                                      speaker_embeddings[size_t(as)]));
    }
    return out;
}

}  // namespace voila::duplex
