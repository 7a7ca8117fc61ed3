#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "voila/pipeline.hpp"

using namespace voila;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    uint64_t seed = 1234;

    Config load() const {
        return config_path.empty() ? Config() : Config::parse_file(config_path);
    }
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config_path, "config file (section.key = value)");
    cmd->add_option("--seed", c.seed, "root seed for all randomness");
}

pipeline::Pipeline load_or_fresh(const Common &c, const std::string &ckpt) {
    if (fs::exists(ckpt)) return pipeline::load_pipeline(ckpt);
    return pipeline::make_pipeline(c.load(), c.seed);
}

pipeline::Pipeline load_required(const std::string &ckpt) {
    if (!fs::exists(ckpt)) throw InputError("checkpoint not found: " + ckpt);
    return pipeline::load_pipeline(ckpt);
}

std::ofstream open_log(const std::string &path) {
    if (path.empty()) return std::ofstream();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write log file " + path);
    return out;
}

std::string join_words(const std::vector<std::string> &w) {
    std::string s;
    for (const auto &x : w) s += (s.empty() ? "" : " ") + x;
    return s;
}

json latency_json(const codec::CodecConfig &ccfg, const duplex::LatencyReport &rep) {
    duplex::BudgetCheck b = duplex::latency_budget_check(ccfg, rep);
    json j;
    j["frames"] = rep.compute_ms.size();
    j["real_time_factor"] = b.real_time_factor;
    j["algorithmic_latency_ms"] = b.algorithmic_ms;
    j["budget_ms"] = duplex::kLatencyBudgetMs;
    j["margin_ms"] = b.margin_ms;
    j["pass"] = b.pass;
    j["response_onset_ms"] = rep.response_onset_ms;
    return j;
}

int run(int argc, char **argv) {
    CLI::App app{"voila: desk-scale voice-language pipeline"};
    app.require_subcommand(1);
    Common c;

    // corpus synth
    auto *corpus = app.add_subcommand("corpus", "synthetic speech corpus");
    corpus->require_subcommand(1);
    std::string corpus_out;
    int corpus_n = -1;
    auto *corpus_synth = corpus->add_subcommand("synth", "render corpus WAVs + metadata");
    add_common(corpus_synth, c);
    corpus_synth->add_option("--out", corpus_out, "output directory")->required();
    corpus_synth->add_option("--n", corpus_n, "utterance count (default from config)");

    // codec train|encode|decode
    auto *codec_cmd = app.add_subcommand("codec", "audio tokenizer");
    codec_cmd->require_subcommand(1);
    std::string ckpt, in_path, out_path, log_path;
    auto *codec_train = codec_cmd->add_subcommand("train", "train the codec");
    add_common(codec_train, c);
    codec_train->add_option("--ckpt", ckpt, "checkpoint path")->required();
    codec_train->add_option("--log", log_path, "CSV loss log");
    auto *codec_encode = codec_cmd->add_subcommand("encode", "WAV -> token file");
    add_common(codec_encode, c);
    codec_encode->add_option("--ckpt", ckpt)->required();
    codec_encode->add_option("--in", in_path)->required();
    codec_encode->add_option("--out", out_path)->required();
    auto *codec_decode = codec_cmd->add_subcommand("decode", "token file -> WAV");
    add_common(codec_decode, c);
    codec_decode->add_option("--ckpt", ckpt)->required();
    codec_decode->add_option("--in", in_path)->required();
    codec_decode->add_option("--out", out_path)->required();

    // speaker train|enroll
    auto *spk_cmd = app.add_subcommand("speaker", "speaker embeddings");
    spk_cmd->require_subcommand(1);
    auto *spk_train = spk_cmd->add_subcommand("train", "train extractor and enroll voices");
    add_common(spk_train, c);
    spk_train->add_option("--ckpt", ckpt)->required();
    auto *spk_enroll = spk_cmd->add_subcommand("enroll", "embedding for one WAV");
    add_common(spk_enroll, c);
    spk_enroll->add_option("--ckpt", ckpt)->required();
    spk_enroll->add_option("--in", in_path)->required();

    // model train
    auto *model_cmd = app.add_subcommand("model", "voice-language model");
    model_cmd->require_subcommand(1);
    auto *model_train = model_cmd->add_subcommand("train", "train on the task mixture");
    add_common(model_train, c);
    model_train->add_option("--ckpt", ckpt)->required();
    model_train->add_option("--log", log_path, "CSV loss log");

    // infer asr|tts|chat
    auto *infer = app.add_subcommand("infer", "run a trained checkpoint");
    infer->require_subcommand(1);
    std::string text;
    int speaker_id = 0;
    auto *infer_asr = infer->add_subcommand("asr", "transcribe a WAV");
    add_common(infer_asr, c);
    infer_asr->add_option("--ckpt", ckpt)->required();
    infer_asr->add_option("--in", in_path)->required();
    auto *infer_tts = infer->add_subcommand("tts", "synthesize text");
    add_common(infer_tts, c);
    infer_tts->add_option("--ckpt", ckpt)->required();
    infer_tts->add_option("--text", text)->required();
    infer_tts->add_option("--speaker", speaker_id, "enrolled voice id");
    infer_tts->add_option("--out", out_path)->required();
    auto *infer_chat = infer->add_subcommand("chat", "spoken-answer instruction");
    add_common(infer_chat, c);
    infer_chat->add_option("--ckpt", ckpt)->required();
    infer_chat->add_option("--text", text)->required();
    infer_chat->add_option("--speaker", speaker_id, "enrolled voice id");
    infer_chat->add_option("--out", out_path, "write spoken part as WAV");

    // duplex run
    auto *duplex_cmd = app.add_subcommand("duplex", "full-duplex engine");
    duplex_cmd->require_subcommand(1);
    std::string script_path;
    auto *duplex_run = duplex_cmd->add_subcommand("run", "drive a scripted scenario");
    add_common(duplex_run, c);
    duplex_run->add_option("--ckpt", ckpt)->required();
    duplex_run->add_option("--script", script_path)->required();
    duplex_run->add_option("--out", out_path, "output directory")->required();
    duplex_run->add_option("--speaker", speaker_id, "agent voice id");

    // bench latency|wer|invariants
    auto *bench = app.add_subcommand("bench", "measurements and self-checks");
    bench->require_subcommand(1);
    int bench_n = 0;
    auto *bench_latency = bench->add_subcommand("latency", "silence-script timing");
    add_common(bench_latency, c);
    bench_latency->add_option("--ckpt", ckpt)->required();
    auto *bench_wer = bench->add_subcommand("wer", "held-out ASR/TTS word error rate");
    add_common(bench_wer, c);
    bench_wer->add_option("--ckpt", ckpt)->required();
    bench_wer->add_option("--n", bench_n, "limit evaluated utterances");
    auto *bench_inv = bench->add_subcommand("invariants", "structural self-checks");
    add_common(bench_inv, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 1;
    }

    if (corpus_synth->parsed()) {
        pipeline::Pipeline p = pipeline::make_pipeline(c.load(), c.seed);
        fs::create_directories(corpus_out);
        int n = corpus_n > 0 ? corpus_n : p.stages.corpus_train;
        auto utts = p.synth.sample_utterances(n, p.stages.max_words, Rng(c.seed).fork("cli-corpus"));
        std::ofstream meta(fs::path(corpus_out) / "corpus.jsonl");
        for (size_t i = 0; i < utts.size(); ++i) {
            std::string name = "utt_" + std::to_string(i) + ".wav";
            write_wav((fs::path(corpus_out) / name).string(), utts[i].audio);
            json rec;
            rec["file"] = name;
            rec["speaker"] = utts[i].speaker_id;
            rec["words"] = utts[i].words;
            json spans = json::array();
            for (const auto &s : utts[i].spans)
                spans.push_back({{"word", s.word}, {"begin", s.frame_begin}, {"end", s.frame_end}});
            rec["spans"] = spans;
            meta << rec.dump() << "\n";
        }
        std::cout << "wrote " << utts.size() << " utterances to " << corpus_out << "\n";
    } else if (codec_train->parsed()) {
        pipeline::Pipeline p = load_or_fresh(c, ckpt);
        std::ofstream log = open_log(log_path);
        pipeline::train_codec_stage(p, log_path.empty() ? nullptr : &log);
        pipeline::save_pipeline(ckpt, p);
        std::cout << "codec trained; checkpoint " << ckpt << "\n";
    } else if (codec_encode->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        auto frames = codec::encode_waveform(p.codec, read_wav(in_path));
        codec::write_tokens(out_path, frames, p.codec.cfg.codebook_size);
        std::cout << "encoded " << frames.size() << " frames\n";
    } else if (codec_decode->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        auto [frames, k] = codec::read_tokens(in_path);
        if (k != p.codec.cfg.codebook_size)
            throw InputError("token file codebook size does not match the checkpoint");
        write_wav(out_path, codec::decode_tokens(p.codec, frames));
        std::cout << "decoded " << frames.size() << " frames\n";
    } else if (spk_train->parsed()) {
        pipeline::Pipeline p = load_or_fresh(c, ckpt);
        pipeline::train_speaker_stage(p);
        pipeline::save_pipeline(ckpt, p);
        std::cout << "speaker extractor trained; " << p.voices.size() << " voices enrolled\n";
    } else if (spk_enroll->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        Eigen::VectorXd e = speaker::extract(p.spk, read_wav(in_path));
        json j = json::array();
        for (Eigen::Index i = 0; i < e.size(); ++i) j.push_back(e(i));
        std::cout << j.dump() << "\n";
    } else if (model_train->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        std::ofstream log = open_log(log_path);
        pipeline::train_model_stage(p, log_path.empty() ? nullptr : &log);
        pipeline::save_pipeline(ckpt, p);
        std::cout << "model trained; checkpoint " << ckpt << "\n";
    } else if (infer_asr->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        p.model.require_trained("infer asr");
        std::cout << pipeline::infer_asr(p, read_wav(in_path)) << "\n";
    } else if (infer_tts->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        p.model.require_trained("infer tts");
        write_wav(out_path, pipeline::infer_tts(p, text, speaker_id));
        std::cout << "wrote " << out_path << "\n";
    } else if (infer_chat->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        p.model.require_trained("infer chat");
        model::GenerateResult r = pipeline::infer_chat(p, text, speaker_id);
        std::vector<int> ids;
        std::vector<codec::FrameTokens> frames;
        for (const auto &s : r.response.steps) {
            if (s.kind == align::StepKind::Text) ids.push_back(s.token());
            if (s.kind == align::StepKind::Audio) frames.push_back(s.frame(p.vocab));
        }
        std::cout << p.vocab.detokenize(ids) << "\n";
        if (!out_path.empty() && !frames.empty())
            write_wav(out_path, codec::decode_tokens(p.codec, frames));
    } else if (duplex_run->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        if (speaker_id < 0 || speaker_id >= int(p.voices.size()))
            throw InputError("duplex run: no enrolled voice for speaker");
        duplex::DuplexScript script = duplex::load_script(script_path);
        duplex::DuplexSession s = duplex::open_session(
            p.model, p.codec, p.vocab, duplex::duplex_persona(), 1, p.voices[size_t(speaker_id)]);
        duplex::ScriptResult r = duplex::run_script(s, script);
        fs::create_directories(out_path);
        write_wav((fs::path(out_path) / "agent.wav").string(), r.agent_audio);
        codec::write_tokens((fs::path(out_path) / "user.vtok").string(), r.user_tokens,
                            p.codec.cfg.codebook_size);
        codec::write_tokens((fs::path(out_path) / "agent.vtok").string(), r.agent_tokens,
                            p.codec.cfg.codebook_size);
        std::ofstream((fs::path(out_path) / "latency.json").string())
            << latency_json(p.codec.cfg, r.latency).dump(2) << "\n";
        std::cout << "ran " << script.total_frames << " frames\n";
    } else if (bench_latency->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        duplex::DuplexSession s = duplex::open_session(
            p.model, p.codec, p.vocab, duplex::duplex_persona(), 1,
            p.voices.empty() ? std::optional<Eigen::VectorXd>() : p.voices[0]);
        duplex::DuplexScript script;
        script.total_frames = 100;
        duplex::ScriptResult r = duplex::run_script(s, script);
        std::cout << latency_json(p.codec.cfg, r.latency).dump(2) << "\n";
    } else if (bench_wer->parsed()) {
        pipeline::Pipeline p = load_required(ckpt);
        p.model.require_trained("bench wer");
        std::vector<synth::Utterance> utts = p.heldout;
        if (bench_n > 0 && bench_n < int(utts.size())) utts.resize(size_t(bench_n));
        json j;
        j["utterances"] = utts.size();
        j["asr_wer"] = pipeline::eval_asr_wer(p, utts);
        j["tts_wer"] = pipeline::eval_tts_wer(p, utts);
        std::cout << j.dump(2) << "\n";
    } else if (bench_inv->parsed()) {
        // structural self-checks that need no checkpoint
        Rng rng(c.seed);
        std::vector<codec::Mat> books;
        for (int q = 0; q < 4; ++q) {
            codec::Mat b = nn::randn(rng, 16, 8, 0.5);
            b.row(0).setZero();
            books.push_back(b);
        }
        int monotonic = 0, roundtrip = 0;
        const int n_lat = 1000;
        for (int i = 0; i < n_lat; ++i) {
            codec::Vec z = nn::randn(rng, 8, 1, 1.0).col(0);
            auto q = codec::rvq_quantize(z, books);
            bool ok = true;
            for (size_t l = 1; l < q.residuals.size(); ++l)
                if (q.residuals[l].squaredNorm() > q.residuals[l - 1].squaredNorm() + 1e-12)
                    ok = false;
            if (ok) monotonic++;
            if ((codec::rvq_dequantize(q.indices, books) - q.quantized).norm() == 0.0)
                roundtrip++;
        }
        json j;
        j["rvq_monotonic"] = monotonic;
        j["rvq_dequantize_exact"] = roundtrip;
        j["trials"] = n_lat;
        bool pass = monotonic == n_lat && roundtrip == n_lat;
        j["pass"] = pass;
        std::cout << j.dump(2) << "\n";
        if (!pass) return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
