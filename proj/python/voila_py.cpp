// Python bindings for the end-to-end engine: corpus synthesis, codec
// tokenization, ASR/TTS/chat inference, duplex sessions, checkpoints.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "voila/pipeline.hpp"

namespace py = pybind11;
using namespace voila;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Waveform to_waveform(const DoubleArray &a, int sample_rate_hz) {
    if (a.ndim() != 1) throw InputError("waveform must be a 1-d array");
    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.assign(a.data(), a.data() + a.size());
    return w;
}

py::array_t<double> to_array(const Waveform &w) {
    py::array_t<double> a(py::ssize_t(w.samples.size()));
    std::copy(w.samples.begin(), w.samples.end(), a.mutable_data());
    return a;
}

std::vector<std::array<int, 4>> frames_out(const std::vector<codec::FrameTokens> &frames) {
    std::vector<std::array<int, 4>> out;
    out.reserve(frames.size());
    for (const auto &f : frames)
        out.push_back({int(f.idx[0]), int(f.idx[1]), int(f.idx[2]), int(f.idx[3])});
    return out;
}

std::vector<codec::FrameTokens> frames_in(const std::vector<std::array<int, 4>> &tokens) {
    std::vector<codec::FrameTokens> out;
    out.reserve(tokens.size());
    for (const auto &t : tokens) {
        codec::FrameTokens f;
        for (int q = 0; q < 4; ++q) {
            if (t[size_t(q)] < 0 || t[size_t(q)] > 0xffff)
                throw InputError("token index out of range");
            f.idx[size_t(q)] = uint16_t(t[size_t(q)]);
        }
        out.push_back(f);
    }
    return out;
}

// One trained (or trainable) system behind a single handle.
struct Engine {
    pipeline::Pipeline p;

    Engine(const std::string &config_text, uint64_t seed)
        : p(pipeline::make_pipeline(Config::parse_text(config_text), seed)) {}
    explicit Engine(pipeline::Pipeline loaded) : p(std::move(loaded)) {}

    int sample_rate() const { return p.codec.cfg.sample_rate_hz; }

    void train() {
        pipeline::train_codec_stage(p);
        pipeline::train_speaker_stage(p);
        pipeline::train_model_stage(p);
    }

    py::array_t<double> synthesize(const std::vector<std::string> &words, int speaker) const {
        return to_array(p.synth.utter(words, speaker).audio);
    }

    std::vector<std::array<int, 4>> encode(const DoubleArray &samples) const {
        return frames_out(codec::encode_waveform(p.codec, to_waveform(samples, sample_rate())));
    }

    py::array_t<double> decode(const std::vector<std::array<int, 4>> &tokens) const {
        return to_array(codec::decode_tokens(p.codec, frames_in(tokens)));
    }

    std::string asr(const DoubleArray &samples) const {
        return pipeline::infer_asr(p, to_waveform(samples, sample_rate()));
    }

    py::array_t<double> tts(const std::string &text, int speaker) const {
        return to_array(pipeline::infer_tts(p, text, speaker));
    }

    std::string chat(const std::string &text, int speaker) const {
        model::GenerateResult r = pipeline::infer_chat(p, text, speaker);
        std::vector<int> ids;
        for (const auto &s : r.response.steps)
            if (s.kind == align::StepKind::Text) ids.push_back(s.token());
        return p.vocab.detokenize(ids);
    }

    std::vector<double> speaker_embedding(const DoubleArray &samples) const {
        Eigen::VectorXd e = speaker::extract(p.spk, to_waveform(samples, sample_rate()));
        return std::vector<double>(e.data(), e.data() + e.size());
    }

    py::dict duplex(const DoubleArray &samples, long start_frame, long total_frames,
                    int speaker) const {
        duplex::DuplexScript script;
        script.total_frames = total_frames;
        if (samples.size() > 0)
            script.events.push_back({start_frame, to_waveform(samples, sample_rate())});
        if (speaker < 0 || size_t(speaker) >= p.voices.size())
            throw InputError("duplex: unknown speaker id");
        duplex::DuplexSession s = duplex::open_session(
            p.model, p.codec, p.vocab, duplex::duplex_persona(), 1, p.voices[size_t(speaker)]);
        duplex::ScriptResult r = duplex::run_script(s, script);
        py::dict out;
        out["agent_audio"] = to_array(r.agent_audio);
        out["agent_tokens"] = frames_out(r.agent_tokens);
        out["user_tokens"] = frames_out(r.user_tokens);
        out["real_time_factor"] = r.latency.real_time_factor;
        out["response_onset_ms"] = r.latency.response_onset_ms;
        return out;
    }

    void save(const std::string &path) const { pipeline::save_pipeline(path, p); }
};

}  // namespace

PYBIND11_MODULE(_voila, m) {
    m.doc() = "Streaming voice-language engine: RVQ audio codec, hierarchical "
              "transformer, full-duplex dialogue";

    py::class_<Engine>(m, "Engine")
        .def(py::init<const std::string &, uint64_t>(), py::arg("config_text") = "",
             py::arg("seed") = 1234)
        .def_static(
            "load", [](const std::string &path) { return Engine(pipeline::load_pipeline(path)); },
            py::arg("path"))
        .def_property_readonly("sample_rate", &Engine::sample_rate)
        .def_property_readonly("lexicon",
                               [](const Engine &e) { return e.p.synth.lexicon(); })
        .def_property_readonly("n_speakers",
                               [](const Engine &e) { return e.p.synth.config().n_speakers; })
        .def_property_readonly("trained", [](const Engine &e) { return e.p.model.trained; })
        .def("train", &Engine::train)
        .def("synthesize", &Engine::synthesize, py::arg("words"), py::arg("speaker") = 0)
        .def("encode", &Engine::encode, py::arg("samples"))
        .def("decode", &Engine::decode, py::arg("tokens"))
        .def("asr", &Engine::asr, py::arg("samples"))
        .def("tts", &Engine::tts, py::arg("text"), py::arg("speaker") = 0)
        .def("chat", &Engine::chat, py::arg("text"), py::arg("speaker") = 0)
        .def("speaker_embedding", &Engine::speaker_embedding, py::arg("samples"))
        .def("duplex", &Engine::duplex, py::arg("samples"), py::arg("start_frame") = 2,
             py::arg("total_frames") = 50, py::arg("speaker") = 0)
        .def("save", &Engine::save, py::arg("path"));

    m.def("read_wav", [](const std::string &path) { return to_array(read_wav(path)); },
          py::arg("path"));
    m.def(
        "write_wav",
        [](const std::string &path, const DoubleArray &samples, int sample_rate_hz) {
            write_wav(path, to_waveform(samples, sample_rate_hz));
        },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate_hz") = 16000);
}
