#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "voila/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run(const std::string &args) {
    std::string cmd = "./voila " + args + " 2>/dev/null";
    FILE *p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof(buf), p)) out.append(buf, n);
    int status = pclose(p);
    return {WEXITSTATUS(status), out};
}

struct Workspace {
    fs::path dir;
    std::string cfg;

    Workspace() : dir(fs::temp_directory_path() / "voila_cli_test") {
        fs::create_directories(dir);
        cfg = (dir / "tiny.conf").string();
        std::ofstream f(cfg);
        f << "synth.lexicon_size = 40\n"
             "synth.n_speakers = 3\n"
             "corpus.train_utterances = 8\n"
             "corpus.heldout_utterances = 2\n"
             "corpus.max_words = 2\n"
             "codec.codebook_size = 8\n"
             "codec.d_latent = 8\n"
             "codec.enc_hidden = 16\n"
             "codec.dec_hidden = 16\n"
             "codec.d_teacher = 8\n"
             "codec.train_steps = 12\n"
             "codec.batch_size = 2\n"
             "speaker.d_hidden = 32\n"
             "speaker.train_steps = 60\n"
             "model.d_model = 32\n"
             "model.n_layers = 2\n"
             "model.n_heads = 2\n"
             "model.d_depth = 16\n"
             "model.n_layers_depth = 1\n"
             "model.n_heads_depth = 2\n"
             "model.d_spk = 8\n"
             "train.task_samples = 10\n"
             "train.duplex_samples = 2\n"
             "train.model_steps = 12\n"
             "train.batch_size = 2\n";
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string path(const std::string &name) const { return (dir / name).string(); }
    std::string common() const { return " --config " + cfg + " --seed 7"; }
};

Workspace &ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run("").exit_code == 1);
    CHECK(run("--nonsense").exit_code == 1);
    CHECK(run("codec").exit_code == 1);             // missing sub-subcommand
    CHECK(run("codec train").exit_code == 1);       // missing --ckpt
    CHECK(run("no-such-command").exit_code == 1);
}

TEST_CASE("runtime errors exit 2") {
    CHECK(run("infer asr --ckpt /nonexistent.ckpt --in /nonexistent.wav").exit_code == 2);
    CHECK(run("codec encode --ckpt /nonexistent.ckpt --in x.wav --out y.vtok").exit_code == 2);
}

TEST_CASE("bench invariants passes without a checkpoint") {
    RunResult r = run("bench invariants --seed 5");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("\"pass\": true") != std::string::npos);
    CHECK(r.out.find("\"rvq_monotonic\": 1000") != std::string::npos);
}

TEST_CASE("corpus synth writes WAVs and metadata") {
    auto &w = ws();
    RunResult r = run("corpus synth --out " + w.path("corpus") + " --n 3" + w.common());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(w.path("corpus") + "/utt_0.wav"));
    CHECK(fs::exists(w.path("corpus") + "/utt_2.wav"));
    std::ifstream meta(w.path("corpus") + "/corpus.jsonl");
    int lines = 0;
    for (std::string line; std::getline(meta, line);)
        if (!line.empty()) lines++;
    CHECK(lines == 3);
}

TEST_CASE("full command chain: train stages, infer, duplex, bench") {
    auto &w = ws();
    std::string ckpt = w.path("toy.ckpt");

    REQUIRE(run("codec train --ckpt " + ckpt + w.common()).exit_code == 0);
    REQUIRE(fs::exists(ckpt));

    // token round trip over one corpus wav
    REQUIRE(run("corpus synth --out " + w.path("c2") + " --n 1" + w.common()).exit_code == 0);
    std::string wav = w.path("c2") + "/utt_0.wav";
    REQUIRE(run("codec encode --ckpt " + ckpt + " --in " + wav + " --out " + w.path("x.vtok") +
                w.common())
                .exit_code == 0);
    REQUIRE(run("codec decode --ckpt " + ckpt + " --in " + w.path("x.vtok") + " --out " +
                w.path("x_rec.wav") + w.common())
                .exit_code == 0);
    CHECK(voila::read_wav(w.path("x_rec.wav")).size() > 0);

    // encode is bit-reproducible under a fixed seed
    REQUIRE(run("codec encode --ckpt " + ckpt + " --in " + wav + " --out " + w.path("y.vtok") +
                w.common())
                .exit_code == 0);
    std::ifstream a(w.path("x.vtok"), std::ios::binary), b(w.path("y.vtok"), std::ios::binary);
    std::string abytes((std::istreambuf_iterator<char>(a)), {});
    std::string bbytes((std::istreambuf_iterator<char>(b)), {});
    CHECK(abytes == bbytes);

    REQUIRE(run("speaker train --ckpt " + ckpt + w.common()).exit_code == 0);
    RunResult enroll = run("speaker enroll --ckpt " + ckpt + " --in " + wav + w.common());
    CHECK(enroll.exit_code == 0);
    CHECK(enroll.out.find('[') != std::string::npos);

    // inference before model training is refused
    CHECK(run("infer asr --ckpt " + ckpt + " --in " + wav + w.common()).exit_code == 2);

    REQUIRE(run("model train --ckpt " + ckpt + " --log " + w.path("loss.csv") + w.common())
                .exit_code == 0);
    std::ifstream log(w.path("loss.csv"));
    std::string header;
    std::getline(log, header);
    CHECK(header == "step,lr,total,head,depth,head_accuracy");

    RunResult asr1 = run("infer asr --ckpt " + ckpt + " --in " + wav + w.common());
    RunResult asr2 = run("infer asr --ckpt " + ckpt + " --in " + wav + w.common());
    CHECK(asr1.exit_code == 0);
    CHECK(asr1.out == asr2.out);  // identical invocations reproduce bit-exactly

    RunResult tts = run("infer tts --ckpt " + ckpt + " --text hello --speaker 1 --out " +
                        w.path("tts.wav") + w.common());
    CHECK(tts.exit_code == 0);
    CHECK(fs::exists(w.path("tts.wav")));

    CHECK(run("infer chat --ckpt " + ckpt + " --text hello --speaker 0" + w.common())
              .exit_code == 0);

    // duplex scenario from a script file
    std::ofstream script(w.path("script.json"));
    script << R"({"total_frames": 30, "events": [{"start_frame": 3, "wav": ")" << wav
           << R"("}]})";
    script.close();
    RunResult dup = run("duplex run --ckpt " + ckpt + " --script " + w.path("script.json") +
                        " --out " + w.path("dup") + w.common());
    CHECK(dup.exit_code == 0);
    CHECK(fs::exists(w.path("dup") + "/agent.wav"));
    CHECK(fs::exists(w.path("dup") + "/user.vtok"));
    CHECK(fs::exists(w.path("dup") + "/agent.vtok"));
    CHECK(fs::exists(w.path("dup") + "/latency.json"));

    RunResult lat = run("bench latency --ckpt " + ckpt + w.common());
    CHECK(lat.exit_code == 0);
    CHECK(lat.out.find("\"algorithmic_latency_ms\": 160.0") != std::string::npos);

    RunResult wer = run("bench wer --ckpt " + ckpt + " --n 2" + w.common());
    CHECK(wer.exit_code == 0);
    CHECK(wer.out.find("asr_wer") != std::string::npos);
    CHECK(wer.out.find("tts_wer") != std::string::npos);
}
