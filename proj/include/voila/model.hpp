#pragma once

#include <optional>
#include <vector>

#include "voila/align.hpp"
#include "voila/codec.hpp"
#include "voila/config.hpp"
#include "voila/nn.hpp"
#include "voila/vocab.hpp"

namespace voila::model {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

struct ModelConfig {
    int d_model = 256;
    int n_layers = 6;
    int n_heads = 4;
    int max_context_steps = 256;
    int d_depth = 128;
    int n_layers_depth = 2;
    int n_heads_depth = 2;
    int d_spk = 64;
    double temperature = 0.8;
    int top_k = 32;

    // filled from the vocabulary
    int n_vocab = 0;      // full unified token space
    int n_text_head = 0;  // specials + text units
    int n_audio_k = 0;    // codebook size per level

    static ModelConfig from_config(const Config &c, const vocab::VocabSpec &v);
    void attach_vocab(const vocab::VocabSpec &v);
    void validate() const;

    // step head: every special and text id, plus one audio-step slot
    int head_size() const { return n_text_head + 1; }
    int audio_step_slot() const { return n_text_head; }
};

// head target id for the step the model should emit next
int head_target(const ModelConfig &cfg, const align::Step &s);

struct Model {
    ModelConfig cfg;
    nn::ParamStore params;
    bool trained = false;

    struct LayerIds {
        int ln1_g, ln1_b, wq, wk, wv, wo;
        int ln2_g, ln2_b, w1, b1, w2, b2;
    };
    struct Ids {
        int tok_emb, spk_proj;
        std::vector<LayerIds> backbone;
        int lnf_g, lnf_b, head_w, head_b;
        int depth_in;                  // d_model -> d_depth hidden prefix
        std::array<int, 4> depth_emb;  // per-level K x d_depth input tables
        int depth_pos;                 // 5 x d_depth learned positions
        std::vector<LayerIds> depth;   // depth transformer layers
        int depth_lnf_g, depth_lnf_b;
        std::array<int, 4> depth_head_w, depth_head_b;
    } ids{};

    static Model init(const ModelConfig &cfg, Rng rng);
    void require_trained(const char *op) const;
};

// ---- training ----

// Next-step prediction sample. Position t is trained to predict
// head_targets[t] (and depth_targets[t] when that is the audio-step slot)
// from inputs[0..t]. Targets at unmasked positions are never read.
struct TrainSample {
    std::vector<align::Step> inputs;
    std::vector<int> head_targets;
    std::vector<codec::FrameTokens> depth_targets;
    std::vector<char> mask;
    int ref_index = -1;
    std::optional<Vec> speaker;  // unit norm, d_spk

    // second-stream steps averaged into the input embedding (duplex
    // training); empty = single stream, otherwise one entry per position
    std::vector<std::optional<align::Step>> fused;

    void validate(const ModelConfig &cfg) const;
};

struct LossReport {
    double total = 0, head = 0, depth = 0;      // depth = sum of the level losses
    std::array<double, 4> depth_level{0, 0, 0, 0};
    long masked = 0, audio_masked = 0;
    double head_accuracy = 0;
};

// Batched teacher-forced loss; fills grads when given. The head CE is
// averaged over masked steps, each depth level over masked audio steps;
// total weights all five terms equally. An all-unmasked batch yields a
// zero report and no gradients.
LossReport model_loss(const Model &m, const std::vector<TrainSample> &batch, nn::Grads *grads);

// ---- plain forward paths (inference and test oracles) ----

// mean-of-4-lanes embeddings, speaker projection added at ref_index;
// positions with a fused second step get the average of both stream means
Mat embed_steps(const Model &m, const std::vector<align::Step> &steps, int ref_index,
                const Vec *speaker,
                const std::vector<std::optional<align::Step>> *fused = nullptr);
// batched hiddens [T x d_model] for embedded inputs
Mat backbone_forward(const Model &m, const Mat &x);
RowVec head_logits(const Model &m, const RowVec &hidden);
// teacher-forced depth logits [4 x K] for one frame under one hidden
Mat depth_logits_teacher(const Model &m, const RowVec &hidden, const codec::FrameTokens &target);

// ---- incremental decoding ----

struct SessionState {
    std::vector<Mat> k_cache, v_cache;  // one [t x d_model] pair per layer
    int step_counter = 0;
};

// one step through the backbone; appends to the cache
RowVec backbone_step(const Model &m, SessionState &st, const RowVec &x);

// drops all but the newest keep_last cached rows (sliding-window attention;
// RoPE keys keep their absolute rotations, so relative offsets survive)
void trim_context(SessionState &st, int keep_last);

enum class SampleMode { Greedy, Sample };

int sample_from_logits(const RowVec &logits, SampleMode mode, double temperature, int top_k,
                       Rng &rng);

codec::FrameTokens depth_decode(const Model &m, const RowVec &hidden, SampleMode mode, Rng &rng);

struct GenerateLimits {
    int max_steps = 64;
};

struct GenerateResult {
    align::InterleavedSequence response;  // generated steps, <eos> included if reached
    bool truncated = false;
};

GenerateResult generate(const Model &m, const vocab::VocabSpec &v,
                        const align::InterleavedSequence &prompt,
                        const std::optional<Vec> &speaker, GenerateLimits limits,
                        SampleMode mode, Rng &rng);

}  // namespace voila::model
