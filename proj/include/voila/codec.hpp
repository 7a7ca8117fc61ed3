#pragma once

#include <array>
#include <deque>
#include <optional>
#include <vector>

#include "voila/config.hpp"
#include "voila/dsp.hpp"
#include "voila/nn.hpp"
#include "voila/rng.hpp"
#include "voila/wav.hpp"

namespace voila::codec {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// One audio frame: one codebook index per RVQ level.
struct FrameTokens {
    std::array<uint16_t, 4> idx{0, 0, 0, 0};
    bool operator==(const FrameTokens &o) const { return idx == o.idx; }
    bool is_silence() const { return idx == std::array<uint16_t, 4>{0, 0, 0, 0}; }
};

struct CodecConfig {
    int sample_rate_hz = 16000;
    int hop_samples = 1280;     // 12.5 Hz frame rate, 80 ms
    int window_samples = 1920;  // 640-sample (<1 frame) lookahead
    int n_mel_bands = 40;
    int d_latent = 64;
    int n_levels = 4;       // fixed
    int codebook_size = 256;
    double ema_decay = 0.99;
    double commit_weight = 0.25;
    double distill_weight = 1.0;
    double silence_anchor_weight = 0.05;
    int enc_hidden = 128;
    int dec_hidden = 128;
    int conv_kernel = 3;
    int d_teacher = 32;
    int n_phones = 27;  // set from the phone inventory; last id is silence

    static CodecConfig from_config(const Config &c);
    void validate() const;
    double hop_ms() const { return 1000.0 * hop_samples / sample_rate_hz; }
    int lookahead_samples() const { return window_samples - hop_samples; }
    dsp::MelConfig mel_config() const;
};

// ---- pure RVQ primitives (codebooks as K x d matrices, entry 0 pinned) ----

struct QuantizeResult {
    std::vector<int> indices;          // one per level
    Vec quantized;                     // sum of selected entries
    std::vector<Vec> residuals;        // residual after each level
};

// Greedy per-level nearest neighbor under squared euclidean distance,
// lowest index on ties. Works for any number of levels (micro-config oracles).
QuantizeResult rvq_quantize(const Vec &latent, const std::vector<Mat> &books);
Vec rvq_dequantize(const std::vector<int> &indices, const std::vector<Mat> &books);

// 1 - cos(projection, teacher); zero-norm inputs yield 1 and set *degenerate.
double semantic_distill_loss(const Vec &level1_quantized, const Mat &projection,
                             const Vec &teacher, bool *degenerate = nullptr);

// ---- trainable codec state ----

struct CodecState {
    CodecConfig cfg;
    nn::ParamStore params;
    bool trained = false;

    // cached parameter ids
    struct Ids {
        int enc_w1, enc_b1, enc_w2, enc_b2, enc_w3, enc_b3;
        int dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3;
        int proj, teacher;
        std::array<int, 4> book;
        std::array<int, 4> usage;
    } ids{};

    static CodecState init(const CodecConfig &cfg, Rng rng);

    // level in 0..3
    const Mat &book(int level) const { return params.value(ids.book[size_t(level)]); }
    Mat &book(int level) { return params.value(ids.book[size_t(level)]); }
    const Mat &usage(int level) const { return params.value(ids.usage[size_t(level)]); }
    Mat &usage(int level) { return params.value(ids.usage[size_t(level)]); }
    std::vector<Mat> books_vec() const;

    void require_trained(const char *op) const;
};

// ---- forward paths ----

// Encoder: log-mel [T x n_mel] -> latents [T x d_latent] (plain, inference).
Mat encoder_forward(const CodecState &s, const Mat &mel);
// Decoder: latents [T x d_latent] -> sample frames [T x hop] (plain).
Mat decoder_forward(const CodecState &s, const Mat &latents);

std::vector<FrameTokens> quantize_latents(const CodecState &s, const Mat &latents);
Mat dequantize_frames(const CodecState &s, const std::vector<FrameTokens> &frames);

std::vector<FrameTokens> encode_waveform(const CodecState &s, const Waveform &w);
Waveform decode_tokens(const CodecState &s, const std::vector<FrameTokens> &frames);

// ---- training ----

struct CodecBatchItem {
    Mat mel;                       // precomputed log-mel [T x n_mel]
    Mat windowed;                  // precomputed windowed frames (loss target)
    std::vector<int> phone_labels; // per frame; n_phones-1 = silence
};

CodecBatchItem make_codec_item(const CodecState &s, const Waveform &w,
                               std::vector<int> phone_labels);

struct CodecLossReport {
    double total = 0, recon = 0, commit = 0, distill = 0, anchor = 0;
    int degenerate_frames = 0;  // zero-norm distill inputs, flagged
};

CodecLossReport train_codec_step(CodecState &s, const std::vector<CodecBatchItem> &batch,
                                 nn::AdamW &opt, double lr, Rng &rng);

// ---- streaming ----

// Per-session encode stream: push one hop of samples (plus available
// lookahead) at a time, get one FrameTokens back. O(1) per frame.
class EncodeStream {
  public:
    explicit EncodeStream(const CodecState &s);
    // `windowed` is the Hann-windowed frame for frame t (window_samples long).
    FrameTokens push_windowed(const Eigen::RowVectorXd &windowed);

  private:
    const CodecState &s_;
    dsp::MelFrontend fe_;
    std::deque<Eigen::RowVectorXd> mel_hist_;  // most recent last
    size_t hist_needed_;
};

// Per-session decode stream: one FrameTokens in, hop samples out.
class DecodeStream {
  public:
    explicit DecodeStream(const CodecState &s);
    Eigen::RowVectorXd push_frame(const FrameTokens &t);

  private:
    const CodecState &s_;
    std::deque<Vec> latent_hist_;
    size_t hist_needed_;
};

// ---- token file serialization: "VTOK", version, K, Q, frames ----
void write_tokens(const std::string &path, const std::vector<FrameTokens> &frames, int K);
std::pair<std::vector<FrameTokens>, int> read_tokens(const std::string &path);

// mel-domain SNR (dB) between two waveforms, on the shorter common length
double mel_snr_db(const CodecState &s, const Waveform &ref, const Waveform &test);

}  // namespace voila::codec
