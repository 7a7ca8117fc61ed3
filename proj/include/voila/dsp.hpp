#pragma once

#include <Eigen/Dense>

#include "voila/nn.hpp"
#include "voila/wav.hpp"

namespace voila::dsp {

using Mat = Eigen::MatrixXd;

struct MelConfig {
    int sample_rate_hz = 16000;
    int hop_samples = 1280;
    int window_samples = 1920;
    int n_fft = 2048;
    int n_mel_bands = 40;
    double fmin_hz = 0.0;
    double fmax_hz = 8000.0;
    double log_eps = 1e-6;
};

// Causal log-mel frontend. Frame t covers samples [t*hop, t*hop + window);
// lookahead past the hop boundary is window - hop samples (< 1 frame).
class MelFrontend {
  public:
    explicit MelFrontend(MelConfig cfg);

    const MelConfig &config() const { return cfg_; }
    int n_frames(size_t n_samples) const { return int(n_samples / size_t(cfg_.hop_samples)); }

    // [T x window] Hann-windowed sample frames, zero-padded past the signal end.
    Mat windowed_frames(const Waveform &w) const;
    // One windowed frame starting at sample t*hop (for streaming use).
    Eigen::RowVectorXd windowed_frame(const double *samples, size_t n, size_t t) const;

    // [T x n_mel] log-mel features.
    Mat mel(const Waveform &w) const;
    Eigen::RowVectorXd mel_row(const Eigen::RowVectorXd &windowed) const;

    // Differentiable log-mel from already-windowed frames [T x window].
    nn::Var mel_graph(nn::Var windowed) const;
    // Applies the Hann window to raw [T x hop]-derived frames inside a graph.
    nn::Var window_graph(nn::Var raw_frames) const;

    const Eigen::RowVectorXd &hann() const { return hann_; }
    const Mat &dft_cos() const { return dft_cos_; }
    const Mat &dft_sin() const { return dft_sin_; }
    const Mat &mel_filterbank() const { return mel_fb_; }

  private:
    MelConfig cfg_;
    Eigen::RowVectorXd hann_;  // 1 x window
    Mat dft_cos_, dft_sin_;    // window x (n_fft/2 + 1)
    Mat mel_fb_;               // (n_fft/2 + 1) x n_mel
};

}  // namespace voila::dsp
