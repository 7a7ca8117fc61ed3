#include "voila/dsp.hpp"

#include <cmath>

namespace voila::dsp {

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

MelFrontend::MelFrontend(MelConfig cfg) : cfg_(cfg) {
    if (cfg_.window_samples < cfg_.hop_samples)
        throw ConfigError("mel frontend: window < hop");
    if (cfg_.n_fft < cfg_.window_samples)
        throw ConfigError("mel frontend: n_fft < window");

    int W = cfg_.window_samples;
    hann_.resize(W);
    for (int n = 0; n < W; ++n)
        hann_(n) = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(n) / double(W - 1));

    int bins = cfg_.n_fft / 2 + 1;
    dft_cos_.resize(W, bins);
    dft_sin_.resize(W, bins);
    for (int n = 0; n < W; ++n) {
        for (int k = 0; k < bins; ++k) {
            double ang = 2.0 * M_PI * double(n) * double(k) / double(cfg_.n_fft);
            dft_cos_(n, k) = std::cos(ang);
            dft_sin_(n, k) = -std::sin(ang);
        }
    }

    // triangular mel filters on the fft bin grid
    mel_fb_ = Mat::Zero(bins, cfg_.n_mel_bands);
    double mel_lo = hz_to_mel(cfg_.fmin_hz), mel_hi = hz_to_mel(cfg_.fmax_hz);
    std::vector<double> edges(size_t(cfg_.n_mel_bands) + 2);
    for (size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(edges.size() - 1));
    double bin_hz = double(cfg_.sample_rate_hz) / double(cfg_.n_fft);
    for (int m = 0; m < cfg_.n_mel_bands; ++m) {
        double lo = edges[size_t(m)], mid = edges[size_t(m) + 1], hi = edges[size_t(m) + 2];
        for (int k = 0; k < bins; ++k) {
            double f = k * bin_hz;
            double w = 0.0;
            if (f > lo && f < mid)
                w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi)
                w = (hi - f) / (hi - mid);
            mel_fb_(k, m) = w;
        }
    }
}

Mat MelFrontend::windowed_frames(const Waveform &w) const {
    int T = n_frames(w.size());
    int W = cfg_.window_samples;
    Mat out = Mat::Zero(T, W);
    for (int t = 0; t < T; ++t) {
        size_t base = size_t(t) * size_t(cfg_.hop_samples);
        for (int n = 0; n < W; ++n) {
            size_t i = base + size_t(n);
            if (i < w.size()) out(t, n) = w.samples[i] * hann_(n);
        }
    }
    return out;
}

Eigen::RowVectorXd MelFrontend::windowed_frame(const double *samples, size_t n, size_t t) const {
    int W = cfg_.window_samples;
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(W);
    size_t base = t * size_t(cfg_.hop_samples);
    for (int i = 0; i < W; ++i) {
        size_t j = base + size_t(i);
        if (j < n) out(i) = samples[j] * hann_(i);
    }
    return out;
}

Eigen::RowVectorXd MelFrontend::mel_row(const Eigen::RowVectorXd &windowed) const {
    Eigen::RowVectorXd re = windowed * dft_cos_;
    Eigen::RowVectorXd im = windowed * dft_sin_;
    Eigen::RowVectorXd power = re.cwiseProduct(re) + im.cwiseProduct(im);
    return ((power * mel_fb_).array() + cfg_.log_eps).log().matrix();
}

Mat MelFrontend::mel(const Waveform &w) const {
    Mat frames = windowed_frames(w);
    Mat re = frames * dft_cos_;
    Mat im = frames * dft_sin_;
    Mat power = re.cwiseProduct(re) + im.cwiseProduct(im);
    return ((power * mel_fb_).array() + cfg_.log_eps).log().matrix();
}

nn::Var MelFrontend::mel_graph(nn::Var windowed) const {
    nn::Var re = nn::matmul(windowed, nn::constant(dft_cos_));
    nn::Var im = nn::matmul(windowed, nn::constant(dft_sin_));
    nn::Var power = nn::add(nn::cmul(re, re), nn::cmul(im, im));
    return nn::log_(nn::matmul(power, nn::constant(mel_fb_)), cfg_.log_eps);
}

nn::Var MelFrontend::window_graph(nn::Var raw_frames) const {
    Eigen::Index T = raw_frames->v().rows();
    Mat h(T, hann_.size());
    for (Eigen::Index t = 0; t < T; ++t) h.row(t) = hann_;
    return nn::cmul(std::move(raw_frames), nn::constant(std::move(h)));
}

}  // namespace voila::dsp
