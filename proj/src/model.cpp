#include "voila/model.hpp"

#include <cmath>

namespace voila::model {

namespace {

constexpr double kRopeBase = 10000.0;

// ---- plain numeric kernels, kept in lockstep with the nn graph ops ----

double pl_gelu(double v) {
    const double c = 0.7978845608028654;
    return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
}

Mat pl_gelu(const Mat &x) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = pl_gelu(x(i));
    return out;
}

Mat pl_ln(const Mat &x, const Mat &gain, const Mat &bias, double eps = 1e-5) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        double mu = x.row(t).mean();
        double var = (x.row(t).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        out.row(t) = ((x.row(t).array() - mu) * is).matrix().cwiseProduct(gain.row(0)) + bias.row(0);
    }
    return out;
}

void pl_rope_row(RowVec &row, int pos) {
    Eigen::Index d = row.size();
    for (Eigen::Index i = 0; i < d / 2; ++i) {
        double theta = double(pos) * std::pow(kRopeBase, -2.0 * double(i) / double(d));
        double c = std::cos(theta), s = std::sin(theta);
        double a = row(2 * i), b = row(2 * i + 1);
        row(2 * i) = a * c - b * s;
        row(2 * i + 1) = a * s + b * c;
    }
}

Mat pl_rope(const Mat &x, int start_pos) {
    Mat out = x;
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
        RowVec row = out.row(t);
        pl_rope_row(row, start_pos + int(t));
        out.row(t) = row;
    }
    return out;
}

Mat pl_causal_attention(const Mat &q, const Mat &k, const Mat &v, int n_heads) {
    Eigen::Index T = q.rows(), d = q.cols(), dh = d / n_heads;
    double inv_scale = 1.0 / std::sqrt(double(dh));
    Mat out(T, d);
    for (int h = 0; h < n_heads; ++h) {
        auto Qh = q.middleCols(h * dh, dh);
        auto Kh = k.middleCols(h * dh, dh);
        auto Vh = v.middleCols(h * dh, dh);
        Mat S = (Qh * Kh.transpose()) * inv_scale;
        for (Eigen::Index i = 0; i < T; ++i) {
            double mx = S.row(i).head(i + 1).maxCoeff();
            Eigen::RowVectorXd p = (S.row(i).head(i + 1).array() - mx).exp();
            p /= p.sum();
            out.block(i, h * dh, 1, dh) = p * Vh.topRows(i + 1);
        }
    }
    return out;
}

// plain pre-norm transformer layer over a full sequence
Mat pl_layer(const nn::ParamStore &p, const Model::LayerIds &L, const Mat &x_in, int heads,
             bool use_rope) {
    Mat h = pl_ln(x_in, p.value(L.ln1_g), p.value(L.ln1_b));
    Mat q = h * p.value(L.wq), k = h * p.value(L.wk), v = h * p.value(L.wv);
    if (use_rope) {
        q = pl_rope(q, 0);
        k = pl_rope(k, 0);
    }
    Mat x = x_in + pl_causal_attention(q, k, v, heads) * p.value(L.wo);
    Mat m = pl_ln(x, p.value(L.ln2_g), p.value(L.ln2_b));
    m = pl_gelu(((m * p.value(L.w1)).rowwise() + p.value(L.b1).row(0)).eval());
    return x + ((m * p.value(L.w2)).rowwise() + p.value(L.b2).row(0));
}

// graph twin of pl_layer
nn::Var graph_layer(const nn::ParamStore &p, const Model::LayerIds &L, nn::Var x, int heads,
                    bool use_rope) {
    nn::Var h = nn::layer_norm(x, nn::param(p, L.ln1_g), nn::param(p, L.ln1_b));
    nn::Var q = nn::matmul(h, nn::param(p, L.wq));
    nn::Var k = nn::matmul(h, nn::param(p, L.wk));
    nn::Var v = nn::matmul(h, nn::param(p, L.wv));
    if (use_rope) {
        q = nn::rope(q, 0, kRopeBase);
        k = nn::rope(k, 0, kRopeBase);
    }
    nn::Var a = nn::causal_attention(q, k, v, heads);
    x = nn::add(x, nn::matmul(a, nn::param(p, L.wo)));
    nn::Var m = nn::layer_norm(x, nn::param(p, L.ln2_g), nn::param(p, L.ln2_b));
    m = nn::gelu(nn::linear(m, nn::param(p, L.w1), nn::param(p, L.b1)));
    return nn::add(x, nn::linear(m, nn::param(p, L.w2), nn::param(p, L.b2)));
}

Model::LayerIds add_layer(nn::ParamStore &p, const std::string &prefix, int d, Rng &rng) {
    auto w = [&](int r, int c) { return nn::randn(rng, r, c, 1.0 / std::sqrt(double(r))); };
    Model::LayerIds L;
    L.ln1_g = p.add(prefix + ".ln1.g", Mat::Ones(1, d), false);
    L.ln1_b = p.add(prefix + ".ln1.b", Mat::Zero(1, d), false);
    L.wq = p.add(prefix + ".wq", w(d, d));
    L.wk = p.add(prefix + ".wk", w(d, d));
    L.wv = p.add(prefix + ".wv", w(d, d));
    L.wo = p.add(prefix + ".wo", w(d, d) * 0.5);
    L.ln2_g = p.add(prefix + ".ln2.g", Mat::Ones(1, d), false);
    L.ln2_b = p.add(prefix + ".ln2.b", Mat::Zero(1, d), false);
    L.w1 = p.add(prefix + ".mlp.w1", w(d, 4 * d));
    L.b1 = p.add(prefix + ".mlp.b1", Mat::Zero(1, 4 * d), false);
    L.w2 = p.add(prefix + ".mlp.w2", w(4 * d, d) * 0.5);
    L.b2 = p.add(prefix + ".mlp.b2", Mat::Zero(1, d), false);
    return L;
}

// depth transformer input rows for one frame: hidden prefix then the
// embeddings of levels 1..n-1, each with its learned position added
Mat depth_inputs(const Model &m, const RowVec &hidden, const codec::FrameTokens &frame,
                 int n_rows) {
    const auto &p = m.params;
    const Mat &pos = p.value(m.ids.depth_pos);
    Mat x(n_rows, m.cfg.d_depth);
    x.row(0) = hidden * p.value(m.ids.depth_in) + pos.row(0);
    for (int r = 1; r < n_rows; ++r)
        x.row(r) = p.value(m.ids.depth_emb[size_t(r - 1)]).row(frame.idx[size_t(r - 1)]) +
                   pos.row(r);
    return x;
}

Mat depth_forward_plain(const Model &m, const Mat &x_in) {
    Mat x = x_in;
    for (const auto &L : m.ids.depth) x = pl_layer(m.params, L, x, m.cfg.n_heads_depth, false);
    return pl_ln(x, m.params.value(m.ids.depth_lnf_g), m.params.value(m.ids.depth_lnf_b));
}

}  // namespace

ModelConfig ModelConfig::from_config(const Config &c, const vocab::VocabSpec &v) {
    ModelConfig m;
    m.d_model = int(c.get_int("model.d_model", m.d_model));
    m.n_layers = int(c.get_int("model.n_layers", m.n_layers));
    m.n_heads = int(c.get_int("model.n_heads", m.n_heads));
    m.max_context_steps = int(c.get_int("model.max_context_steps", m.max_context_steps));
    m.d_depth = int(c.get_int("model.d_depth", m.d_depth));
    m.n_layers_depth = int(c.get_int("model.n_layers_depth", m.n_layers_depth));
    m.n_heads_depth = int(c.get_int("model.n_heads_depth", m.n_heads_depth));
    m.d_spk = int(c.get_int("model.d_spk", m.d_spk));
    m.temperature = c.get_real("model.temperature", m.temperature);
    m.top_k = int(c.get_int("model.top_k", m.top_k));
    m.attach_vocab(v);
    return m;
}

void ModelConfig::attach_vocab(const vocab::VocabSpec &v) {
    n_vocab = v.total_size();
    n_text_head = v.n_specials() + v.n_text();
    n_audio_k = v.K();
    validate();
}

void ModelConfig::validate() const {
    if (d_model % n_heads != 0) throw ConfigError("model: d_model not divisible by heads");
    if (d_depth % n_heads_depth != 0) throw ConfigError("model: d_depth not divisible by heads");
    if ((d_model / n_heads) % 2 != 0 || (d_depth / n_heads_depth) % 2 != 0)
        throw ConfigError("model: head dims must be even");
    if (n_vocab <= 0 || n_text_head <= 0 || n_audio_k <= 0)
        throw ConfigError("model: vocabulary sizes not attached");
    if (max_context_steps < 8) throw ConfigError("model: context too small");
}

int head_target(const ModelConfig &cfg, const align::Step &s) {
    if (s.kind == align::StepKind::Audio) return cfg.audio_step_slot();
    int id = s.lanes[0];
    if (id < 0 || id >= cfg.n_text_head)
        throw InputError("head_target: token id outside the step head");
    return id;
}

Model Model::init(const ModelConfig &cfg, Rng rng) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    auto &p = m.params;
    auto w = [&](int r, int c) { return nn::randn(rng, r, c, 1.0 / std::sqrt(double(r))); };

    m.ids.tok_emb = p.add("tok_emb", nn::randn(rng, cfg.n_vocab, cfg.d_model, 0.05), false);
    m.ids.spk_proj = p.add("spk_proj", w(cfg.d_spk, cfg.d_model));
    for (int l = 0; l < cfg.n_layers; ++l)
        m.ids.backbone.push_back(add_layer(p, "bb" + std::to_string(l), cfg.d_model, rng));
    m.ids.lnf_g = p.add("lnf.g", Mat::Ones(1, cfg.d_model), false);
    m.ids.lnf_b = p.add("lnf.b", Mat::Zero(1, cfg.d_model), false);
    m.ids.head_w = p.add("head.w", w(cfg.d_model, cfg.head_size()));
    m.ids.head_b = p.add("head.b", Mat::Zero(1, cfg.head_size()), false);

    m.ids.depth_in = p.add("depth.in", w(cfg.d_model, cfg.d_depth));
    for (int q = 0; q < 4; ++q)
        m.ids.depth_emb[size_t(q)] = p.add("depth.emb" + std::to_string(q + 1),
                                           nn::randn(rng, cfg.n_audio_k, cfg.d_depth, 0.05), false);
    m.ids.depth_pos = p.add("depth.pos", nn::randn(rng, 5, cfg.d_depth, 0.05), false);
    for (int l = 0; l < cfg.n_layers_depth; ++l)
        m.ids.depth.push_back(add_layer(p, "dp" + std::to_string(l), cfg.d_depth, rng));
    m.ids.depth_lnf_g = p.add("depth.lnf.g", Mat::Ones(1, cfg.d_depth), false);
    m.ids.depth_lnf_b = p.add("depth.lnf.b", Mat::Zero(1, cfg.d_depth), false);
    for (int q = 0; q < 4; ++q) {
        m.ids.depth_head_w[size_t(q)] =
            p.add("depth.head" + std::to_string(q + 1) + ".w", w(cfg.d_depth, cfg.n_audio_k));
        m.ids.depth_head_b[size_t(q)] =
            p.add("depth.head" + std::to_string(q + 1) + ".b", Mat::Zero(1, cfg.n_audio_k), false);
    }
    return m;
}

void Model::require_trained(const char *op) const {
    if (!trained) throw StateError(std::string(op) + ": untrained model");
}

void TrainSample::validate(const ModelConfig &cfg) const {
    size_t T = inputs.size();
    if (T == 0) throw InputError("train sample: empty");
    if (head_targets.size() != T || depth_targets.size() != T || mask.size() != T)
        throw InputError("train sample: parallel arrays differ in length");
    if (int(T) > cfg.max_context_steps) throw InputError("train sample: longer than the context");
    for (size_t t = 0; t < T; ++t)
        if (mask[t] && (head_targets[t] < 0 || head_targets[t] >= cfg.head_size()))
            throw InputError("train sample: masked target out of range");
    if (ref_index >= int(T)) throw InputError("train sample: ref index out of range");
    if (!fused.empty() && fused.size() != T)
        throw InputError("train sample: fused stream length mismatch");
    if (ref_index >= 0 && speaker) {
        if (int(speaker->size()) != cfg.d_spk) throw InputError("train sample: bad speaker dim");
        if (std::abs(speaker->norm() - 1.0) > 1e-6)
            throw InputError("train sample: speaker embedding not unit norm");
    }
}

// ---- embedding ----

namespace {

nn::Var embed_steps_graph(const Model &m, const std::vector<align::Step> &steps, int ref_index,
                          const Vec *speaker,
                          const std::vector<std::optional<align::Step>> *fused) {
    bool two_stream = fused && !fused->empty();
    std::vector<int> flat;
    flat.reserve(steps.size() * (two_stream ? 8 : 4));
    for (size_t t = 0; t < steps.size(); ++t) {
        for (int id : steps[t].lanes) flat.push_back(id);
        if (two_stream) {
            // mean over 8 rows = average of the two 4-lane means; positions
            // without a second step duplicate their own lanes
            const align::Step &other = (*fused)[t] ? *(*fused)[t] : steps[t];
            for (int id : other.lanes) flat.push_back(id);
        }
    }
    nn::Var x =
        nn::mean_groups(nn::gather(m.params, m.ids.tok_emb, flat), two_stream ? 8 : 4);
    if (ref_index >= 0 && speaker) {
        nn::Var sp = nn::matmul(nn::constant(speaker->transpose()),
                                nn::param(m.params, m.ids.spk_proj));
        x = nn::add_to_row(x, sp, ref_index);
    }
    return x;
}

}  // namespace

Mat embed_steps(const Model &m, const std::vector<align::Step> &steps, int ref_index,
                const Vec *speaker, const std::vector<std::optional<align::Step>> *fused) {
    if (fused && !fused->empty() && fused->size() != steps.size())
        throw InputError("embed_steps: fused stream length mismatch");
    const Mat &emb = m.params.value(m.ids.tok_emb);
    Mat x = Mat::Zero(Eigen::Index(steps.size()), m.cfg.d_model);
    auto mean4 = [&](const align::Step &s) {
        RowVec row = RowVec::Zero(m.cfg.d_model);
        for (int id : s.lanes) {
            if (id < 0 || id >= m.cfg.n_vocab) throw InputError("embed_steps: id out of range");
            row += emb.row(id);
        }
        return RowVec(row / 4.0);
    };
    for (size_t t = 0; t < steps.size(); ++t) {
        x.row(Eigen::Index(t)) = mean4(steps[t]);
        if (fused && !fused->empty() && (*fused)[t])
            x.row(Eigen::Index(t)) = 0.5 * (x.row(Eigen::Index(t)) + mean4(*(*fused)[t]));
    }
    if (ref_index >= 0 && speaker) {
        if (ref_index >= int(steps.size())) throw InputError("embed_steps: bad ref index");
        x.row(ref_index) += speaker->transpose() * m.params.value(m.ids.spk_proj);
    }
    return x;
}

Mat backbone_forward(const Model &m, const Mat &x_in) {
    if (x_in.rows() > m.cfg.max_context_steps) throw StateError("backbone: context overflow");
    Mat x = x_in;
    for (const auto &L : m.ids.backbone) x = pl_layer(m.params, L, x, m.cfg.n_heads, true);
    return pl_ln(x, m.params.value(m.ids.lnf_g), m.params.value(m.ids.lnf_b));
}

RowVec head_logits(const Model &m, const RowVec &hidden) {
    return hidden * m.params.value(m.ids.head_w) + m.params.value(m.ids.head_b).row(0);
}

Mat depth_logits_teacher(const Model &m, const RowVec &hidden, const codec::FrameTokens &target) {
    Mat x = depth_inputs(m, hidden, target, 4);
    Mat h = depth_forward_plain(m, x);
    Mat logits(4, m.cfg.n_audio_k);
    for (int q = 0; q < 4; ++q)
        logits.row(q) = h.row(q) * m.params.value(m.ids.depth_head_w[size_t(q)]) +
                        m.params.value(m.ids.depth_head_b[size_t(q)]).row(0);
    return logits;
}

// ---- training loss ----

LossReport model_loss(const Model &m, const std::vector<TrainSample> &batch, nn::Grads *grads) {
    if (batch.empty()) throw InputError("model_loss: empty batch");
    const auto &cfg = m.cfg;
    for (const auto &s : batch) s.validate(cfg);

    LossReport rep;
    for (const auto &s : batch)
        for (size_t t = 0; t < s.inputs.size(); ++t)
            if (s.mask[t]) {
                rep.masked++;
                if (s.head_targets[t] == cfg.audio_step_slot()) rep.audio_masked++;
            }
    if (rep.masked == 0) return rep;

    nn::Var total = nn::constant_scalar(0.0);
    long head_correct = 0;

    for (const auto &s : batch) {
        nn::Var x = embed_steps_graph(m, s.inputs, s.ref_index, s.speaker ? &*s.speaker : nullptr,
                                      &s.fused);
        for (const auto &L : m.ids.backbone) x = graph_layer(m.params, L, x, cfg.n_heads, true);
        nn::Var h = nn::layer_norm(x, nn::param(m.params, m.ids.lnf_g),
                                   nn::param(m.params, m.ids.lnf_b));
        nn::Var logits =
            nn::linear(h, nn::param(m.params, m.ids.head_w), nn::param(m.params, m.ids.head_b));

        std::vector<int> targets(s.inputs.size(), 0);
        std::vector<double> weights(s.inputs.size(), 0.0);
        for (size_t t = 0; t < s.inputs.size(); ++t) {
            if (!s.mask[t]) continue;
            targets[t] = s.head_targets[t];
            weights[t] = 1.0;
            Eigen::Index best;
            logits->v().row(Eigen::Index(t)).maxCoeff(&best);
            if (int(best) == s.head_targets[t]) head_correct++;
        }
        nn::Var head_ce = nn::softmax_ce(logits, targets, weights, double(rep.masked));
        rep.head += head_ce->scalar();
        total = nn::add(total, head_ce);

        if (rep.audio_masked > 0) {
            for (size_t t = 0; t < s.inputs.size(); ++t) {
                if (!s.mask[t] || s.head_targets[t] != cfg.audio_step_slot()) continue;
                const codec::FrameTokens &frame = s.depth_targets[t];
                // depth sequence: projected hidden prefix, then levels 1..4
                nn::Var prefix = nn::add(nn::matmul(nn::rows(h, int(t), 1),
                                                    nn::param(m.params, m.ids.depth_in)),
                                         nn::rows(nn::param(m.params, m.ids.depth_pos), 0, 1));
                std::vector<nn::Var> drows{prefix};
                for (int q = 0; q < 4; ++q)
                    drows.push_back(nn::add(
                        nn::gather(m.params, m.ids.depth_emb[size_t(q)], {int(frame.idx[size_t(q)])}),
                        nn::rows(nn::param(m.params, m.ids.depth_pos), q + 1, 1)));
                nn::Var dx = nn::vstack(drows);
                for (const auto &L : m.ids.depth)
                    dx = graph_layer(m.params, L, dx, cfg.n_heads_depth, false);
                nn::Var dh = nn::layer_norm(dx, nn::param(m.params, m.ids.depth_lnf_g),
                                            nn::param(m.params, m.ids.depth_lnf_b));
                for (int q = 0; q < 4; ++q) {
                    nn::Var dl = nn::linear(nn::rows(dh, q, 1),
                                            nn::param(m.params, m.ids.depth_head_w[size_t(q)]),
                                            nn::param(m.params, m.ids.depth_head_b[size_t(q)]));
                    nn::Var ce = nn::softmax_ce(dl, {int(frame.idx[size_t(q)])}, {1.0},
                                                double(rep.audio_masked));
                    rep.depth_level[size_t(q)] += ce->scalar();
                    total = nn::add(total, ce);
                }
            }
        }
    }

    for (double d : rep.depth_level) rep.depth += d;
    rep.total = total->scalar();
    rep.head_accuracy = double(head_correct) / double(rep.masked);
    if (!std::isfinite(rep.total))
        throw StateError("model_loss: non-finite loss; head=" + std::to_string(rep.head) +
                         " depth=" + std::to_string(rep.depth));
    if (grads) nn::backward(total, *grads);
    return rep;
}

// ---- incremental decoding ----

RowVec backbone_step(const Model &m, SessionState &st, const RowVec &x_in) {
    const auto &cfg = m.cfg;
    if (st.k_cache.empty()) {
        st.k_cache.assign(size_t(cfg.n_layers), Mat(0, cfg.d_model));
        st.v_cache.assign(size_t(cfg.n_layers), Mat(0, cfg.d_model));
    }
    if (st.k_cache[0].rows() >= cfg.max_context_steps)
        throw StateError("backbone_step: context overflow");
    int pos = st.step_counter;
    int dh = cfg.d_model / cfg.n_heads;
    double inv_scale = 1.0 / std::sqrt(double(dh));
    const auto &p = m.params;

    Mat x = x_in;  // 1 x d
    for (size_t l = 0; l < m.ids.backbone.size(); ++l) {
        const auto &L = m.ids.backbone[l];
        Mat hn = pl_ln(x, p.value(L.ln1_g), p.value(L.ln1_b));
        RowVec q = hn.row(0) * p.value(L.wq);
        RowVec k = hn.row(0) * p.value(L.wk);
        RowVec v = hn.row(0) * p.value(L.wv);
        pl_rope_row(q, pos);
        pl_rope_row(k, pos);
        Mat &K = st.k_cache[l];
        Mat &V = st.v_cache[l];
        Eigen::Index r = K.rows();  // equals pos unless old rows were trimmed
        K.conservativeResize(r + 1, cfg.d_model);
        V.conservativeResize(r + 1, cfg.d_model);
        K.row(r) = k;
        V.row(r) = v;

        RowVec attn(cfg.d_model);
        for (int hd = 0; hd < cfg.n_heads; ++hd) {
            auto Qh = q.segment(hd * dh, dh);
            auto Kh = K.middleCols(hd * dh, dh);
            auto Vh = V.middleCols(hd * dh, dh);
            Eigen::VectorXd s = (Kh * Qh.transpose()) * inv_scale;
            double mx = s.maxCoeff();
            Eigen::VectorXd pr = (s.array() - mx).exp();
            pr /= pr.sum();
            attn.segment(hd * dh, dh) = pr.transpose() * Vh;
        }
        x = x + attn * p.value(L.wo);
        Mat mn = pl_ln(x, p.value(L.ln2_g), p.value(L.ln2_b));
        Mat mm = pl_gelu(((mn * p.value(L.w1)).rowwise() + p.value(L.b1).row(0)).eval());
        x = x + ((mm * p.value(L.w2)).rowwise() + p.value(L.b2).row(0));
    }
    st.step_counter++;
    return pl_ln(x, p.value(m.ids.lnf_g), p.value(m.ids.lnf_b)).row(0);
}

void trim_context(SessionState &st, int keep_last) {
    if (keep_last < 1) throw InputError("trim_context: window must be positive");
    for (size_t l = 0; l < st.k_cache.size(); ++l) {
        Eigen::Index r = st.k_cache[l].rows();
        if (r <= keep_last) continue;
        st.k_cache[l] = st.k_cache[l].bottomRows(keep_last).eval();
        st.v_cache[l] = st.v_cache[l].bottomRows(keep_last).eval();
    }
}

int sample_from_logits(const RowVec &logits, SampleMode mode, double temperature, int top_k,
                       Rng &rng) {
    Eigen::Index n = logits.size();
    if (mode == SampleMode::Greedy || temperature <= 0.0) {
        Eigen::Index best;
        logits.maxCoeff(&best);
        return int(best);
    }
    std::vector<int> order(size_t(n), 0);
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return logits(a) != logits(b) ? logits(a) > logits(b) : a < b;
    });
    int keep = top_k > 0 ? std::min<int>(top_k, int(n)) : int(n);
    double mx = logits(order[0]);
    std::vector<double> pr(size_t(keep), 0.0);
    double z = 0;
    for (int i = 0; i < keep; ++i) {
        pr[size_t(i)] = std::exp((logits(order[size_t(i)]) - mx) / temperature);
        z += pr[size_t(i)];
    }
    double u = rng.uniform() * z, acc = 0;
    for (int i = 0; i < keep; ++i) {
        acc += pr[size_t(i)];
        if (u < acc) return order[size_t(i)];
    }
    return order[size_t(keep - 1)];
}

codec::FrameTokens depth_decode(const Model &m, const RowVec &hidden, SampleMode mode, Rng &rng) {
    codec::FrameTokens frame;
    for (int q = 0; q < 4; ++q) {
        // rows 0..q are determined by the levels chosen so far
        Mat x = depth_inputs(m, hidden, frame, q + 1);
        Mat h = depth_forward_plain(m, x);
        RowVec logits = h.row(q) * m.params.value(m.ids.depth_head_w[size_t(q)]) +
                        m.params.value(m.ids.depth_head_b[size_t(q)]).row(0);
        frame.idx[size_t(q)] = uint16_t(
            sample_from_logits(logits, mode, m.cfg.temperature, m.cfg.top_k, rng));
    }
    return frame;
}

GenerateResult generate(const Model &m, const vocab::VocabSpec &v,
                        const align::InterleavedSequence &prompt,
                        const std::optional<Vec> &speaker, GenerateLimits limits,
                        SampleMode mode, Rng &rng) {
    if (prompt.steps.empty()) throw InputError("generate: empty prompt");
    Mat x = embed_steps(m, prompt.steps, prompt.ref_index, speaker ? &*speaker : nullptr);
    SessionState st;
    RowVec hidden;
    for (Eigen::Index t = 0; t < x.rows(); ++t) hidden = backbone_step(m, st, x.row(t));

    GenerateResult out;
    out.response.task = prompt.task;
    bool stopped = false;
    for (int i = 0; i < limits.max_steps; ++i) {
        int id = sample_from_logits(head_logits(m, hidden), mode, m.cfg.temperature, m.cfg.top_k,
                                    rng);
        align::Step step;
        if (id == m.cfg.audio_step_slot()) {
            step = align::Step::audio(v, depth_decode(m, hidden, mode, rng));
        } else if (id < v.n_specials()) {
            step = align::Step::special(id);
        } else {
            step = align::Step::text(id);
        }
        out.response.steps.push_back(step);
        out.response.loss_mask.push_back(1);
        if (step.kind == align::StepKind::Special && step.token() == vocab::kEos) {
            stopped = true;
            break;
        }
        Mat xe = embed_steps(m, {step}, -1, nullptr);
        hidden = backbone_step(m, st, xe.row(0));
    }
    out.truncated = !stopped;
    return out;
}

}  // namespace voila::model
