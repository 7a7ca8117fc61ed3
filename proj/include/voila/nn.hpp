#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voila/common.hpp"
#include "voila/rng.hpp"

namespace voila::nn {

using Mat = Eigen::MatrixXd;

// Named parameter tensors. Values live behind shared_ptr so graph leaves can
// reference them without copying; the optimizer mutates them between graphs.
class ParamStore {
  public:
    struct Entry {
        std::string name;
        std::shared_ptr<Mat> value;
        bool decay = true;  // subject to weight decay
    };

    int add(const std::string &name, Mat init, bool decay = true);
    int find(const std::string &name) const;  // -1 if absent
    int require(const std::string &name) const;

    Mat &value(int id) { return *entries_[size_t(id)].value; }
    const Mat &value(int id) const { return *entries_[size_t(id)].value; }
    std::shared_ptr<const Mat> value_ptr(int id) const { return entries_[size_t(id)].value; }
    const Entry &entry(int id) const { return entries_[size_t(id)]; }
    size_t size() const { return entries_.size(); }

  private:
    std::vector<Entry> entries_;
};

// Per-parameter gradient sink, filled by backward().
struct Grads {
    explicit Grads(const ParamStore &ps) : g(ps.size()), has(ps.size(), 0) {}
    void add(int pid, const Mat &m);
    void add_rows(int pid, const std::vector<int> &rows, const Mat &m, const Mat &shape_like);
    void merge(const Grads &other);
    void clear();
    std::vector<Mat> g;
    std::vector<char> has;
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    std::shared_ptr<const Mat> vp;
    Mat grad;
    bool need = false;
    bool grad_init = false;
    long order = 0;
    std::vector<Var> parents;
    std::function<void(Node &, Grads &)> back;

    const Mat &v() const { return *vp; }
    double scalar() const { return (*vp)(0, 0); }
};

// Reverse-mode pass from a 1x1 root. Fills `grads` for parameter leaves.
void backward(const Var &root, Grads &grads);

// ---- graph construction ----
Var constant(Mat v);
Var constant_scalar(double v);
Var param(const ParamStore &ps, int pid);
Var gather(const ParamStore &ps, int pid, std::vector<int> rows);

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var scale(Var a, double s);
Var add_rowvec(Var x, Var b);  // b: 1xN broadcast over rows
Var relu(Var x);
Var gelu(Var x);
Var tanh_(Var x);
Var log_(Var x, double eps = 0.0);
Var sqrt_(Var x);
Var abs_(Var x);
Var sum_all(Var x);
Var mean_all(Var x);
Var rows(Var x, int r0, int n);
Var vstack(const std::vector<Var> &parts);
Var mean_groups(Var x, int group);          // consecutive row groups -> mean row
Var add_to_row(Var x, Var rowvec, int row);  // x with rowvec added to one row
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var rope(Var x, int start_pos, double base = 10000.0);
Var causal_attention(Var q, Var k, Var v, int n_heads);
// sum_i w_i * CE(logits_i, target_i) / norm
Var softmax_ce(Var logits, std::vector<int> targets, std::vector<double> weights, double norm);
Var stack_shift(Var x, int k);  // out[t] = [x[t], x[t-1], ..., x[t-k+1]], zero-padded
// x: [T x hop] contiguous sample frames; out[t] = flat samples [t*hop, t*hop+window),
// zero-padded past the end. Used to window a decoded sample stream.
Var overlap_frames(Var x, int window);

inline Var linear(Var x, Var w, Var b) { return add_rowvec(matmul(std::move(x), std::move(w)), std::move(b)); }

// 1 - cos(a, b) for 1xN rows; returns the given fallback when either norm
// is below eps (orthogonality convention for degenerate inputs).
Var cosine_distance(Var a, Var b, double eps, bool *degenerate);

// ---- optimization ----
struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
    long t = 0;
    std::vector<Mat> m, v;

    explicit AdamW(const ParamStore &ps);
    void step(ParamStore &ps, const Grads &grads, double lr);
};

// Linear warmup then cosine decay to lr_min_frac * lr_peak.
double lr_schedule(long step, long warmup, long total, double lr_peak, double lr_min_frac = 0.1);

Mat randn(Rng &rng, int rows, int cols, double std_dev);

}  // namespace voila::nn
