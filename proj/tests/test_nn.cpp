#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "voila/nn.hpp"

using namespace voila;
using namespace voila::nn;

namespace {

// Central finite differences against the analytic gradient of an arbitrary
// scalar-valued graph over a ParamStore.
double fd_grad(ParamStore &ps, int pid, int r, int c,
               const std::function<double(const ParamStore &)> &f, double h = 1e-6) {
    double orig = ps.value(pid)(r, c);
    ps.value(pid)(r, c) = orig + h;
    double up = f(ps);
    ps.value(pid)(r, c) = orig - h;
    double dn = f(ps);
    ps.value(pid)(r, c) = orig;
    return (up - dn) / (2.0 * h);
}

void check_all_grads(ParamStore &ps, const std::function<Var(const ParamStore &)> &build,
                     double tol = 1e-6) {
    Grads grads(ps);
    Var root = build(ps);
    backward(root, grads);
    auto f = [&](const ParamStore &p) { return build(p)->scalar(); };
    for (size_t pid = 0; pid < ps.size(); ++pid) {
        if (!grads.has[pid]) continue;
        const Mat &g = grads.g[pid];
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            for (Eigen::Index cc = 0; cc < g.cols(); ++cc) {
                double num = fd_grad(ps, int(pid), int(r), int(cc), f);
                double ana = g(r, cc);
                double scale = std::max({1.0, std::abs(num), std::abs(ana)});
                CHECK(std::abs(num - ana) / scale < tol);
            }
        }
    }
}

ParamStore make_store(Rng &rng, std::initializer_list<std::pair<const char *, std::pair<int, int>>> specs) {
    ParamStore ps;
    for (auto &[name, shape] : specs)
        ps.add(name, randn(rng, shape.first, shape.second, 0.7));
    return ps;
}

}  // namespace

TEST_CASE("matmul/add/activations gradients match finite differences") {
    Rng rng(1);
    ParamStore ps = make_store(rng, {{"a", {3, 4}}, {"w", {4, 5}}, {"b", {1, 5}}});
    check_all_grads(ps, [](const ParamStore &p) {
        Var x = linear(param(p, 0), param(p, 1), param(p, 2));
        return mean_all(gelu(x));
    });
    check_all_grads(ps, [](const ParamStore &p) {
        Var x = matmul(param(p, 0), param(p, 1));
        return sum_all(cmul(tanh_(x), relu(x)));
    });
    check_all_grads(ps, [](const ParamStore &p) {
        Var x = matmul(param(p, 0), param(p, 1));
        return mean_all(abs_(sub(x, scale(x, 0.3))));
    });
}

TEST_CASE("layer_norm gradient") {
    Rng rng(2);
    ParamStore ps = make_store(rng, {{"x", {4, 6}}, {"g", {1, 6}}, {"b", {1, 6}}});
    check_all_grads(ps, [](const ParamStore &p) {
        return mean_all(cmul(layer_norm(param(p, 0), param(p, 1), param(p, 2)),
                             layer_norm(param(p, 0), param(p, 1), param(p, 2))));
    });
}

TEST_CASE("rope is norm-preserving and gradient-exact") {
    Rng rng(3);
    ParamStore ps = make_store(rng, {{"x", {5, 8}}});
    Var x = param(ps, 0);
    Var r = rope(x, 7);
    for (int t = 0; t < 5; ++t)
        CHECK(r->v().row(t).norm() == doctest::Approx(x->v().row(t).norm()).epsilon(1e-12));
    check_all_grads(ps, [](const ParamStore &p) { return sum_all(cmul(rope(param(p, 0), 3), rope(param(p, 0), 3))); });
}

TEST_CASE("causal_attention matches a hand-rolled single-head oracle") {
    Rng rng(4);
    Mat q = randn(rng, 4, 6, 1.0), k = randn(rng, 4, 6, 1.0), v = randn(rng, 4, 6, 1.0);
    Var out = causal_attention(constant(q), constant(k), constant(v), 1);
    double inv = 1.0 / std::sqrt(6.0);
    for (int i = 0; i < 4; ++i) {
        Eigen::VectorXd w(i + 1);
        for (int j = 0; j <= i; ++j) w(j) = std::exp(q.row(i).dot(k.row(j)) * inv);
        w /= w.sum();
        Eigen::RowVectorXd o = Eigen::RowVectorXd::Zero(6);
        for (int j = 0; j <= i; ++j) o += w(j) * v.row(j);
        CHECK((out->v().row(i) - o).norm() < 1e-12);
    }
}

TEST_CASE("causal_attention gradient, multi-head") {
    Rng rng(5);
    ParamStore ps = make_store(rng, {{"q", {4, 8}}, {"k", {4, 8}}, {"v", {4, 8}}});
    check_all_grads(ps, [](const ParamStore &p) {
        Var o = causal_attention(param(p, 0), param(p, 1), param(p, 2), 2);
        return mean_all(cmul(o, o));
    });
}

TEST_CASE("causality: future rows never influence earlier attention output") {
    Rng rng(6);
    Mat q = randn(rng, 5, 4, 1.0), k = randn(rng, 5, 4, 1.0), v = randn(rng, 5, 4, 1.0);
    Mat out1 = causal_attention(constant(q), constant(k), constant(v), 2)->v();
    Mat q2 = q, k2 = k, v2 = v;
    q2.row(4).setConstant(99.0);
    k2.row(4).setConstant(-7.0);
    v2.row(4).setConstant(3.0);
    Mat out2 = causal_attention(constant(q2), constant(k2), constant(v2), 2)->v();
    CHECK((out1.topRows(4) - out2.topRows(4)).norm() == 0.0);
}

TEST_CASE("softmax_ce value and gradient") {
    Rng rng(7);
    ParamStore ps = make_store(rng, {{"l", {3, 5}}});
    std::vector<int> tgt{2, 0, 4};
    std::vector<double> wts{1.0, 0.0, 1.0};
    Var loss = softmax_ce(param(ps, 0), tgt, wts, 2.0);
    // independent computation
    const Mat &L = ps.value(0);
    double expect = 0.0;
    for (int t : {0, 2}) {
        double z = L.row(t).array().exp().sum();
        expect += std::log(z) - L(t, tgt[size_t(t)]);
    }
    CHECK(loss->scalar() == doctest::Approx(expect / 2.0).epsilon(1e-12));
    check_all_grads(ps, [&](const ParamStore &p) { return softmax_ce(param(p, 0), tgt, wts, 2.0); });
}

TEST_CASE("masked-out rows contribute nothing to softmax_ce") {
    Rng rng(8);
    Mat L = randn(rng, 4, 6, 1.0);
    std::vector<int> t1{1, 2, 3, 4}, t2{1, 5, 3, 0};
    std::vector<double> w{1.0, 0.0, 1.0, 0.0};
    double a = softmax_ce(constant(L), t1, w, 1.0)->scalar();
    double b = softmax_ce(constant(L), t2, w, 1.0)->scalar();
    CHECK(a == b);
}

TEST_CASE("stack_shift and overlap_frames gradients") {
    Rng rng(9);
    ParamStore ps = make_store(rng, {{"x", {5, 3}}});
    check_all_grads(ps, [](const ParamStore &p) {
        Var s = stack_shift(param(p, 0), 3);
        return mean_all(cmul(s, s));
    });
    check_all_grads(ps, [](const ParamStore &p) {
        Var s = overlap_frames(param(p, 0), 5);
        return mean_all(cmul(s, s));
    });
}

TEST_CASE("stack_shift layout") {
    Mat x(3, 2);
    x << 1, 2, 3, 4, 5, 6;
    Mat s = stack_shift(constant(x), 2)->v();
    CHECK(s.rows() == 3);
    CHECK(s.cols() == 4);
    CHECK(s(0, 0) == 1);
    CHECK(s(0, 2) == 0);  // zero pad before t=0
    CHECK(s(1, 2) == 1);  // previous frame
    CHECK(s(2, 3) == 4);
}

TEST_CASE("overlap_frames reproduces the flat sample stream") {
    Mat x(3, 2);
    x << 1, 2, 3, 4, 5, 6;
    Mat o = overlap_frames(constant(x), 3)->v();
    CHECK(o(0, 0) == 1);
    CHECK(o(0, 2) == 3);  // first sample of next frame
    CHECK(o(2, 2) == 0);  // past the end
}

TEST_CASE("gather routes gradients to the right rows") {
    Rng rng(10);
    ParamStore ps;
    ps.add("tbl", randn(rng, 6, 3, 1.0));
    Grads grads(ps);
    Var g = gather(ps, 0, {4, 1, 4});
    backward(sum_all(g), grads);
    Mat expect = Mat::Zero(6, 3);
    expect.row(4).setConstant(2.0);
    expect.row(1).setConstant(1.0);
    CHECK((grads.g[0] - expect).norm() == 0.0);
}

TEST_CASE("mean_groups and add_to_row") {
    Rng rng(11);
    ParamStore ps = make_store(rng, {{"x", {6, 4}}, {"r", {1, 4}}});
    Var m = mean_groups(param(ps, 0), 3);
    CHECK(m->v().rows() == 2);
    CHECK((m->v().row(0) - (ps.value(0).row(0) + ps.value(0).row(1) + ps.value(0).row(2)) / 3.0).norm() < 1e-14);
    check_all_grads(ps, [](const ParamStore &p) {
        Var m = mean_groups(param(p, 0), 2);
        Var a = add_to_row(m, param(p, 1), 1);
        return mean_all(cmul(a, a));
    });
}

TEST_CASE("cosine_distance endpoints and gradient") {
    Mat a(1, 3), b(1, 3);
    a << 1, 2, 3;
    b << 2, 4, 6;
    bool degen = false;
    CHECK(cosine_distance(constant(a), constant(b), 1e-12, &degen)->scalar() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(degen);
    b = -a;
    CHECK(cosine_distance(constant(a), constant(b), 1e-12, &degen)->scalar() == doctest::Approx(2.0).epsilon(1e-12));
    Mat z = Mat::Zero(1, 3);
    CHECK(cosine_distance(constant(a), constant(z), 1e-9, &degen)->scalar() == 1.0);
    CHECK(degen);

    Rng rng(12);
    ParamStore ps = make_store(rng, {{"a", {1, 5}}, {"b", {1, 5}}});
    check_all_grads(ps, [](const ParamStore &p) {
        return cosine_distance(param(p, 0), param(p, 1), 1e-12, nullptr);
    });
}

TEST_CASE("AdamW determinism") {
    auto run = [] {
        Rng rng(77);
        ParamStore ps;
        ps.add("w", randn(rng, 4, 4, 1.0));
        AdamW opt(ps);
        for (int i = 0; i < 20; ++i) {
            Grads grads(ps);
            Var loss = mean_all(cmul(param(ps, 0), param(ps, 0)));
            backward(loss, grads);
            opt.step(ps, grads, 1e-2);
        }
        return ps.value(0);
    };
    Mat a = run(), b = run();
    CHECK((a - b).norm() == 0.0);
    CHECK(a.norm() > 0.0);
}

TEST_CASE("lr schedule shape") {
    CHECK(lr_schedule(0, 100, 1000, 1.0) == doctest::Approx(0.01));
    CHECK(lr_schedule(99, 100, 1000, 1.0) == doctest::Approx(1.0));
    CHECK(lr_schedule(1000, 100, 1000, 1.0) == doctest::Approx(0.1));
    CHECK(lr_schedule(550, 100, 1000, 1.0) == doctest::Approx(0.55));
}
