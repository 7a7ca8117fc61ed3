#include "voila/nn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace voila::nn {

namespace {

long next_order() {
    static long counter = 0;
    return ++counter;
}

void bump(Node &n, const Mat &g) {
    if (!n.need) return;
    if (!n.grad_init) {
        n.grad = g;
        n.grad_init = true;
    } else {
        n.grad += g;
    }
}

Var make(Mat val, std::vector<Var> parents, std::function<void(Node &, Grads &)> back) {
    auto n = std::make_shared<Node>();
    n->vp = std::make_shared<Mat>(std::move(val));
    n->parents = std::move(parents);
    for (const auto &p : n->parents)
        if (p->need) n->need = true;
    n->back = std::move(back);
    n->order = next_order();
    return n;
}

}  // namespace

int ParamStore::add(const std::string &name, Mat init, bool decay) {
    if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
    entries_.push_back({name, std::make_shared<Mat>(std::move(init)), decay});
    return int(entries_.size()) - 1;
}

int ParamStore::find(const std::string &name) const {
    for (size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return int(i);
    return -1;
}

int ParamStore::require(const std::string &name) const {
    int id = find(name);
    if (id < 0) throw StateError("missing parameter: " + name);
    return id;
}

void Grads::add(int pid, const Mat &m) {
    if (!has[size_t(pid)]) {
        g[size_t(pid)] = m;
        has[size_t(pid)] = 1;
    } else {
        g[size_t(pid)] += m;
    }
}

void Grads::add_rows(int pid, const std::vector<int> &rws, const Mat &m, const Mat &shape_like) {
    if (!has[size_t(pid)]) {
        g[size_t(pid)] = Mat::Zero(shape_like.rows(), shape_like.cols());
        has[size_t(pid)] = 1;
    }
    for (size_t i = 0; i < rws.size(); ++i) g[size_t(pid)].row(rws[i]) += m.row(Eigen::Index(i));
}

void Grads::merge(const Grads &other) {
    for (size_t i = 0; i < g.size(); ++i) {
        if (!other.has[i]) continue;
        if (!has[i]) {
            g[i] = other.g[i];
            has[i] = 1;
        } else {
            g[i] += other.g[i];
        }
    }
}

void Grads::clear() {
    for (size_t i = 0; i < g.size(); ++i) {
        has[i] = 0;
        g[i].resize(0, 0);
    }
}

void backward(const Var &root, Grads &grads) {
    if (root->v().rows() != 1 || root->v().cols() != 1)
        throw InputError("backward: root must be a 1x1 scalar");
    if (!root->need) return;

    std::vector<Node *> topo;
    std::unordered_set<Node *> seen;
    std::vector<Var> stack{root};
    while (!stack.empty()) {
        Var cur = stack.back();
        stack.pop_back();
        if (!cur->need || seen.count(cur.get())) continue;
        seen.insert(cur.get());
        topo.push_back(cur.get());
        for (const auto &p : cur->parents) stack.push_back(p);
    }
    std::sort(topo.begin(), topo.end(), [](Node *a, Node *b) { return a->order > b->order; });

    root->grad = Mat::Ones(1, 1);
    root->grad_init = true;
    for (Node *n : topo) {
        if (n->grad_init && n->back) n->back(*n, grads);
    }
    // release grad buffers held by intermediate nodes
    for (Node *n : topo) {
        n->grad.resize(0, 0);
        n->grad_init = false;
    }
}

Var constant(Mat v) { return make(std::move(v), {}, nullptr); }

Var constant_scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

Var param(const ParamStore &ps, int pid) {
    auto n = std::make_shared<Node>();
    n->vp = ps.value_ptr(pid);
    n->need = true;
    n->order = next_order();
    n->back = [pid](Node &self, Grads &gr) { gr.add(pid, self.grad); };
    return n;
}

Var gather(const ParamStore &ps, int pid, std::vector<int> rws) {
    const Mat &tbl = ps.value(pid);
    Mat out(Eigen::Index(rws.size()), tbl.cols());
    for (size_t i = 0; i < rws.size(); ++i) out.row(Eigen::Index(i)) = tbl.row(rws[i]);
    auto shape = ps.value_ptr(pid);
    auto n = make(std::move(out), {}, nullptr);
    n->need = true;
    n->back = [pid, rws = std::move(rws), shape](Node &self, Grads &gr) {
        gr.add_rows(pid, rws, self.grad, *shape);
    };
    return n;
}

Var matmul(Var a, Var b) {
    Mat out = a->v() * b->v();
    return make(std::move(out), {a, b}, [](Node &self, Grads &) {
        Node &a = *self.parents[0], &b = *self.parents[1];
        if (a.need) bump(a, self.grad * b.v().transpose());
        if (b.need) bump(b, a.v().transpose() * self.grad);
    });
}

Var add(Var a, Var b) {
    Mat out = a->v() + b->v();
    return make(std::move(out), {a, b}, [](Node &self, Grads &) {
        bump(*self.parents[0], self.grad);
        bump(*self.parents[1], self.grad);
    });
}

Var sub(Var a, Var b) {
    Mat out = a->v() - b->v();
    return make(std::move(out), {a, b}, [](Node &self, Grads &) {
        bump(*self.parents[0], self.grad);
        bump(*self.parents[1], -self.grad);
    });
}

Var cmul(Var a, Var b) {
    Mat out = a->v().cwiseProduct(b->v());
    return make(std::move(out), {a, b}, [](Node &self, Grads &) {
        Node &a = *self.parents[0], &b = *self.parents[1];
        if (a.need) bump(a, self.grad.cwiseProduct(b.v()));
        if (b.need) bump(b, self.grad.cwiseProduct(a.v()));
    });
}

Var scale(Var a, double s) {
    Mat out = a->v() * s;
    return make(std::move(out), {a}, [s](Node &self, Grads &) {
        bump(*self.parents[0], self.grad * s);
    });
}

Var add_rowvec(Var x, Var b) {
    if (b->v().rows() != 1 || b->v().cols() != x->v().cols())
        throw InputError("add_rowvec: shape mismatch");
    Mat out = x->v().rowwise() + b->v().row(0);
    return make(std::move(out), {x, b}, [](Node &self, Grads &) {
        bump(*self.parents[0], self.grad);
        Node &b = *self.parents[1];
        if (b.need) bump(b, self.grad.colwise().sum());
    });
}

Var relu(Var x) {
    Mat out = x->v().cwiseMax(0.0);
    return make(std::move(out), {x}, [](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Mat g = self.grad;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            if (x.v()(i) <= 0.0) g(i) = 0.0;
        bump(x, g);
    });
}

Var gelu(Var x) {
    const double c = 0.7978845608028654;  // sqrt(2/pi)
    const Mat &xv = x->v();
    Mat out(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < xv.size(); ++i) {
        double v = xv(i);
        out(i) = 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
    }
    return make(std::move(out), {x}, [c](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Mat g(self.grad.rows(), self.grad.cols());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            double v = x.v()(i);
            double u = c * (v + 0.044715 * v * v * v);
            double t = std::tanh(u);
            double du = c * (1.0 + 3.0 * 0.044715 * v * v);
            double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
            g(i) = self.grad(i) * d;
        }
        bump(x, g);
    });
}

Var tanh_(Var x) {
    Mat out = x->v().array().tanh().matrix();
    return make(std::move(out), {x}, [](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Mat t = self.v();
        Mat g = self.grad.cwiseProduct((1.0 - t.array().square()).matrix());
        bump(x, g);
    });
}

Var log_(Var x, double eps) {
    Mat out = (x->v().array() + eps).log().matrix();
    return make(std::move(out), {x}, [eps](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        bump(x, (self.grad.array() / (x.v().array() + eps)).matrix());
    });
}

Var sqrt_(Var x) {
    Mat out = x->v().array().sqrt().matrix();
    return make(std::move(out), {x}, [](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        bump(x, (self.grad.array() * 0.5 / self.v().array().max(1e-300)).matrix());
    });
}

Var abs_(Var x) {
    Mat out = x->v().cwiseAbs();
    return make(std::move(out), {x}, [](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Mat g(self.grad.rows(), self.grad.cols());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            double v = x.v()(i);
            g(i) = self.grad(i) * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
        }
        bump(x, g);
    });
}

Var sum_all(Var x) {
    Mat out(1, 1);
    out(0, 0) = x->v().sum();
    return make(std::move(out), {x}, [](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        bump(x, Mat::Constant(x.v().rows(), x.v().cols(), self.grad(0, 0)));
    });
}

Var mean_all(Var x) {
    double n = double(x->v().size());
    return scale(sum_all(std::move(x)), 1.0 / n);
}

Var rows(Var x, int r0, int n) {
    Mat out = x->v().middleRows(r0, n);
    return make(std::move(out), {x}, [r0, n](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Mat g = Mat::Zero(x.v().rows(), x.v().cols());
        g.middleRows(r0, n) = self.grad;
        bump(x, g);
    });
}

Var vstack(const std::vector<Var> &parts) {
    if (parts.empty()) throw InputError("vstack: empty");
    Eigen::Index total = 0;
    for (const auto &p : parts) total += p->v().rows();
    Mat out(total, parts[0]->v().cols());
    Eigen::Index r = 0;
    for (const auto &p : parts) {
        out.middleRows(r, p->v().rows()) = p->v();
        r += p->v().rows();
    }
    return make(std::move(out), parts, [](Node &self, Grads &) {
        Eigen::Index r = 0;
        for (auto &pv : self.parents) {
            Node &p = *pv;
            if (p.need) bump(p, self.grad.middleRows(r, p.v().rows()));
            r += p.v().rows();
        }
    });
}

Var mean_groups(Var x, int group) {
    if (x->v().rows() % group != 0) throw InputError("mean_groups: rows not divisible");
    Eigen::Index n = x->v().rows() / group;
    Mat out = Mat::Zero(n, x->v().cols());
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < group; ++j) out.row(i) += x->v().row(i * group + j);
    out /= double(group);
    return make(std::move(out), {x}, [group](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Mat g(x.v().rows(), x.v().cols());
        for (Eigen::Index i = 0; i < self.grad.rows(); ++i)
            for (int j = 0; j < group; ++j)
                g.row(i * group + j) = self.grad.row(i) / double(group);
        bump(x, g);
    });
}

Var add_to_row(Var x, Var rowvec, int row) {
    if (rowvec->v().rows() != 1 || rowvec->v().cols() != x->v().cols())
        throw InputError("add_to_row: shape mismatch");
    Mat out = x->v();
    out.row(row) += rowvec->v().row(0);
    return make(std::move(out), {x, rowvec}, [row](Node &self, Grads &) {
        bump(*self.parents[0], self.grad);
        Node &rv = *self.parents[1];
        if (rv.need) bump(rv, self.grad.row(row));
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Mat &xv = x->v();
    Eigen::Index T = xv.rows(), d = xv.cols();
    auto xhat = std::make_shared<Mat>(T, d);
    auto inv_sigma = std::make_shared<Eigen::VectorXd>(T);
    Mat out(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        double mu = xv.row(t).mean();
        double var = (xv.row(t).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)(t) = is;
        xhat->row(t) = (xv.row(t).array() - mu) * is;
        out.row(t) = xhat->row(t).cwiseProduct(gain->v().row(0)) + bias->v().row(0);
    }
    return make(std::move(out), {x, gain, bias}, [xhat, inv_sigma](Node &self, Grads &) {
        Node &x = *self.parents[0], &gain = *self.parents[1], &bias = *self.parents[2];
        Eigen::Index T = x.v().rows(), d = x.v().cols();
        if (gain.need) {
            Mat gg = (self.grad.cwiseProduct(*xhat)).colwise().sum();
            bump(gain, gg);
        }
        if (bias.need) bump(bias, self.grad.colwise().sum());
        if (x.need) {
            Mat gx(T, d);
            for (Eigen::Index t = 0; t < T; ++t) {
                Eigen::RowVectorXd dy = self.grad.row(t).cwiseProduct(gain.v().row(0));
                double m1 = dy.mean();
                double m2 = dy.cwiseProduct(xhat->row(t)).mean();
                gx.row(t) =
                    ((dy.array() - m1 - xhat->row(t).array() * m2) * (*inv_sigma)(t)).matrix();
            }
            bump(x, gx);
        }
    });
}

Var rope(Var x, int start_pos, double base) {
    const Mat &xv = x->v();
    Eigen::Index T = xv.rows(), d = xv.cols();
    if (d % 2 != 0) throw InputError("rope: dimension must be even");
    Mat out(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        double pos = double(start_pos + t);
        for (Eigen::Index i = 0; i < d / 2; ++i) {
            double theta = pos * std::pow(base, -2.0 * double(i) / double(d));
            double c = std::cos(theta), s = std::sin(theta);
            double a = xv(t, 2 * i), b = xv(t, 2 * i + 1);
            out(t, 2 * i) = a * c - b * s;
            out(t, 2 * i + 1) = a * s + b * c;
        }
    }
    return make(std::move(out), {x}, [start_pos, base](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Eigen::Index T = x.v().rows(), d = x.v().cols();
        Mat g(T, d);
        for (Eigen::Index t = 0; t < T; ++t) {
            double pos = double(start_pos + t);
            for (Eigen::Index i = 0; i < d / 2; ++i) {
                double theta = pos * std::pow(base, -2.0 * double(i) / double(d));
                double c = std::cos(theta), s = std::sin(theta);
                double da = self.grad(t, 2 * i), db = self.grad(t, 2 * i + 1);
                g(t, 2 * i) = da * c + db * s;  // inverse rotation
                g(t, 2 * i + 1) = -da * s + db * c;
            }
        }
        bump(x, g);
    });
}

Var causal_attention(Var q, Var k, Var v, int n_heads) {
    Eigen::Index T = q->v().rows(), d = q->v().cols();
    if (d % n_heads != 0) throw InputError("causal_attention: d not divisible by heads");
    Eigen::Index dh = d / n_heads;
    double inv_scale = 1.0 / std::sqrt(double(dh));
    auto probs = std::make_shared<std::vector<Mat>>();
    probs->reserve(size_t(n_heads));
    Mat out(T, d);
    for (int h = 0; h < n_heads; ++h) {
        auto Qh = q->v().middleCols(h * dh, dh);
        auto Kh = k->v().middleCols(h * dh, dh);
        auto Vh = v->v().middleCols(h * dh, dh);
        Mat S = (Qh * Kh.transpose()) * inv_scale;
        Mat P = Mat::Zero(T, T);
        for (Eigen::Index i = 0; i < T; ++i) {
            double mx = S.row(i).head(i + 1).maxCoeff();
            double z = 0.0;
            for (Eigen::Index j = 0; j <= i; ++j) {
                P(i, j) = std::exp(S(i, j) - mx);
                z += P(i, j);
            }
            P.row(i).head(i + 1) /= z;
        }
        out.middleCols(h * dh, dh) = P * Vh;
        probs->push_back(std::move(P));
    }
    return make(std::move(out), {q, k, v},
                [n_heads, dh, inv_scale, probs](Node &self, Grads &) {
                    Node &q = *self.parents[0], &k = *self.parents[1], &v = *self.parents[2];
                    Eigen::Index T = q.v().rows(), d = q.v().cols();
                    Mat gq = Mat::Zero(T, d), gk = Mat::Zero(T, d), gv = Mat::Zero(T, d);
                    for (int h = 0; h < n_heads; ++h) {
                        const Mat &P = (*probs)[size_t(h)];
                        auto Qh = q.v().middleCols(h * dh, dh);
                        auto Kh = k.v().middleCols(h * dh, dh);
                        auto Vh = v.v().middleCols(h * dh, dh);
                        auto gO = self.grad.middleCols(h * dh, dh);
                        Mat dP = gO * Vh.transpose();
                        gv.middleCols(h * dh, dh) = P.transpose() * gO;
                        Mat dS(T, T);
                        for (Eigen::Index i = 0; i < T; ++i) {
                            double dot = dP.row(i).cwiseProduct(P.row(i)).sum();
                            dS.row(i) = P.row(i).cwiseProduct(dP.row(i).array().matrix() -
                                                              Eigen::RowVectorXd::Constant(T, dot));
                        }
                        gq.middleCols(h * dh, dh) = (dS * Kh) * inv_scale;
                        gk.middleCols(h * dh, dh) = (dS.transpose() * Qh) * inv_scale;
                    }
                    bump(q, gq);
                    bump(k, gk);
                    bump(v, gv);
                });
}

Var softmax_ce(Var logits, std::vector<int> targets, std::vector<double> weights, double norm) {
    const Mat &L = logits->v();
    Eigen::Index T = L.rows();
    if (Eigen::Index(targets.size()) != T || Eigen::Index(weights.size()) != T)
        throw InputError("softmax_ce: target/weight length mismatch");
    double loss = 0.0;
    auto lse = std::make_shared<Eigen::VectorXd>(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        if (weights[size_t(t)] == 0.0) continue;
        double mx = L.row(t).maxCoeff();
        double z = (L.row(t).array() - mx).exp().sum();
        double l = mx + std::log(z);
        (*lse)(t) = l;
        loss += weights[size_t(t)] * (l - L(t, targets[size_t(t)]));
    }
    Mat out(1, 1);
    out(0, 0) = loss / norm;
    return make(std::move(out), {logits},
                [targets = std::move(targets), weights = std::move(weights), norm,
                 lse](Node &self, Grads &) {
                    Node &logits = *self.parents[0];
                    if (!logits.need) return;
                    const Mat &L = logits.v();
                    Mat g = Mat::Zero(L.rows(), L.cols());
                    double up = self.grad(0, 0) / norm;
                    for (Eigen::Index t = 0; t < L.rows(); ++t) {
                        double w = weights[size_t(t)];
                        if (w == 0.0) continue;
                        g.row(t) = (L.row(t).array() - (*lse)(t)).exp().matrix() * (w * up);
                        g(t, targets[size_t(t)]) -= w * up;
                    }
                    bump(logits, g);
                });
}

Var stack_shift(Var x, int k) {
    const Mat &xv = x->v();
    Eigen::Index T = xv.rows(), d = xv.cols();
    Mat out = Mat::Zero(T, k * d);
    for (int j = 0; j < k; ++j)
        for (Eigen::Index t = j; t < T; ++t) out.block(t, j * d, 1, d) = xv.row(t - j);
    return make(std::move(out), {x}, [k](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Eigen::Index T = x.v().rows(), d = x.v().cols();
        Mat g = Mat::Zero(T, d);
        for (int j = 0; j < k; ++j)
            for (Eigen::Index t = j; t < T; ++t) g.row(t - j) += self.grad.block(t, j * d, 1, d);
        bump(x, g);
    });
}

Var overlap_frames(Var x, int window) {
    const Mat &xv = x->v();
    Eigen::Index T = xv.rows(), hop = xv.cols();
    if (window < hop) throw InputError("overlap_frames: window < hop");
    Mat out = Mat::Zero(T, window);
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index j = 0; j < window; ++j) {
            Eigen::Index flat = t * hop + j;
            Eigen::Index row = flat / hop, col = flat % hop;
            if (row < T) out(t, j) = xv(row, col);
        }
    }
    return make(std::move(out), {x}, [window](Node &self, Grads &) {
        Node &x = *self.parents[0];
        if (!x.need) return;
        Eigen::Index T = x.v().rows(), hop = x.v().cols();
        Mat g = Mat::Zero(T, hop);
        for (Eigen::Index t = 0; t < T; ++t) {
            for (Eigen::Index j = 0; j < window; ++j) {
                Eigen::Index flat = t * hop + j;
                Eigen::Index row = flat / hop, col = flat % hop;
                if (row < T) g(row, col) += self.grad(t, j);
            }
        }
        bump(x, g);
    });
}

Var cosine_distance(Var a, Var b, double eps, bool *degenerate) {
    double na = a->v().norm(), nb = b->v().norm();
    if (degenerate) *degenerate = false;
    if (na < eps || nb < eps) {
        if (degenerate) *degenerate = true;
        return constant_scalar(1.0);
    }
    Var dot = sum_all(cmul(a, b));
    Var nna = sqrt_(sum_all(cmul(a, a)));
    Var nnb = sqrt_(sum_all(cmul(b, b)));
    // 1 - dot/(|a||b|) via explicit quotient node
    Mat out(1, 1);
    out(0, 0) = 1.0 - dot->scalar() / (nna->scalar() * nnb->scalar());
    return make(std::move(out), {dot, nna, nnb}, [](Node &self, Grads &) {
        Node &dot = *self.parents[0], &na = *self.parents[1], &nb = *self.parents[2];
        double d = dot.v()(0, 0), x = na.v()(0, 0), y = nb.v()(0, 0);
        double up = self.grad(0, 0);
        Mat g(1, 1);
        if (dot.need) {
            g(0, 0) = -up / (x * y);
            bump(dot, g);
        }
        if (na.need) {
            g(0, 0) = up * d / (x * x * y);
            bump(na, g);
        }
        if (nb.need) {
            g(0, 0) = up * d / (x * y * y);
            bump(nb, g);
        }
    });
}

AdamW::AdamW(const ParamStore &ps) : m(ps.size()), v(ps.size()) {
    for (size_t i = 0; i < ps.size(); ++i) {
        const Mat &w = ps.value(int(i));
        m[i] = Mat::Zero(w.rows(), w.cols());
        v[i] = Mat::Zero(w.rows(), w.cols());
    }
}

void AdamW::step(ParamStore &ps, const Grads &grads, double lr) {
    ++t;
    double bc1 = 1.0 - std::pow(beta1, double(t));
    double bc2 = 1.0 - std::pow(beta2, double(t));
    for (size_t i = 0; i < ps.size(); ++i) {
        if (!grads.has[i]) continue;
        const Mat &g = grads.g[i];
        Mat &w = ps.value(int(i));
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i].array().matrix() + (1.0 - beta2) * g.cwiseProduct(g);
        Mat mhat = m[i] / bc1;
        Mat vhat = v[i] / bc2;
        w.array() -= lr * (mhat.array() / (vhat.array().sqrt() + eps));
        if (ps.entry(int(i)).decay && weight_decay > 0.0) w *= (1.0 - lr * weight_decay);
    }
}

double lr_schedule(long step, long warmup, long total, double lr_peak, double lr_min_frac) {
    if (step < warmup) return lr_peak * double(step + 1) / double(warmup);
    double frac = double(step - warmup) / double(std::max<long>(1, total - warmup));
    if (frac > 1.0) frac = 1.0;
    double cosine = 0.5 * (1.0 + std::cos(3.141592653589793 * frac));
    return lr_peak * (lr_min_frac + (1.0 - lr_min_frac) * cosine);
}

Mat randn(Rng &rng, int rows, int cols, double std_dev) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal() * std_dev;
    return m;
}

}  // namespace voila::nn
