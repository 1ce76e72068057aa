#include "faceswap/ad.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <unordered_set>

namespace faceswap::ad {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

Var leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

static Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bp) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(bp);
    return n;
}

void backward(const Var& root) {
    if (root->value.numel() != 1) throw ShapeError("backward: root must be scalar");
    // topological order by iterative DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root->ensure_grad().data[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->has_grad) n->backprop(*n);
    }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += b->value.data[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= b->value.data[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "mul");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= b->value.data[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * a->value.data[i];
        }
    });
}

Var scale(const Var& a, float c) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= c;
    return make_op(std::move(out), {a}, [a, c](Node& n) {
        auto& g = a->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += c * n.grad.data[i];
    });
}

Var add_scalar(const Var& a, float c) {
    Tensor out = a->value;
    for (auto& v : out.data) v += c;
    return make_op(std::move(out), {a}, [a](Node& n) {
        auto& g = a->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
    });
}

Var silu(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = v / (1.0f + std::exp(-v));
    return make_op(std::move(out), {a}, [a](Node& n) {
        auto& g = a->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) {
            float x = a->value.data[i];
            float s = 1.0f / (1.0f + std::exp(-x));
            g.data[i] += n.grad.data[i] * s * (1.0f + x * (1.0f - s));
        }
    });
}

Var clamp(const Var& a, float lo, float hi) {
    if (lo > hi) throw ParameterError("clamp: lo must not exceed hi");
    Tensor out = a->value;
    for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
    return make_op(std::move(out), {a}, [a, lo, hi](Node& n) {
        if (!a->requires_grad) return;
        auto& g = a->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) {
            float x = a->value.data[i];
            if (x > lo && x < hi) g.data[i] += n.grad.data[i];
        }
    });
}

Var sum_all(const Var& a) {
    double s = 0.0;
    for (float v : a->value.data) s += v;
    return make_op(Tensor::scalar(static_cast<float>(s)), {a}, [a](Node& n) {
        auto& g = a->ensure_grad();
        float gd = n.grad.data[0];
        for (auto& v : g.data) v += gd;
    });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0f / static_cast<float>(a->value.numel())); }

Var mse(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "mse");
    double s = 0.0;
    for (int64_t i = 0; i < a->value.numel(); ++i) {
        double d = a->value.data[i] - b->value.data[i];
        s += d * d;
    }
    float inv_n = 1.0f / static_cast<float>(a->value.numel());
    return make_op(Tensor::scalar(static_cast<float>(s) * inv_n), {a, b}, [a, b, inv_n](Node& n) {
        float c = 2.0f * inv_n * n.grad.data[0];
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += c * (a->value.data[i] - b->value.data[i]);
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] -= c * (a->value.data[i] - b->value.data[i]);
        }
    });
}

Var dot(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "dot");
    double s = 0.0;
    for (int64_t i = 0; i < a->value.numel(); ++i) s += double(a->value.data[i]) * b->value.data[i];
    return make_op(Tensor::scalar(static_cast<float>(s)), {a, b}, [a, b](Node& n) {
        float gd = n.grad.data[0];
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += gd * b->value.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += gd * a->value.data[i];
        }
    });
}

Var sqrt_s(const Var& a, float eps) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::sqrt(v + eps);
    Tensor saved = out;
    return make_op(std::move(out), {a}, [a, saved](Node& n) {
        auto& g = a->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] * 0.5f / saved.data[i];
    });
}

Var div_s(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "div");
    Tensor out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] /= b->value.data[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i] / b->value.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) {
                float bv = b->value.data[i];
                g.data[i] -= n.grad.data[i] * a->value.data[i] / (bv * bv);
            }
        }
    });
}

Var l2_normalize(const Var& v, float eps) {
    double ss = eps;
    for (float x : v->value.data) ss += double(x) * x;
    float norm = static_cast<float>(std::sqrt(ss));
    Tensor out = v->value;
    for (auto& x : out.data) x /= norm;
    Tensor y = out;
    return make_op(std::move(out), {v}, [v, y, norm](Node& n) {
        auto& g = v->ensure_grad();
        double gy = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i) gy += double(n.grad.data[i]) * y.data[i];
        for (int64_t i = 0; i < g.numel(); ++i)
            g.data[i] += (n.grad.data[i] - static_cast<float>(gy) * y.data[i]) / norm;
    });
}

Var cosine(const Var& a, const Var& b) {
    return dot(l2_normalize(a), l2_normalize(b));
}

// ---------------------------------------------------------------- layout ops

Var concat_ch(const Var& a, const Var& b) {
    const auto& sa = a->value.shape;
    const auto& sb = b->value.shape;
    if (sa.size() != 3 || sb.size() != 3 || sa[1] != sb[1] || sa[2] != sb[2])
        throw ShapeError("concat_ch: incompatible shapes");
    Tensor out({sa[0] + sb[0], sa[1], sa[2]});
    std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
    std::copy(b->value.data.begin(), b->value.data.end(), out.data.begin() + a->value.numel());
    return make_op(std::move(out), {a, b}, [a, b](Node& n) {
        int64_t na = a->value.numel();
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < na; ++i) g.data[i] += n.grad.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < b->value.numel(); ++i) g.data[i] += n.grad.data[na + i];
        }
    });
}

Var broadcast_add_ch(const Var& x, const Var& per_channel) {
    const auto& s = x->value.shape;
    if (s.size() != 3 || per_channel->value.shape != std::vector<int>{s[0]})
        throw ShapeError("broadcast_add_ch: need {C,H,W} and {C}");
    int C = s[0], HW = s[1] * s[2];
    Tensor out = x->value;
    for (int c = 0; c < C; ++c) {
        float v = per_channel->value.data[c];
        for (int i = 0; i < HW; ++i) out.data[c * HW + i] += v;
    }
    return make_op(std::move(out), {x, per_channel}, [x, per_channel, C, HW](Node& n) {
        if (x->requires_grad) {
            auto& g = x->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
        if (per_channel->requires_grad) {
            auto& g = per_channel->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double s2 = 0.0;
                for (int i = 0; i < HW; ++i) s2 += n.grad.data[c * HW + i];
                g.data[c] += static_cast<float>(s2);
            }
        }
    });
}

Var global_avg_pool(const Var& x) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ShapeError("global_avg_pool: need {C,H,W}");
    int C = s[0], HW = s[1] * s[2];
    Tensor out({C});
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < HW; ++i) acc += x->value.data[c * HW + i];
        out.data[c] = static_cast<float>(acc / HW);
    }
    return make_op(std::move(out), {x}, [x, C, HW](Node& n) {
        auto& g = x->ensure_grad();
        for (int c = 0; c < C; ++c) {
            float gd = n.grad.data[c] / HW;
            for (int i = 0; i < HW; ++i) g.data[c * HW + i] += gd;
        }
    });
}

Var avg_pool2(const Var& x) {
    const auto& s = x->value.shape;
    if (s.size() != 3 || s[1] % 2 || s[2] % 2) throw ShapeError("avg_pool2: need even {C,H,W}");
    int C = s[0], H = s[1], W = s[2], Ho = H / 2, Wo = W / 2;
    Tensor out({C, Ho, Wo});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y)
            for (int xx = 0; xx < Wo; ++xx)
                out.at(c, y, xx) = 0.25f * (x->value.at(c, 2 * y, 2 * xx) + x->value.at(c, 2 * y, 2 * xx + 1) +
                                            x->value.at(c, 2 * y + 1, 2 * xx) + x->value.at(c, 2 * y + 1, 2 * xx + 1));
    return make_op(std::move(out), {x}, [x, C, Ho, Wo](Node& n) {
        auto& g = x->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < Ho; ++y)
                for (int xx = 0; xx < Wo; ++xx) {
                    float gd = 0.25f * n.grad.at(c, y, xx);
                    g.at(c, 2 * y, 2 * xx) += gd;
                    g.at(c, 2 * y, 2 * xx + 1) += gd;
                    g.at(c, 2 * y + 1, 2 * xx) += gd;
                    g.at(c, 2 * y + 1, 2 * xx + 1) += gd;
                }
    });
}

Var upsample_nearest2(const Var& x) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ShapeError("upsample_nearest2: need {C,H,W}");
    int C = s[0], H = s[1], W = s[2];
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int xx = 0; xx < 2 * W; ++xx) out.at(c, y, xx) = x->value.at(c, y / 2, xx / 2);
    return make_op(std::move(out), {x}, [x, C, H, W](Node& n) {
        auto& g = x->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int xx = 0; xx < 2 * W; ++xx) g.at(c, y / 2, xx / 2) += n.grad.at(c, y, xx);
    });
}

Var crop_resize(const Var& x, float y0, float x0, float hs, float ws, int out_h, int out_w) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ShapeError("crop_resize: need {C,H,W}");
    int C = s[0], H = s[1], W = s[2];
    Tensor out({C, out_h, out_w});
    // sample positions and bilinear weights are shared across channels
    struct Tap {
        int iy0, ix0;
        float fy, fx;
    };
    std::vector<Tap> taps(static_cast<size_t>(out_h) * out_w);
    for (int i = 0; i < out_h; ++i)
        for (int j = 0; j < out_w; ++j) {
            float sy = y0 + (i + 0.5f) * hs / out_h - 0.5f;
            float sx = x0 + (j + 0.5f) * ws / out_w - 0.5f;
            sy = std::min(std::max(sy, 0.0f), static_cast<float>(H - 1));
            sx = std::min(std::max(sx, 0.0f), static_cast<float>(W - 1));
            int iy = std::min(static_cast<int>(sy), H - 2 >= 0 ? H - 2 : 0);
            int ix = std::min(static_cast<int>(sx), W - 2 >= 0 ? W - 2 : 0);
            taps[static_cast<size_t>(i) * out_w + j] = {iy, ix, sy - iy, sx - ix};
        }
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < out_h; ++i)
            for (int j = 0; j < out_w; ++j) {
                const Tap& t = taps[static_cast<size_t>(i) * out_w + j];
                int iy1 = std::min(t.iy0 + 1, H - 1), ix1 = std::min(t.ix0 + 1, W - 1);
                out.at(c, i, j) = (1 - t.fy) * ((1 - t.fx) * x->value.at(c, t.iy0, t.ix0) + t.fx * x->value.at(c, t.iy0, ix1)) +
                                  t.fy * ((1 - t.fx) * x->value.at(c, iy1, t.ix0) + t.fx * x->value.at(c, iy1, ix1));
            }
    return make_op(std::move(out), {x}, [x, taps, C, H, W, out_h, out_w](Node& n) {
        auto& g = x->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < out_h; ++i)
                for (int j = 0; j < out_w; ++j) {
                    const Tap& t = taps[static_cast<size_t>(i) * out_w + j];
                    int iy1 = std::min(t.iy0 + 1, H - 1), ix1 = std::min(t.ix0 + 1, W - 1);
                    float gd = n.grad.at(c, i, j);
                    g.at(c, t.iy0, t.ix0) += gd * (1 - t.fy) * (1 - t.fx);
                    g.at(c, t.iy0, ix1) += gd * (1 - t.fy) * t.fx;
                    g.at(c, iy1, t.ix0) += gd * t.fy * (1 - t.fx);
                    g.at(c, iy1, ix1) += gd * t.fy * t.fx;
                }
    });
}

// ---------------------------------------------------------------- layers

Var linear(const Var& x, const Var& w, const Var& b) {
    const auto& sx = x->value.shape;
    const auto& sw = w->value.shape;
    if (sx.size() != 1 || sw.size() != 2 || sw[1] != sx[0]) throw ShapeError("linear: incompatible shapes");
    int O = sw[0], I = sw[1];
    Tensor out({O});
    CMapM Wm(w->value.data.data(), O, I);
    Eigen::Map<const Eigen::VectorXf> xv(x->value.data.data(), I);
    Eigen::Map<Eigen::VectorXf> ov(out.data.data(), O);
    ov.noalias() = Wm * xv;
    if (b) {
        if (b->value.shape != std::vector<int>{O}) throw ShapeError("linear: bad bias shape");
        ov += Eigen::Map<const Eigen::VectorXf>(b->value.data.data(), O);
    }
    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_op(std::move(out), std::move(parents), [x, w, b, O, I](Node& n) {
        Eigen::Map<const Eigen::VectorXf> gy(n.grad.data.data(), O);
        if (x->requires_grad) {
            auto& g = x->ensure_grad();
            Eigen::Map<Eigen::VectorXf> gx(g.data.data(), I);
            CMapM Wm(w->value.data.data(), O, I);
            gx.noalias() += Wm.transpose() * gy;
        }
        if (w->requires_grad) {
            auto& g = w->ensure_grad();
            MapM gw(g.data.data(), O, I);
            Eigen::Map<const Eigen::VectorXf> xv(x->value.data.data(), I);
            gw.noalias() += gy * xv.transpose();
        }
        if (b && b->requires_grad) {
            auto& g = b->ensure_grad();
            Eigen::Map<Eigen::VectorXf>(g.data.data(), O) += gy;
        }
    });
}

static Tensor im2col(const Tensor& x, int kh, int kw, int pad) {
    int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor cols({C * kh * kw, H * W});
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                float* row = &cols.data[static_cast<size_t>((c * kh + dy) * kw + dx) * H * W];
                for (int y = 0; y < H; ++y) {
                    int sy = y + dy - pad;
                    if (sy < 0 || sy >= H) {
                        std::fill(row + y * W, row + (y + 1) * W, 0.0f);
                        continue;
                    }
                    for (int xx = 0; xx < W; ++xx) {
                        int sx = xx + dx - pad;
                        row[y * W + xx] = (sx < 0 || sx >= W) ? 0.0f : x.at(c, sy, sx);
                    }
                }
            }
    return cols;
}

static void col2im_accum(const Tensor& cols, Tensor& gx, int kh, int kw, int pad) {
    int C = gx.shape[0], H = gx.shape[1], W = gx.shape[2];
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                const float* row = &cols.data[static_cast<size_t>((c * kh + dy) * kw + dx) * H * W];
                for (int y = 0; y < H; ++y) {
                    int sy = y + dy - pad;
                    if (sy < 0 || sy >= H) continue;
                    for (int xx = 0; xx < W; ++xx) {
                        int sx = xx + dx - pad;
                        if (sx >= 0 && sx < W) gx.at(c, sy, sx) += row[y * W + xx];
                    }
                }
            }
}

Var conv2d(const Var& x, const Var& w, const Var& b, int pad) {
    const auto& sx = x->value.shape;
    const auto& sw = w->value.shape;
    if (sx.size() != 3 || sw.size() != 4 || sw[1] != sx[0]) throw ShapeError("conv2d: incompatible shapes");
    int Ci = sx[0], H = sx[1], W = sx[2], Co = sw[0], kh = sw[2], kw = sw[3];
    auto cols = std::make_shared<Tensor>(im2col(x->value, kh, kw, pad));
    int K = Ci * kh * kw, N = H * W;
    Tensor out({Co, H, W});
    {
        CMapM Wm(w->value.data.data(), Co, K);
        CMapM Cm(cols->data.data(), K, N);
        MapM Om(out.data.data(), Co, N);
        Om.noalias() = Wm * Cm;
        if (b)
            for (int c = 0; c < Co; ++c) Om.row(c).array() += b->value.data[c];
    }
    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_op(std::move(out), std::move(parents), [x, w, b, cols, Ci, H, W, Co, kh, kw, pad](Node& n) {
        int K = Ci * kh * kw, N = H * W;
        CMapM Gy(n.grad.data.data(), Co, N);
        if (w->requires_grad) {
            auto& g = w->ensure_grad();
            MapM Gw(g.data.data(), Co, K);
            CMapM Cm(cols->data.data(), K, N);
            Gw.noalias() += Gy * Cm.transpose();
        }
        if (b && b->requires_grad) {
            auto& g = b->ensure_grad();
            for (int c = 0; c < Co; ++c) g.data[c] += Gy.row(c).sum();
        }
        if (x->requires_grad) {
            Tensor gcols({K, N});
            MapM Gc(gcols.data.data(), K, N);
            CMapM Wm(w->value.data.data(), Co, K);
            Gc.noalias() = Wm.transpose() * Gy;
            col2im_accum(gcols, x->ensure_grad(), kh, kw, pad);
        }
    });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, float eps) {
    const auto& s = x->value.shape;
    if (s.size() != 3 || s[0] % groups) throw ShapeError("group_norm: channels must divide groups");
    int C = s[0], HW = s[1] * s[2], cg = C / groups;
    int64_t gn = static_cast<int64_t>(cg) * HW;
    auto xhat = std::make_shared<Tensor>(x->value.shape);
    auto inv_std = std::make_shared<std::vector<float>>(groups);
    Tensor out(x->value.shape);
    for (int g = 0; g < groups; ++g) {
        const float* src = &x->value.data[static_cast<size_t>(g) * gn];
        double m = 0.0;
        for (int64_t i = 0; i < gn; ++i) m += src[i];
        m /= gn;
        double v = 0.0;
        for (int64_t i = 0; i < gn; ++i) {
            double d = src[i] - m;
            v += d * d;
        }
        v /= gn;
        float is = 1.0f / std::sqrt(static_cast<float>(v) + eps);
        (*inv_std)[g] = is;
        for (int64_t i = 0; i < gn; ++i) xhat->data[g * gn + i] = (src[i] - static_cast<float>(m)) * is;
    }
    for (int c = 0; c < C; ++c) {
        float ga = gamma->value.data[c], be = beta->value.data[c];
        for (int i = 0; i < HW; ++i) out.data[static_cast<size_t>(c) * HW + i] = ga * xhat->data[static_cast<size_t>(c) * HW + i] + be;
    }
    return make_op(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, groups, C, HW, cg, gn](Node& n) {
        if (gamma->requires_grad) {
            auto& g = gamma->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int i = 0; i < HW; ++i)
                    acc += double(n.grad.data[static_cast<size_t>(c) * HW + i]) * xhat->data[static_cast<size_t>(c) * HW + i];
                g.data[c] += static_cast<float>(acc);
            }
        }
        if (beta->requires_grad) {
            auto& g = beta->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int i = 0; i < HW; ++i) acc += n.grad.data[static_cast<size_t>(c) * HW + i];
                g.data[c] += static_cast<float>(acc);
            }
        }
        if (x->requires_grad) {
            auto& gx = x->ensure_grad();
            std::vector<float> dxhat(static_cast<size_t>(gn));
            for (int g = 0; g < groups; ++g) {
                double sum_d = 0.0, sum_dx = 0.0;
                for (int j = 0; j < cg; ++j) {
                    int c = g * cg + j;
                    float ga = gamma->value.data[c];
                    for (int i = 0; i < HW; ++i) {
                        float d = n.grad.data[static_cast<size_t>(c) * HW + i] * ga;
                        dxhat[static_cast<size_t>(j) * HW + i] = d;
                        sum_d += d;
                        sum_dx += double(d) * xhat->data[static_cast<size_t>(c) * HW + i];
                    }
                }
                float is = (*inv_std)[g];
                float mean_d = static_cast<float>(sum_d / gn), mean_dx = static_cast<float>(sum_dx / gn);
                for (int j = 0; j < cg; ++j) {
                    int c = g * cg + j;
                    for (int i = 0; i < HW; ++i) {
                        float xh = xhat->data[static_cast<size_t>(c) * HW + i];
                        gx.data[static_cast<size_t>(c) * HW + i] +=
                            is * (dxhat[static_cast<size_t>(j) * HW + i] - mean_d - xh * mean_dx);
                    }
                }
            }
        }
    });
}

Var softmax_ch(const Var& x) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ShapeError("softmax_ch: need {C,H,W}");
    int C = s[0], HW = s[1] * s[2];
    auto probs = std::make_shared<Tensor>(x->value.shape);
    for (int i = 0; i < HW; ++i) {
        float mx = -1e30f;
        for (int c = 0; c < C; ++c) mx = std::max(mx, x->value.data[static_cast<size_t>(c) * HW + i]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            float e = std::exp(x->value.data[static_cast<size_t>(c) * HW + i] - mx);
            probs->data[static_cast<size_t>(c) * HW + i] = e;
            z += e;
        }
        float inv = static_cast<float>(1.0 / z);
        for (int c = 0; c < C; ++c) probs->data[static_cast<size_t>(c) * HW + i] *= inv;
    }
    Tensor out = *probs;
    return make_op(std::move(out), {x}, [x, probs, C, HW](Node& n) {
        auto& g = x->ensure_grad();
        for (int i = 0; i < HW; ++i) {
            double sgp = 0.0;
            for (int c = 0; c < C; ++c)
                sgp += double(n.grad.data[static_cast<size_t>(c) * HW + i]) * probs->data[static_cast<size_t>(c) * HW + i];
            for (int c = 0; c < C; ++c) {
                float p = probs->data[static_cast<size_t>(c) * HW + i];
                g.data[static_cast<size_t>(c) * HW + i] +=
                    p * (n.grad.data[static_cast<size_t>(c) * HW + i] - static_cast<float>(sgp));
            }
        }
    });
}

Var attention(const Var& q, const Var& k, const Var& v) {
    const auto& s = q->value.shape;
    require_same_shape(q->value, k->value, "attention");
    require_same_shape(q->value, v->value, "attention");
    int C = s[0], N = s[1] * s[2];
    float inv_sqrt_c = 1.0f / std::sqrt(static_cast<float>(C));
    CMapM Q(q->value.data.data(), C, N), K(k->value.data.data(), C, N), V(v->value.data.data(), C, N);
    auto A = std::make_shared<MatRM>(N, N);
    *A = (Q.transpose() * K) * inv_sqrt_c;
    for (int i = 0; i < N; ++i) {
        auto row = A->row(i);
        float mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
    }
    Tensor out({C, s[1], s[2]});
    MapM O(out.data.data(), C, N);
    O.noalias() = V * A->transpose();
    return make_op(std::move(out), {q, k, v}, [q, k, v, A, C, N, inv_sqrt_c](Node& n) {
        CMapM Gy(n.grad.data.data(), C, N);
        CMapM Q(q->value.data.data(), C, N), K(k->value.data.data(), C, N), V(v->value.data.data(), C, N);
        if (v->requires_grad) {
            auto& g = v->ensure_grad();
            MapM Gv(g.data.data(), C, N);
            Gv.noalias() += Gy * (*A);
        }
        MatRM dA = Gy.transpose() * V;  // {N,N}
        // softmax backward per row
        MatRM dS(N, N);
        for (int i = 0; i < N; ++i) {
            float rowdot = (dA.row(i).array() * A->row(i).array()).sum();
            dS.row(i) = A->row(i).array() * (dA.row(i).array() - rowdot);
        }
        if (q->requires_grad) {
            auto& g = q->ensure_grad();
            MapM Gq(g.data.data(), C, N);
            Gq.noalias() += (K * dS.transpose()) * inv_sqrt_c;
        }
        if (k->requires_grad) {
            auto& g = k->ensure_grad();
            MapM Gk(g.data.data(), C, N);
            Gk.noalias() += (Q * dS) * inv_sqrt_c;
        }
    });
}

Var cross_entropy_logits(const Var& logits, int label) {
    const auto& s = logits->value.shape;
    if (s.size() != 1 || label < 0 || label >= s[0]) throw ParameterError("cross_entropy_logits: bad label");
    int K = s[0];
    float mx = -1e30f;
    for (float x : logits->value.data) mx = std::max(mx, x);
    double z = 0.0;
    for (float x : logits->value.data) z += std::exp(double(x) - mx);
    float lse = mx + static_cast<float>(std::log(z));
    float loss = lse - logits->value.data[label];
    return make_op(Tensor::scalar(loss), {logits}, [logits, label, lse, K](Node& n) {
        auto& g = logits->ensure_grad();
        float gd = n.grad.data[0];
        for (int c = 0; c < K; ++c) {
            float p = std::exp(logits->value.data[c] - lse);
            g.data[c] += gd * (p - (c == label ? 1.0f : 0.0f));
        }
    });
}

Var cross_entropy_map(const Var& logits, const std::vector<int>& labels) {
    const auto& s = logits->value.shape;
    if (s.size() != 3) throw ShapeError("cross_entropy_map: need {K,H,W}");
    int K = s[0], HW = s[1] * s[2];
    if (static_cast<int>(labels.size()) != HW) throw ShapeError("cross_entropy_map: label count mismatch");
    auto lse = std::make_shared<std::vector<float>>(HW);
    double total = 0.0;
    for (int i = 0; i < HW; ++i) {
        float mx = -1e30f;
        for (int c = 0; c < K; ++c) mx = std::max(mx, logits->value.data[static_cast<size_t>(c) * HW + i]);
        double z = 0.0;
        for (int c = 0; c < K; ++c) z += std::exp(double(logits->value.data[static_cast<size_t>(c) * HW + i]) - mx);
        (*lse)[i] = mx + static_cast<float>(std::log(z));
        total += (*lse)[i] - logits->value.data[static_cast<size_t>(labels[i]) * HW + i];
    }
    float inv = 1.0f / HW;
    return make_op(Tensor::scalar(static_cast<float>(total) * inv), {logits}, [logits, labels, lse, K, HW, inv](Node& n) {
        auto& g = logits->ensure_grad();
        float gd = n.grad.data[0] * inv;
        for (int i = 0; i < HW; ++i)
            for (int c = 0; c < K; ++c) {
                float p = std::exp(logits->value.data[static_cast<size_t>(c) * HW + i] - (*lse)[i]);
                g.data[static_cast<size_t>(c) * HW + i] += gd * (p - (c == labels[i] ? 1.0f : 0.0f));
            }
    });
}

}  // namespace faceswap::ad
