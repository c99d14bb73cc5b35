#pragma once

// Reverse-mode autodiff over TensorT. A Var is a shared node holding a value,
// an optional gradient, and a closure that scatters the node's gradient into
// its parents. Graphs are built eagerly; backward() runs a topological sweep.
// Everything is templated on the scalar type so the same model code can be
// instantiated in double for finite-difference gradient checks.

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "core/blas.hpp"
#include "core/tensor.hpp"

namespace egs {

template <class T>
struct NodeT {
    TensorT<T> value;
    TensorT<T> grad;  // allocated lazily, same shape as value
    bool needs_grad = false;
    std::vector<std::shared_ptr<NodeT<T>>> parents;
    std::function<void(NodeT<T>&)> backprop;

    TensorT<T>& ensure_grad() {
        if (grad.v.empty()) grad = TensorT<T>(value.shape);
        return grad;
    }
};

template <class T>
using VarT = std::shared_ptr<NodeT<T>>;

// Graph recording can be switched off for inference; ops then produce leaf
// nodes and intermediate activations are freed as their refcounts drop.
inline bool& grad_enabled_flag() {
    thread_local bool on = true;
    return on;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled_flag()) { grad_enabled_flag() = false; }
    ~NoGradGuard() { grad_enabled_flag() = prev; }
};

template <class T>
VarT<T> leaf(TensorT<T> value, bool needs_grad = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    return n;
}

template <class T>
VarT<T> make_node(TensorT<T> value, std::vector<VarT<T>> parents,
                  std::function<void(NodeT<T>&)> backprop) {
    bool track = grad_enabled_flag();
    bool any = false;
    for (auto& p : parents)
        if (p->needs_grad) any = true;
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    if (track && any) {
        n->needs_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

template <class T>
void backward(const VarT<T>& root) {
    check_contract(root->needs_grad, "backward: root does not require grad");
    // Topological order (children before parents after reversal).
    std::vector<NodeT<T>*> order;
    std::unordered_set<NodeT<T>*> seen;
    std::vector<std::pair<NodeT<T>*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodeT<T>* p = node->parents[idx].get();
            ++idx;
            if (p->needs_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    auto& g = root->ensure_grad();
    check_contract(g.numel() == 1, "backward: root must be scalar");
    g.v[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT<T>* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <class T>
VarT<T> add(const VarT<T>& a, const VarT<T>& b) {
    check_contract(a->value.same_shape(b->value), "add: shape mismatch " + a->value.shape_str() +
                                                      " vs " + b->value.shape_str());
    TensorT<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a->value.v[i] + b->value.v[i];
    return make_node<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
        for (int k = 0; k < 2; ++k) {
            auto& p = n.parents[k];
            if (!p->needs_grad) continue;
            auto& pg = p->ensure_grad();
            for (int64_t i = 0; i < pg.numel(); ++i) pg.v[i] += n.grad.v[i];
        }
    });
}

template <class T>
VarT<T> sub(const VarT<T>& a, const VarT<T>& b) {
    check_contract(a->value.same_shape(b->value), "sub: shape mismatch");
    TensorT<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a->value.v[i] - b->value.v[i];
    return make_node<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
        if (n.parents[0]->needs_grad) {
            auto& g = n.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += n.grad.v[i];
        }
        if (n.parents[1]->needs_grad) {
            auto& g = n.parents[1]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] -= n.grad.v[i];
        }
    });
}

template <class T>
VarT<T> mul(const VarT<T>& a, const VarT<T>& b) {
    check_contract(a->value.same_shape(b->value), "mul: shape mismatch");
    TensorT<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a->value.v[i] * b->value.v[i];
    return make_node<T>(std::move(out), {a, b}, [](NodeT<T>& n) {
        auto& a = n.parents[0];
        auto& b = n.parents[1];
        if (a->needs_grad) {
            auto& g = a->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += n.grad.v[i] * b->value.v[i];
        }
        if (b->needs_grad) {
            auto& g = b->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += n.grad.v[i] * a->value.v[i];
        }
    });
}

template <class T>
VarT<T> scale(const VarT<T>& a, T s) {
    TensorT<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a->value.v[i] * s;
    return make_node<T>(std::move(out), {a}, [s](NodeT<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += n.grad.v[i] * s;
    });
}

template <class T, class F, class DF>
VarT<T> unary_op(const VarT<T>& a, F f, DF df) {
    TensorT<T> out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = f(a->value.v[i]);
    return make_node<T>(std::move(out), {a}, [df](NodeT<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        const auto& x = n.parents[0]->value;
        for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += n.grad.v[i] * df(x.v[i], n.value.v[i]);
    });
}

template <class T>
VarT<T> relu(const VarT<T>& a) {
    return unary_op(
        a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
VarT<T> silu(const VarT<T>& a) {
    return unary_op(
        a,
        [](T x) {
            T s = T(1) / (T(1) + std::exp(-x));
            return x * s;
        },
        [](T x, T) {
            T s = T(1) / (T(1) + std::exp(-x));
            return s + x * s * (T(1) - s);
        });
}

template <class T>
VarT<T> sigmoid(const VarT<T>& a) {
    return unary_op(
        a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
        [](T, T y) { return y * (T(1) - y); });
}

// ---------------------------------------------------------------------------
// Matmul / linear
// ---------------------------------------------------------------------------

// a: [M,K], b: [K,N] -> [M,N]; optional transposes interpret the stored
// layout (a stays row-major [rows,cols] on disk either way).
template <class T>
VarT<T> matmul(const VarT<T>& a, const VarT<T>& b, bool trans_a = false, bool trans_b = false) {
    const auto& av = a->value;
    const auto& bv = b->value;
    check_contract(av.ndim() == 2 && bv.ndim() == 2, "matmul: need 2-d inputs");
    int m = trans_a ? av.dim(1) : av.dim(0);
    int k = trans_a ? av.dim(0) : av.dim(1);
    int kb = trans_b ? bv.dim(1) : bv.dim(0);
    int n = trans_b ? bv.dim(0) : bv.dim(1);
    check_contract(k == kb, "matmul: inner dim mismatch");
    TensorT<T> out({m, n});
    gemm(trans_a, trans_b, m, n, k, T(1), av.v.data(), av.dim(1), bv.v.data(), bv.dim(1), T(0),
         out.v.data(), n);
    return make_node<T>(std::move(out), {a, b}, [trans_a, trans_b, m, n, k](NodeT<T>& nd) {
        auto& a = nd.parents[0];
        auto& b = nd.parents[1];
        const T* gy = nd.grad.v.data();
        if (a->needs_grad) {
            auto& ga = a->ensure_grad();
            // dA = dY * B^T (layout-aware)
            if (!trans_a) {
                gemm(false, !trans_b, m, k, n, T(1), gy, n, b->value.v.data(), b->value.dim(1),
                     T(1), ga.v.data(), ga.dim(1));
            } else {
                // A stored [K?,M?]: dA^T accumulated as B * dY^T
                gemm(trans_b, true, k, m, n, T(1), b->value.v.data(), b->value.dim(1), gy, n, T(1),
                     ga.v.data(), ga.dim(1));
            }
        }
        if (b->needs_grad) {
            auto& gb = b->ensure_grad();
            if (!trans_b) {
                gemm(!trans_a, false, k, n, m, T(1), a->value.v.data(), a->value.dim(1), gy, n,
                     T(1), gb.v.data(), gb.dim(1));
            } else {
                gemm(true, trans_a, n, k, m, T(1), gy, n, a->value.v.data(), a->value.dim(1), T(1),
                     gb.v.data(), gb.dim(1));
            }
        }
    });
}

// x: [N,D], w: [O,D], b: [O] -> [N,O]
template <class T>
VarT<T> linear(const VarT<T>& x, const VarT<T>& w, const VarT<T>& b) {
    auto y = matmul(x, w, false, true);
    if (!b) return y;
    check_contract(b->value.numel() == w->value.dim(0), "linear: bias size mismatch");
    const int n = y->value.dim(0), o = y->value.dim(1);
    TensorT<T> out = y->value;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) out.at2(i, j) += b->value.v[j];
    return make_node<T>(std::move(out), {y, b}, [n, o](NodeT<T>& nd) {
        if (nd.parents[0]->needs_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += nd.grad.v[i];
        }
        if (nd.parents[1]->needs_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < o; ++j) g.v[j] += nd.grad.at2(i, j);
        }
    });
}

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM)
// ---------------------------------------------------------------------------

template <class T>
void im2col(const TensorT<T>& x, int kh, int kw, int stride, int pad, int oh, int ow,
            TensorT<T>& col) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    // col: [oh*ow, c*kh*kw]
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            T* dst = &col.v[(static_cast<size_t>(oy) * ow + ox) * c * kh * kw];
            for (int ci = 0; ci < c; ++ci) {
                for (int ky = 0; ky < kh; ++ky) {
                    int iy = oy * stride - pad + ky;
                    for (int kx = 0; kx < kw; ++kx) {
                        int ix = ox * stride - pad + kx;
                        *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x.at3(ci, iy, ix)
                                                                          : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const TensorT<T>& col, int c, int h, int w, int kh, int kw, int stride, int pad,
                int oh, int ow, TensorT<T>& x) {
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* src = &col.v[(static_cast<size_t>(oy) * ow + ox) * c * kh * kw];
            for (int ci = 0; ci < c; ++ci) {
                for (int ky = 0; ky < kh; ++ky) {
                    int iy = oy * stride - pad + ky;
                    for (int kx = 0; kx < kw; ++kx) {
                        int ix = ox * stride - pad + kx;
                        T s = *src++;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w) x.at3(ci, iy, ix) += s;
                    }
                }
            }
        }
    }
}

// x: [C,H,W], w: [O,C,kh,kw], b: [O] or null -> [O,OH,OW]
template <class T>
VarT<T> conv2d(const VarT<T>& x, const VarT<T>& w, const VarT<T>& b, int stride, int pad) {
    const auto& xv = x->value;
    const auto& wv = w->value;
    check_contract(xv.ndim() == 3 && wv.ndim() == 4, "conv2d: bad ranks");
    check_contract(xv.dim(0) == wv.dim(1), "conv2d: channel mismatch");
    const int c = xv.dim(0), h = xv.dim(1), ww = xv.dim(2);
    const int o = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (ww + 2 * pad - kw) / stride + 1;
    check_contract(oh > 0 && ow > 0, "conv2d: empty output");
    TensorT<T> col({oh * ow, c * kh * kw});
    im2col(xv, kh, kw, stride, pad, oh, ow, col);
    TensorT<T> out({o, oh, ow});
    // out[o, p] = w_flat[o, :] . col[p, :]
    gemm(false, true, o, oh * ow, c * kh * kw, T(1), wv.v.data(), c * kh * kw, col.v.data(),
         c * kh * kw, T(0), out.v.data(), oh * ow);
    if (b) {
        check_contract(b->value.numel() == o, "conv2d: bias size mismatch");
        for (int oc = 0; oc < o; ++oc) {
            T bi = b->value.v[oc];
            T* p = &out.v[static_cast<size_t>(oc) * oh * ow];
            for (int i = 0; i < oh * ow; ++i) p[i] += bi;
        }
    }
    std::vector<VarT<T>> parents = b ? std::vector<VarT<T>>{x, w, b} : std::vector<VarT<T>>{x, w};
    return make_node<T>(std::move(out), std::move(parents),
                        [stride, pad, c, h, ww, o, kh, kw, oh, ow](NodeT<T>& nd) {
                            auto& x = nd.parents[0];
                            auto& w = nd.parents[1];
                            const T* gy = nd.grad.v.data();  // [O, OH*OW]
                            if (w->needs_grad) {
                                TensorT<T> col({oh * ow, c * kh * kw});
                                im2col(x->value, kh, kw, stride, pad, oh, ow, col);
                                auto& gw = w->ensure_grad();
                                // dW[o,:] += gy[o,:] * col
                                gemm(false, false, o, c * kh * kw, oh * ow, T(1), gy, oh * ow,
                                     col.v.data(), c * kh * kw, T(1), gw.v.data(), c * kh * kw);
                            }
                            if (x->needs_grad) {
                                TensorT<T> gcol({oh * ow, c * kh * kw});
                                // gcol = gy^T * w_flat
                                gemm(true, false, oh * ow, c * kh * kw, o, T(1), gy, oh * ow,
                                     w->value.v.data(), c * kh * kw, T(0), gcol.v.data(),
                                     c * kh * kw);
                                auto& gx = x->ensure_grad();
                                col2im_add(gcol, c, h, ww, kh, kw, stride, pad, oh, ow, gx);
                            }
                            if (nd.parents.size() == 3 && nd.parents[2]->needs_grad) {
                                auto& gb = nd.parents[2]->ensure_grad();
                                for (int oc = 0; oc < o; ++oc) {
                                    T s = T(0);
                                    const T* p = &nd.grad.v[static_cast<size_t>(oc) * oh * ow];
                                    for (int i = 0; i < oh * ow; ++i) s += p[i];
                                    gb.v[oc] += s;
                                }
                            }
                        });
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// GroupNorm over [C,H,W] with affine per channel.
template <class T>
VarT<T> group_norm(const VarT<T>& x, int groups, const VarT<T>& gamma, const VarT<T>& beta,
                   T eps = T(1e-5)) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 3, "group_norm: need [C,H,W]");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    check_contract(c % groups == 0, "group_norm: C % groups != 0");
    const int cg = c / groups;
    const int64_t gsz = static_cast<int64_t>(cg) * h * w;
    TensorT<T> out(xv.shape);
    std::vector<T> means(groups), istds(groups);
    for (int g = 0; g < groups; ++g) {
        const T* p = &xv.v[static_cast<size_t>(g) * gsz];
        double m = 0.0;
        for (int64_t i = 0; i < gsz; ++i) m += p[i];
        m /= static_cast<double>(gsz);
        double var = 0.0;
        for (int64_t i = 0; i < gsz; ++i) {
            double d = p[i] - m;
            var += d * d;
        }
        var /= static_cast<double>(gsz);
        T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        means[g] = static_cast<T>(m);
        istds[g] = istd;
        T* q = &out.v[static_cast<size_t>(g) * gsz];
        for (int64_t i = 0; i < gsz; ++i) q[i] = (p[i] - means[g]) * istd;
    }
    // affine
    for (int ci = 0; ci < c; ++ci) {
        T ga = gamma->value.v[ci], be = beta->value.v[ci];
        T* q = &out.v[static_cast<size_t>(ci) * h * w];
        for (int i = 0; i < h * w; ++i) q[i] = q[i] * ga + be;
    }
    return make_node<T>(std::move(out), {x, gamma, beta},
                        [groups, c, h, w, cg, gsz, means, istds, eps](NodeT<T>& nd) {
                            auto& x = nd.parents[0];
                            auto& gamma = nd.parents[1];
                            auto& beta = nd.parents[2];
                            const auto& xv = x->value;
                            const int hw = h * w;
                            // xhat per element
                            if (gamma->needs_grad || beta->needs_grad) {
                                auto& gg = gamma->ensure_grad();
                                auto& gb = beta->ensure_grad();
                                for (int ci = 0; ci < c; ++ci) {
                                    int g = ci / cg;
                                    const T* xp = &xv.v[static_cast<size_t>(ci) * hw];
                                    const T* gp = &nd.grad.v[static_cast<size_t>(ci) * hw];
                                    T sg = T(0), sb = T(0);
                                    for (int i = 0; i < hw; ++i) {
                                        T xhat = (xp[i] - means[g]) * istds[g];
                                        sg += gp[i] * xhat;
                                        sb += gp[i];
                                    }
                                    gg.v[ci] += sg;
                                    gb.v[ci] += sb;
                                }
                            }
                            if (x->needs_grad) {
                                auto& gx = x->ensure_grad();
                                for (int g = 0; g < groups; ++g) {
                                    // dL/dxhat = gy * gamma (per channel)
                                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                                    for (int cc = 0; cc < cg; ++cc) {
                                        int ci = g * cg + cc;
                                        T ga = gamma->value.v[ci];
                                        const T* xp = &xv.v[static_cast<size_t>(ci) * hw];
                                        const T* gp = &nd.grad.v[static_cast<size_t>(ci) * hw];
                                        for (int i = 0; i < hw; ++i) {
                                            T dxh = gp[i] * ga;
                                            T xhat = (xp[i] - means[g]) * istds[g];
                                            sum_dxhat += dxh;
                                            sum_dxhat_xhat += static_cast<double>(dxh) * xhat;
                                        }
                                    }
                                    double inv_n = 1.0 / static_cast<double>(gsz);
                                    for (int cc = 0; cc < cg; ++cc) {
                                        int ci = g * cg + cc;
                                        T ga = gamma->value.v[ci];
                                        const T* xp = &xv.v[static_cast<size_t>(ci) * hw];
                                        const T* gp = &nd.grad.v[static_cast<size_t>(ci) * hw];
                                        T* gq = &gx.v[static_cast<size_t>(ci) * hw];
                                        for (int i = 0; i < hw; ++i) {
                                            T dxh = gp[i] * ga;
                                            T xhat = (xp[i] - means[g]) * istds[g];
                                            gq[i] += istds[g] *
                                                     static_cast<T>(dxh - inv_n * sum_dxhat -
                                                                    xhat * inv_n * sum_dxhat_xhat);
                                        }
                                    }
                                }
                            }
                        });
}

// LayerNorm over last dim of [N,D].
template <class T>
VarT<T> layer_norm(const VarT<T>& x, const VarT<T>& gamma, const VarT<T>& beta, T eps = T(1e-5)) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 2, "layer_norm: need [N,D]");
    const int n = xv.dim(0), d = xv.dim(1);
    TensorT<T> out(xv.shape);
    std::vector<T> means(n), istds(n);
    for (int i = 0; i < n; ++i) {
        const T* p = &xv.v[static_cast<size_t>(i) * d];
        double m = 0.0;
        for (int j = 0; j < d; ++j) m += p[j];
        m /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double df = p[j] - m;
            var += df * df;
        }
        var /= d;
        means[i] = static_cast<T>(m);
        istds[i] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        T* q = &out.v[static_cast<size_t>(i) * d];
        for (int j = 0; j < d; ++j)
            q[j] = (p[j] - means[i]) * istds[i] * gamma->value.v[j] + beta->value.v[j];
    }
    return make_node<T>(std::move(out), {x, gamma, beta}, [n, d, means, istds](NodeT<T>& nd) {
        auto& x = nd.parents[0];
        auto& gamma = nd.parents[1];
        auto& beta = nd.parents[2];
        const auto& xv = x->value;
        if (gamma->needs_grad || beta->needs_grad) {
            auto& gg = gamma->ensure_grad();
            auto& gb = beta->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const T* xp = &xv.v[static_cast<size_t>(i) * d];
                const T* gp = &nd.grad.v[static_cast<size_t>(i) * d];
                for (int j = 0; j < d; ++j) {
                    T xhat = (xp[j] - means[i]) * istds[i];
                    gg.v[j] += gp[j] * xhat;
                    gb.v[j] += gp[j];
                }
            }
        }
        if (x->needs_grad) {
            auto& gx = x->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const T* xp = &xv.v[static_cast<size_t>(i) * d];
                const T* gp = &nd.grad.v[static_cast<size_t>(i) * d];
                T* gq = &gx.v[static_cast<size_t>(i) * d];
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int j = 0; j < d; ++j) {
                    T dxh = gp[j] * gamma->value.v[j];
                    T xhat = (xp[j] - means[i]) * istds[i];
                    sum_dxh += dxh;
                    sum_dxh_xh += static_cast<double>(dxh) * xhat;
                }
                double inv_d = 1.0 / d;
                for (int j = 0; j < d; ++j) {
                    T dxh = gp[j] * gamma->value.v[j];
                    T xhat = (xp[j] - means[i]) * istds[i];
                    gq[j] += istds[i] * static_cast<T>(dxh - inv_d * sum_dxh -
                                                       xhat * inv_d * sum_dxh_xh);
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Softmax / shape ops / reductions
// ---------------------------------------------------------------------------

template <class T>
VarT<T> softmax_rows(const VarT<T>& x) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 2, "softmax_rows: need [N,M]");
    const int n = xv.dim(0), m = xv.dim(1);
    TensorT<T> out(xv.shape);
    for (int i = 0; i < n; ++i) {
        const T* p = &xv.v[static_cast<size_t>(i) * m];
        T* q = &out.v[static_cast<size_t>(i) * m];
        T mx = p[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, p[j]);
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            q[j] = std::exp(p[j] - mx);
            s += q[j];
        }
        T inv = static_cast<T>(1.0 / s);
        for (int j = 0; j < m; ++j) q[j] *= inv;
    }
    return make_node<T>(std::move(out), {x}, [n, m](NodeT<T>& nd) {
        auto& gx = nd.parents[0]->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const T* y = &nd.value.v[static_cast<size_t>(i) * m];
            const T* gy = &nd.grad.v[static_cast<size_t>(i) * m];
            T* gq = &gx.v[static_cast<size_t>(i) * m];
            double dot = 0.0;
            for (int j = 0; j < m; ++j) dot += static_cast<double>(gy[j]) * y[j];
            for (int j = 0; j < m; ++j) gq[j] += y[j] * (gy[j] - static_cast<T>(dot));
        }
    });
}

template <class T>
VarT<T> reshape(const VarT<T>& x, std::vector<int> shape) {
    check_contract(TensorT<T>::numel_of(shape) == x->value.numel(), "reshape: numel mismatch");
    TensorT<T> out;
    out.shape = std::move(shape);
    out.v = x->value.v;
    return make_node<T>(std::move(out), {x}, [](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += nd.grad.v[i];
    });
}

// [C,H,W] -> tokens [H*W, C]
template <class T>
VarT<T> chw_to_tokens(const VarT<T>& x) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 3, "chw_to_tokens: need [C,H,W]");
    const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    TensorT<T> out({hw, c});
    for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < hw; ++i) out.at2(i, ci) = xv.v[static_cast<size_t>(ci) * hw + i];
    return make_node<T>(std::move(out), {x}, [c, hw](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < hw; ++i) g.v[static_cast<size_t>(ci) * hw + i] += nd.grad.at2(i, ci);
    });
}

// tokens [H*W, C] -> [C,H,W]
template <class T>
VarT<T> tokens_to_chw(const VarT<T>& x, int h, int w) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 2 && xv.dim(0) == h * w, "tokens_to_chw: bad shape");
    const int c = xv.dim(1), hw = h * w;
    TensorT<T> out({c, h, w});
    for (int i = 0; i < hw; ++i)
        for (int ci = 0; ci < c; ++ci) out.v[static_cast<size_t>(ci) * hw + i] = xv.at2(i, ci);
    return make_node<T>(std::move(out), {x}, [c, hw](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int i = 0; i < hw; ++i)
            for (int ci = 0; ci < c; ++ci) g.at2(i, ci) += nd.grad.v[static_cast<size_t>(ci) * hw + i];
    });
}

// Concatenate two [C,H,W] tensors along channels.
template <class T>
VarT<T> concat_channels(const VarT<T>& a, const VarT<T>& b) {
    const auto& av = a->value;
    const auto& bv = b->value;
    check_contract(av.ndim() == 3 && bv.ndim() == 3 && av.dim(1) == bv.dim(1) &&
                       av.dim(2) == bv.dim(2),
                   "concat_channels: spatial mismatch");
    TensorT<T> out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::copy(av.v.begin(), av.v.end(), out.v.begin());
    std::copy(bv.v.begin(), bv.v.end(), out.v.begin() + av.numel());
    int64_t na = av.numel();
    return make_node<T>(std::move(out), {a, b}, [na](NodeT<T>& nd) {
        if (nd.parents[0]->needs_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < na; ++i) g.v[i] += nd.grad.v[i];
        }
        if (nd.parents[1]->needs_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += nd.grad.v[na + i];
        }
    });
}

// Concatenate two vectors.
template <class T>
VarT<T> concat_vec(const VarT<T>& a, const VarT<T>& b) {
    TensorT<T> out({static_cast<int>(a->value.numel() + b->value.numel())});
    std::copy(a->value.v.begin(), a->value.v.end(), out.v.begin());
    std::copy(b->value.v.begin(), b->value.v.end(), out.v.begin() + a->value.numel());
    int64_t na = a->value.numel();
    return make_node<T>(std::move(out), {a, b}, [na](NodeT<T>& nd) {
        if (nd.parents[0]->needs_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < na; ++i) g.v[i] += nd.grad.v[i];
        }
        if (nd.parents[1]->needs_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += nd.grad.v[na + i];
        }
    });
}

// x: [C,H,W] + v: [C] broadcast over spatial dims.
template <class T>
VarT<T> add_channel_vec(const VarT<T>& x, const VarT<T>& v) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 3 && v->value.numel() == xv.dim(0), "add_channel_vec: mismatch");
    const int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
    TensorT<T> out = xv;
    for (int ci = 0; ci < c; ++ci) {
        T b = v->value.v[ci];
        T* p = &out.v[static_cast<size_t>(ci) * hw];
        for (int i = 0; i < hw; ++i) p[i] += b;
    }
    return make_node<T>(std::move(out), {x, v}, [c, hw](NodeT<T>& nd) {
        if (nd.parents[0]->needs_grad) {
            auto& g = nd.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += nd.grad.v[i];
        }
        if (nd.parents[1]->needs_grad) {
            auto& g = nd.parents[1]->ensure_grad();
            for (int ci = 0; ci < c; ++ci) {
                T s = T(0);
                const T* p = &nd.grad.v[static_cast<size_t>(ci) * hw];
                for (int i = 0; i < hw; ++i) s += p[i];
                g.v[ci] += s;
            }
        }
    });
}

// Nearest-neighbour upsample [C,H,W] -> [C,H*fy,W*fx].
template <class T>
VarT<T> upsample_nearest(const VarT<T>& x, int fy, int fx) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 3 && fy >= 1 && fx >= 1, "upsample_nearest: bad args");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    TensorT<T> out({c, h * fy, w * fx});
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h * fy; ++y)
            for (int xg = 0; xg < w * fx; ++xg)
                out.at3(ci, y, xg) = xv.at3(ci, y / fy, xg / fx);
    return make_node<T>(std::move(out), {x}, [c, h, w, fy, fx](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h * fy; ++y)
                for (int xg = 0; xg < w * fx; ++xg)
                    g.at3(ci, y / fy, xg / fx) += nd.grad.at3(ci, y, xg);
    });
}

// Average pool [C,H,W] with square factor (H, W divisible by f).
template <class T>
VarT<T> avg_pool(const VarT<T>& x, int f) {
    const auto& xv = x->value;
    check_contract(xv.ndim() == 3 && xv.dim(1) % f == 0 && xv.dim(2) % f == 0, "avg_pool: bad dims");
    const int c = xv.dim(0), oh = xv.dim(1) / f, ow = xv.dim(2) / f;
    TensorT<T> out({c, oh, ow});
    T inv = T(1) / static_cast<T>(f * f);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < oh; ++y)
            for (int xg = 0; xg < ow; ++xg) {
                T s = T(0);
                for (int dy = 0; dy < f; ++dy)
                    for (int dx = 0; dx < f; ++dx) s += xv.at3(ci, y * f + dy, xg * f + dx);
                out.at3(ci, y, xg) = s * inv;
            }
    return make_node<T>(std::move(out), {x}, [c, oh, ow, f, inv](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < oh; ++y)
                for (int xg = 0; xg < ow; ++xg) {
                    T gv = nd.grad.at3(ci, y, xg) * inv;
                    for (int dy = 0; dy < f; ++dy)
                        for (int dx = 0; dx < f; ++dx) g.at3(ci, y * f + dy, xg * f + dx) += gv;
                }
    });
}

template <class T>
VarT<T> mean_all(const VarT<T>& x) {
    double s = 0.0;
    for (T v : x->value.v) s += v;
    TensorT<T> out({1});
    int64_t n = x->value.numel();
    out.v[0] = static_cast<T>(s / static_cast<double>(n));
    return make_node<T>(std::move(out), {x}, [n](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        T gv = nd.grad.v[0] / static_cast<T>(n);
        for (int64_t i = 0; i < g.numel(); ++i) g.v[i] += gv;
    });
}

// Mean over rows: [N,D] -> [D].
template <class T>
VarT<T> mean_rows(const VarT<T>& x) {
    const int n = x->value.dim(0), d = x->value.dim(1);
    TensorT<T> out({d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.v[j] += x->value.at2(i, j);
    T inv = T(1) / static_cast<T>(n);
    for (int j = 0; j < d; ++j) out.v[j] *= inv;
    return make_node<T>(std::move(out), {x}, [n, d, inv](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) g.at2(i, j) += nd.grad.v[j] * inv;
    });
}

template <class T>
VarT<T> mse_loss(const VarT<T>& pred, const VarT<T>& target) {
    auto d = sub(pred, target);
    return mean_all(mul(d, d));
}

// L2-normalize a vector (returns x / max(||x||, eps)).
template <class T>
VarT<T> l2_normalize(const VarT<T>& x, T eps = T(1e-12)) {
    double s = 0.0;
    for (T v : x->value.v) s += static_cast<double>(v) * v;
    T norm = static_cast<T>(std::sqrt(s));
    T denom = std::max(norm, eps);
    TensorT<T> out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = x->value.v[i] / denom;
    return make_node<T>(std::move(out), {x}, [denom](NodeT<T>& nd) {
        auto& g = nd.parents[0]->ensure_grad();
        const auto& y = nd.value;
        double dot = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i)
            dot += static_cast<double>(nd.grad.v[i]) * y.v[i];
        for (int64_t i = 0; i < g.numel(); ++i)
            g.v[i] += (nd.grad.v[i] - static_cast<T>(dot) * y.v[i]) / denom;
    });
}

}  // namespace egs
