#pragma once

// Parameter-owning building blocks on top of the autodiff graph. Each layer
// registers its tensors in a ParamStore so checkpointing, optimizers, and
// freeze/checksum logic can walk every parameter by name.

#include <memory>
#include <string>
#include <vector>

#include "core/graph.hpp"

namespace egs {

template <class T>
struct ParamStoreT {
    std::vector<std::pair<std::string, VarT<T>>> items;

    VarT<T> add(const std::string& name, TensorT<T> init, bool trainable = true) {
        auto p = leaf(std::move(init), trainable);
        items.push_back({name, p});
        return p;
    }

    void zero_grad() {
        for (auto& [name, p] : items)
            if (!p->grad.v.empty()) p->grad.fill(T(0));
    }

    void set_trainable(bool on) {
        for (auto& [name, p] : items) p->needs_grad = on;
    }

    int64_t count() const {
        int64_t n = 0;
        for (auto& [name, p] : items) n += p->value.numel();
        return n;
    }

    uint64_t checksum() const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto& [name, p] : items) {
            h = fnv1a64(name, h);
            h = tensor_checksum(p->value, h);
        }
        return h;
    }

    VarT<T> find(const std::string& name) const {
        for (auto& [n, p] : items)
            if (n == name) return p;
        return nullptr;
    }
};

using ParamStore = ParamStoreT<float>;

// Kaiming-style fan-in init used throughout.
template <class T>
TensorT<T> init_weight(std::vector<int> shape, Rng& rng) {
    int64_t fan_in = 1;
    for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    T s = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
    return TensorT<T>::randn(std::move(shape), rng, s);
}

template <class T>
struct LinearLayerT {
    VarT<T> w, b;

    LinearLayerT() = default;
    LinearLayerT(ParamStoreT<T>& ps, const std::string& name, int in, int out, Rng& rng,
                 bool zero_init = false) {
        w = ps.add(name + ".w",
                   zero_init ? TensorT<T>::zeros({out, in}) : init_weight<T>({out, in}, rng));
        b = ps.add(name + ".b", TensorT<T>::zeros({out}));
    }

    VarT<T> operator()(const VarT<T>& x) const { return linear(x, w, b); }

    // Apply to a bare vector [D] (reshaped through [1,D]).
    VarT<T> vec(const VarT<T>& x) const {
        auto y = linear(reshape(x, {1, x->value.dim(0)}), w, b);
        return reshape(y, {w->value.dim(0)});
    }
};

template <class T>
struct Conv2dLayerT {
    VarT<T> w, b;
    int stride = 1, pad = 0;

    Conv2dLayerT() = default;
    Conv2dLayerT(ParamStoreT<T>& ps, const std::string& name, int in_ch, int out_ch, int k,
                 int stride_, int pad_, Rng& rng, bool zero_init = false)
        : stride(stride_), pad(pad_) {
        w = ps.add(name + ".w", zero_init ? TensorT<T>::zeros({out_ch, in_ch, k, k})
                                          : init_weight<T>({out_ch, in_ch, k, k}, rng));
        b = ps.add(name + ".b", TensorT<T>::zeros({out_ch}));
    }

    VarT<T> operator()(const VarT<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <class T>
struct GroupNormLayerT {
    VarT<T> gamma, beta;
    int groups = 1;

    GroupNormLayerT() = default;
    GroupNormLayerT(ParamStoreT<T>& ps, const std::string& name, int ch, int groups_)
        : groups(groups_) {
        gamma = ps.add(name + ".g", TensorT<T>::full({ch}, T(1)));
        beta = ps.add(name + ".b", TensorT<T>::zeros({ch}));
    }

    VarT<T> operator()(const VarT<T>& x) const { return group_norm(x, groups, gamma, beta); }
};

template <class T>
struct LayerNormLayerT {
    VarT<T> gamma, beta;

    LayerNormLayerT() = default;
    LayerNormLayerT(ParamStoreT<T>& ps, const std::string& name, int d) {
        gamma = ps.add(name + ".g", TensorT<T>::full({d}, T(1)));
        beta = ps.add(name + ".b", TensorT<T>::zeros({d}));
    }

    VarT<T> operator()(const VarT<T>& x) const { return layer_norm(x, gamma, beta); }
};

// BatchNorm over [C,H,W]. Statistics are computed over the spatial dims of a
// single sample (batch dimension 1) while training; running averages are used
// in eval mode.
template <class T>
struct BatchNorm2dLayerT {
    VarT<T> gamma, beta;
    TensorT<T> running_mean, running_var;
    T momentum = T(0.1);

    BatchNorm2dLayerT() = default;
    BatchNorm2dLayerT(ParamStoreT<T>& ps, const std::string& name, int ch) {
        gamma = ps.add(name + ".g", TensorT<T>::full({ch}, T(1)));
        beta = ps.add(name + ".b", TensorT<T>::zeros({ch}));
        // Running stats ride along as non-trainable params so checkpoints carry them.
        auto rm = ps.add(name + ".rm", TensorT<T>::zeros({ch}), false);
        auto rv = ps.add(name + ".rv", TensorT<T>::full({ch}, T(1)), false);
        rm_node_ = rm;
        rv_node_ = rv;
    }

    VarT<T> operator()(const VarT<T>& x, bool training) {
        const int c = x->value.dim(0);
        if (training) {
            // Per-channel spatial stats; fold updates into the running buffers.
            const int hw = x->value.dim(1) * x->value.dim(2);
            for (int ci = 0; ci < c; ++ci) {
                const T* p = &x->value.v[static_cast<size_t>(ci) * hw];
                double m = 0.0;
                for (int i = 0; i < hw; ++i) m += p[i];
                m /= hw;
                double var = 0.0;
                for (int i = 0; i < hw; ++i) {
                    double d = p[i] - m;
                    var += d * d;
                }
                var /= hw;
                rm_node_->value.v[ci] =
                    (T(1) - momentum) * rm_node_->value.v[ci] + momentum * static_cast<T>(m);
                rv_node_->value.v[ci] =
                    (T(1) - momentum) * rv_node_->value.v[ci] + momentum * static_cast<T>(var);
            }
            return group_norm(x, c, gamma, beta);  // per-channel normalization
        }
        // Eval: normalize with running stats (pure elementwise affine).
        TensorT<T> out(x->value.shape);
        const int hw = x->value.dim(1) * x->value.dim(2);
        for (int ci = 0; ci < c; ++ci) {
            T sc = gamma->value.v[ci] /
                   static_cast<T>(std::sqrt(static_cast<double>(rv_node_->value.v[ci]) + 1e-5));
            T sh = beta->value.v[ci] - rm_node_->value.v[ci] * sc;
            const T* p = &x->value.v[static_cast<size_t>(ci) * hw];
            T* q = &out.v[static_cast<size_t>(ci) * hw];
            for (int i = 0; i < hw; ++i) q[i] = p[i] * sc + sh;
        }
        return leaf(std::move(out));
    }

private:
    VarT<T> rm_node_, rv_node_;
};

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

// Single-head scaled dot-product attention: softmax(Q K^T / sqrt(d)) V.
// q: [Nq,D], k: [Nk,D], v: [Nk,Dv].
template <class T>
VarT<T> scaled_dot_attention(const VarT<T>& q, const VarT<T>& k, const VarT<T>& v) {
    const int d = q->value.dim(1);
    auto scores = scale(matmul(q, k, false, true), static_cast<T>(1.0 / std::sqrt(double(d))));
    auto attn = softmax_rows(scores);
    return matmul(attn, v);
}

// Residual self-attention over token rows: h + Attn(Q_h, K_h, V_h) W_out.
template <class T>
struct SelfAttentionT {
    LinearLayerT<T> q, k, v, out;

    SelfAttentionT() = default;
    SelfAttentionT(ParamStoreT<T>& ps, const std::string& name, int dim, Rng& rng) {
        q = LinearLayerT<T>(ps, name + ".q", dim, dim, rng);
        k = LinearLayerT<T>(ps, name + ".k", dim, dim, rng);
        v = LinearLayerT<T>(ps, name + ".v", dim, dim, rng);
        out = LinearLayerT<T>(ps, name + ".o", dim, dim, rng);
    }

    VarT<T> operator()(const VarT<T>& h) const {
        auto a = scaled_dot_attention(q(h), k(h), v(h));
        return add(h, out(a));
    }
};

// Residual cross-attention: queries from h, keys/values from a context token
// matrix (video-embedding rows, or a single conditioning vector).
template <class T>
struct CrossAttentionT {
    LinearLayerT<T> q, k, v, out;

    CrossAttentionT() = default;
    // zero_out starts the residual branch as a no-op so a context can be
    // introduced later without disturbing an already-trained trunk.
    CrossAttentionT(ParamStoreT<T>& ps, const std::string& name, int dim, int ctx_dim, Rng& rng,
                    bool zero_out = false) {
        q = LinearLayerT<T>(ps, name + ".q", dim, dim, rng);
        k = LinearLayerT<T>(ps, name + ".k", ctx_dim, dim, rng);
        v = LinearLayerT<T>(ps, name + ".v", ctx_dim, dim, rng);
        out = LinearLayerT<T>(ps, name + ".o", dim, dim, rng, zero_out);
    }

    VarT<T> operator()(const VarT<T>& h, const VarT<T>& context) const {
        auto a = scaled_dot_attention(q(h), k(context), v(context));
        return add(h, out(a));
    }
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

// Adam / AdamW (decoupled weight decay). Weight decay 0 gives plain Adam.
template <class T>
struct AdamWT {
    T lr = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    T weight_decay = T(0);
    int64_t t = 0;
    std::vector<TensorT<T>> m, v;
    std::vector<VarT<T>> params;

    AdamWT(const ParamStoreT<T>& ps, T lr_, T weight_decay_ = T(0))
        : lr(lr_), weight_decay(weight_decay_) {
        for (auto& [name, p] : ps.items) {
            if (!p->needs_grad) continue;
            params.push_back(p);
            m.push_back(TensorT<T>(p->value.shape));
            v.push_back(TensorT<T>(p->value.shape));
        }
    }

    void step() {
        ++t;
        T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
        T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (p->grad.v.empty()) continue;
            for (int64_t j = 0; j < p->value.numel(); ++j) {
                T g = p->grad.v[j];
                m[i].v[j] = beta1 * m[i].v[j] + (T(1) - beta1) * g;
                v[i].v[j] = beta2 * v[i].v[j] + (T(1) - beta2) * g * g;
                T mhat = m[i].v[j] / bc1;
                T vhat = v[i].v[j] / bc2;
                p->value.v[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p->value.v[j]);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params)
            if (!p->grad.v.empty()) p->grad.fill(T(0));
    }
};

using AdamW = AdamWT<float>;

// Sinusoidal timestep embedding (half sin / half cos), no grad through t.
template <class T>
TensorT<T> timestep_embedding(int t, int dim) {
    TensorT<T> e({dim});
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / half);
        e.v[i] = static_cast<T>(std::sin(t * freq));
        e.v[half + i] = static_cast<T>(std::cos(t * freq));
    }
    return e;
}

}  // namespace egs
