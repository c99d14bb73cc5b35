#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/rng.hpp"

namespace egs {

// Dense row-major tensor of up to 4 dims. Deliberately minimal: shape + flat
// storage. All model code indexes explicitly.
template <class T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> v;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            check_contract(d >= 0, "tensor: negative dim");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    T& at(int i) { return v[static_cast<size_t>(i)]; }
    const T& at(int i) const { return v[static_cast<size_t>(i)]; }
    T& at2(int i, int j) { return v[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at2(int i, int j) const { return v[static_cast<size_t>(i) * shape[1] + j]; }
    T& at3(int c, int i, int j) {
        return v[(static_cast<size_t>(c) * shape[1] + i) * shape[2] + j];
    }
    const T& at3(int c, int i, int j) const {
        return v[(static_cast<size_t>(c) * shape[1] + i) * shape[2] + j];
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

    static TensorT full(std::vector<int> s, T x) {
        TensorT t(std::move(s));
        t.fill(x);
        return t;
    }

    static TensorT randn(std::vector<int> s, Rng& rng, T scale = T(1)) {
        TensorT t(std::move(s));
        for (auto& x : t.v) x = static_cast<T>(rng.gaussian()) * scale;
        return t;
    }

    static TensorT uniform(std::vector<int> s, Rng& rng, T lo, T hi) {
        TensorT t(std::move(s));
        for (auto& x : t.v) x = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <class T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
    check_contract(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i])));
    return m;
}

template <class T>
double frobenius_norm(const TensorT<T>& a) {
    double s = 0.0;
    for (T x : a.v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

template <class T>
uint64_t tensor_checksum(const TensorT<T>& a, uint64_t h = 0xcbf29ce484222325ull) {
    h = fnv1a64(a.shape.data(), a.shape.size() * sizeof(int), h);
    return fnv1a64(a.v.data(), a.v.size() * sizeof(T), h);
}

}  // namespace egs
