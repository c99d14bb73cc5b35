#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "core/graph.hpp"
#include "core/layers.hpp"

using namespace egs;

namespace {

// Central finite differences against the recorded analytic gradient for every
// double-precision leaf in `inputs`, with `fn` rebuilding the scalar loss from
// current leaf values.
void check_grads(std::vector<VarT<double>> inputs, std::function<VarT<double>()> fn,
                 double tol = 1e-6) {
    auto loss = fn();
    for (auto& in : inputs) {
        if (!in->grad.v.empty()) in->grad.fill(0.0);
    }
    backward(loss);
    const double h = 1e-5;
    for (auto& in : inputs) {
        REQUIRE(!in->grad.v.empty());
        for (int64_t i = 0; i < in->value.numel(); ++i) {
            double keep = in->value.v[i];
            in->value.v[i] = keep + h;
            double fp = fn()->value.v[0];
            in->value.v[i] = keep - h;
            double fm = fn()->value.v[0];
            in->value.v[i] = keep;
            double fd = (fp - fm) / (2 * h);
            double an = in->grad.v[i];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            CHECK(std::abs(fd - an) / denom < tol);
        }
    }
}

VarT<double> randn_leaf(std::vector<int> shape, Rng& rng, bool grad = true) {
    return leaf(TensorD::randn(std::move(shape), rng), grad);
}

}  // namespace

TEST_CASE("elementwise ops backward matches finite differences") {
    Rng rng(11);
    auto a = randn_leaf({3, 4}, rng);
    auto b = randn_leaf({3, 4}, rng);
    check_grads({a, b}, [&] { return mean_all(mul(add(a, b), sub(a, b))); });
    check_grads({a}, [&] { return mean_all(silu(scale(a, 1.7))); });
    check_grads({a}, [&] { return mean_all(sigmoid(a)); });
    check_grads({a}, [&] { return mean_all(relu(add(a, b))); }, 1e-5);
}

TEST_CASE("matmul backward all transpose combinations") {
    Rng rng(12);
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            auto a = randn_leaf(ta ? std::vector<int>{4, 3} : std::vector<int>{3, 4}, rng);
            auto b = randn_leaf(tb ? std::vector<int>{5, 4} : std::vector<int>{4, 5}, rng);
            check_grads({a, b}, [&] { return mean_all(matmul(a, b, ta, tb)); });
        }
    }
}

TEST_CASE("linear backward") {
    Rng rng(13);
    auto x = randn_leaf({4, 6}, rng);
    auto w = randn_leaf({3, 6}, rng);
    auto b = randn_leaf({3}, rng);
    check_grads({x, w, b}, [&] { return mean_all(mul(linear(x, w, b), linear(x, w, b))); });
}

TEST_CASE("conv2d backward, strides and padding") {
    Rng rng(14);
    auto x = randn_leaf({2, 6, 7}, rng);
    auto w = randn_leaf({3, 2, 3, 3}, rng);
    auto b = randn_leaf({3}, rng);
    check_grads({x, w, b}, [&] {
        auto y = conv2d(x, w, b, 1, 1);
        return mean_all(mul(y, y));
    });
    check_grads({x, w, b}, [&] {
        auto y = conv2d(x, w, b, 2, 1);
        return mean_all(mul(y, y));
    });
}

TEST_CASE("group_norm and layer_norm backward") {
    Rng rng(15);
    auto x = randn_leaf({4, 3, 5}, rng);
    auto g = leaf(TensorD::uniform({4}, rng, 0.5, 1.5), true);
    auto be = randn_leaf({4}, rng);
    check_grads({x, g, be}, [&] {
        auto y = group_norm(x, 2, g, be);
        return mean_all(mul(y, y));
    }, 1e-5);

    auto t = randn_leaf({5, 6}, rng);
    auto lg = leaf(TensorD::uniform({6}, rng, 0.5, 1.5), true);
    auto lb = randn_leaf({6}, rng);
    check_grads({t, lg, lb}, [&] {
        auto y = layer_norm(t, lg, lb);
        return mean_all(mul(y, y));
    }, 1e-5);
}

TEST_CASE("softmax backward and row normalization") {
    Rng rng(16);
    auto x = randn_leaf({4, 7}, rng);
    auto sm = softmax_rows(x);
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) s += sm->value.at2(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto w = randn_leaf({4, 7}, rng, false);
    check_grads({x}, [&] { return mean_all(mul(softmax_rows(x), w)); });
}

TEST_CASE("shape ops backward") {
    Rng rng(17);
    auto x = randn_leaf({3, 4, 4}, rng);
    check_grads({x}, [&] {
        auto t = chw_to_tokens(x);
        auto back = tokens_to_chw(t, 4, 4);
        return mean_all(mul(back, back));
    });
    auto a = randn_leaf({2, 3, 3}, rng);
    auto b = randn_leaf({4, 3, 3}, rng);
    check_grads({a, b}, [&] {
        auto c = concat_channels(a, b);
        return mean_all(mul(c, c));
    });
    auto v = randn_leaf({3}, rng);
    check_grads({x, v}, [&] {
        auto y = add_channel_vec(x, v);
        return mean_all(mul(y, y));
    });
    check_grads({x}, [&] {
        auto y = upsample_nearest(x, 2, 2);
        return mean_all(mul(y, y));
    });
    check_grads({x}, [&] {
        auto y = avg_pool(x, 2);
        return mean_all(mul(y, y));
    });
    auto u = randn_leaf({5}, rng);
    auto w2 = randn_leaf({5}, rng, false);
    check_grads({u}, [&] {
        auto y = l2_normalize(u);
        return mean_all(mul(y, w2));
    });
    auto rows = randn_leaf({4, 5}, rng);
    check_grads({rows}, [&] {
        auto y = mean_rows(rows);
        return mean_all(mul(y, y));
    });
}

TEST_CASE("attention matches brute-force definition and differentiates") {
    Rng rng(18);
    auto q = randn_leaf({5, 8}, rng);
    auto k = randn_leaf({7, 8}, rng);
    auto v = randn_leaf({7, 8}, rng);
    auto out = scaled_dot_attention(q, k, v);

    // Brute force in double.
    for (int i = 0; i < 5; ++i) {
        std::vector<double> scores(7);
        double mx = -1e300;
        for (int j = 0; j < 7; ++j) {
            double s = 0.0;
            for (int d = 0; d < 8; ++d) s += q->value.at2(i, d) * k->value.at2(j, d);
            scores[j] = s / std::sqrt(8.0);
            mx = std::max(mx, scores[j]);
        }
        double z = 0.0;
        for (double& s : scores) {
            s = std::exp(s - mx);
            z += s;
        }
        for (int d = 0; d < 8; ++d) {
            double expect = 0.0;
            for (int j = 0; j < 7; ++j) expect += scores[j] / z * v->value.at2(j, d);
            CHECK(out->value.at2(i, d) == doctest::Approx(expect).epsilon(1e-10));
        }
    }
    check_grads({q, k, v}, [&] {
        auto y = scaled_dot_attention(q, k, v);
        return mean_all(mul(y, y));
    });
}

TEST_CASE("no-grad mode builds leaf results") {
    Rng rng(19);
    auto a = randn_leaf({2, 2}, rng);
    NoGradGuard ng;
    auto y = mul(a, a);
    CHECK_FALSE(y->needs_grad);
    CHECK(y->parents.empty());
}

TEST_CASE("adamw decays weights and descends") {
    Rng rng(20);
    ParamStoreT<double> ps;
    auto w = ps.add("w", TensorD::randn({4, 4}, rng));
    AdamWT<double> opt(ps, 0.05, 0.0);
    double prev = 1e300;
    for (int i = 0; i < 50; ++i) {
        opt.zero_grad();
        auto loss = mean_all(mul(w, w));
        backward(loss);
        opt.step();
        CHECK(loss->value.v[0] <= prev + 1e-12);
        prev = loss->value.v[0];
    }
    CHECK(prev < 0.1);
}
