// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "llf/ops.h"
#include "llf/tensor.h"

using namespace llf;
using Catch::Approx;

namespace {

Tensor64 random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Tensor64 t(std::move(shape));
    for (auto& x : t.vec()) x = nd(rng);
    return t;
}

double weighted_sum(const Tensor64& a, const Tensor64& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * w[i];
    return s;
}

}  // namespace

TEST_CASE("matmul examples", "[tensor]") {
    const Tensor64 eye({2, 2}, {1, 0, 0, 1});
    const Tensor64 col({2, 1}, {5, 6});
    CHECK(ops::matmul(eye, col).vec() == std::vector<double>{5, 6});
    const Tensor64 a({2, 2}, {1, 2, 3, 4});
    CHECK(ops::matmul(a, col).vec() == std::vector<double>{17, 39});
    const auto z = ops::matmul(a, Tensor64({2, 3}));
    for (double v : z.vec()) CHECK(v == 0.0);
    CHECK_THROWS_AS(ops::matmul(a, Tensor64({3, 1})), ConfigError);
}

TEST_CASE("matmul_nt and matmul_tn_acc agree with matmul", "[tensor]") {
    std::mt19937_64 rng(3);
    const auto a = random_tensor({3, 4}, rng);
    const auto b = random_tensor({5, 4}, rng);
    Tensor64 bt({4, 5});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) bt.at2(j, i) = b.at2(i, j);
    const auto ref = ops::matmul(a, bt);
    const auto nt = ops::matmul_nt(a, b);
    for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(nt[i] == Approx(ref[i]).epsilon(1e-12));

    Tensor64 acc({4, 5});
    const auto c = random_tensor({3, 5}, rng);
    ops::matmul_tn_acc(a, c, acc);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double s = 0.0;
            for (std::size_t m = 0; m < 3; ++m) s += a.at2(m, i) * c.at2(m, j);
            CHECK(acc.at2(i, j) == Approx(s).epsilon(1e-12));
        }
    }
}

TEST_CASE("silu examples", "[tensor]") {
    const Tensor64 x({3}, {0.0, 1.0, -20.0});
    const auto y = ops::silu(x);
    CHECK(y[0] == 0.0);
    CHECK(std::abs(y[1] - 1.0 / (1.0 + std::exp(-1.0))) < 1e-12);
    CHECK(std::abs(y[1] - 0.731059) < 1e-6);
    CHECK(std::abs(y[2]) < 1e-7);
    CHECK(y[2] < 0.0);
}

TEST_CASE("rmsnorm examples", "[tensor]") {
    const Tensor64 w({2}, {1, 1});
    const auto y = ops::rmsnorm(Tensor64({1, 2}, {3, 4}), w, 0.0);
    CHECK(std::abs(y[0] - 3.0 / std::sqrt(12.5)) < 1e-12);
    CHECK(std::abs(y[0] - 0.848528) < 1e-5);
    CHECK(std::abs(y[1] - 1.131371) < 1e-5);

    const auto c = ops::rmsnorm(Tensor64({1, 4}, 7.5), Tensor64({4}, 1.0), 1e-5);
    for (double v : c.vec()) CHECK(std::abs(v - 1.0) < 1e-4);
}

TEST_CASE("softmax examples and row sums", "[tensor]") {
    const auto half = ops::softmax_rows(Tensor64({1, 2}, {0, 0}));
    CHECK(half[0] == 0.5);
    CHECK(half[1] == 0.5);
    const auto p = ops::softmax_rows(Tensor64({1, 3}, {1, 2, 3}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(std::abs(p[0] - std::exp(1.0) / z) < 1e-12);
    CHECK(std::abs(p[0] - 0.090031) < 1e-5);
    CHECK(std::abs(p[1] - 0.244728) < 1e-5);
    CHECK(std::abs(p[2] - 0.665241) < 1e-5);

    std::mt19937_64 rng(11);
    for (int seed = 0; seed < 20; ++seed) {
        const auto x = random_tensor({4, 9}, rng, 5.0).cast<float>();
        const auto s = ops::softmax_rows(x);
        for (std::size_t r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 9; ++j) sum += s.at2(r, j);
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("rope examples and invariants", "[tensor]") {
    const Tensor64 x({1, 1, 2, 2}, {1, 0, 1, 0});
    const auto y = ops::rope_apply(x, 0, 10000.0);
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 0.0);
    CHECK(std::abs(y[2] - std::cos(1.0)) < 1e-12);
    CHECK(std::abs(y[3] - std::sin(1.0)) < 1e-12);
    CHECK(std::abs(y[2] - 0.540302) < 1e-5);
    CHECK(std::abs(y[3] - 0.841471) < 1e-5);

    std::mt19937_64 rng(5);
    const std::size_t dh = 8;
    const auto r = random_tensor({2, 3, 5, dh}, rng);
    const auto ry = ops::rope_apply(r, 7, 500000.0);
    for (std::size_t row = 0; row < 2 * 3 * 5; ++row) {
        for (std::size_t j = 0; j < dh / 2; ++j) {
            const double* a = r.data() + row * dh;
            const double* b = ry.data() + row * dh;
            const double n0 = std::hypot(a[j], a[j + dh / 2]);
            const double n1 = std::hypot(b[j], b[j + dh / 2]);
            CHECK(std::abs(n0 - n1) < 1e-6);
        }
    }
    const auto back = ops::rope_backward(ry, 7, 500000.0);
    for (std::size_t i = 0; i < r.numel(); ++i) CHECK(std::abs(back[i] - r[i]) < 1e-12);
    const auto first = random_tensor({1, 2, 1, dh}, rng);
    CHECK(ops::rope_apply(first, 0, 500000.0).bitwise_equal(first));
}

TEST_CASE("grouped causal attention examples", "[tensor]") {
    std::mt19937_64 rng(9);
    SECTION("single position returns v") {
        const auto q = random_tensor({1, 2, 1, 4}, rng);
        const auto k = random_tensor({1, 1, 1, 4}, rng);
        const auto v = random_tensor({1, 1, 1, 4}, rng);
        const auto o = ops::grouped_causal_attention(q, k, v);
        for (std::size_t h = 0; h < 2; ++h)
            for (std::size_t i = 0; i < 4; ++i) CHECK(o[h * 4 + i] == v[i]);
    }
    SECTION("K=1 equals replicated heads") {
        const std::size_t H = 4, T = 5, dh = 4;
        const auto q = random_tensor({1, H, T, dh}, rng);
        const auto k = random_tensor({1, 1, T, dh}, rng);
        const auto v = random_tensor({1, 1, T, dh}, rng);
        Tensor64 kr({1, H, T, dh}), vr({1, H, T, dh});
        for (std::size_t h = 0; h < H; ++h) {
            std::copy(k.vec().begin(), k.vec().end(), kr.data() + h * T * dh);
            std::copy(v.vec().begin(), v.vec().end(), vr.data() + h * T * dh);
        }
        const auto a = ops::grouped_causal_attention(q, k, v);
        const auto b = ops::grouped_causal_attention(q, kr, vr);
        CHECK(a.bitwise_equal(b));
    }
    SECTION("constant q and k average the visible values") {
        const std::size_t T = 6, dh = 4;
        const Tensor64 q({1, 1, T, dh}, 0.3);
        const Tensor64 k({1, 1, T, dh}, -0.7);
        const auto v = random_tensor({1, 1, T, dh}, rng);
        const auto o = ops::grouped_causal_attention(q, k, v);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < dh; ++i) {
                double mean = 0.0;
                for (std::size_t s = 0; s <= t; ++s) mean += v[s * dh + i];
                mean /= double(t + 1);
                CHECK(std::abs(o[t * dh + i] - mean) < 1e-12);
            }
        }
    }
}

TEST_CASE("cross entropy examples", "[tensor]") {
    const std::size_t V = 50257;
    const Tensor64 zeros({1, V});
    const std::int32_t target[] = {123};
    const double uniform = ops::cross_entropy(zeros, target, -1);
    CHECK(std::abs(uniform - std::log(double(V))) < 1e-9);
    CHECK(std::abs(uniform - 10.8250) < 1e-3);

    Tensor64 peaked({1, 5});
    peaked[2] = 30.0;
    const std::int32_t t2[] = {2};
    const double l = ops::cross_entropy(peaked, t2, -1);
    CHECK(l >= 0.0);
    CHECK(l < 1e-9);

    const std::int32_t ignored[] = {-1, -1};
    CHECK_THROWS(ops::cross_entropy(Tensor64({2, 5}), ignored, -1));

    Tensor64 d;
    std::mt19937_64 rng(1);
    const auto logits = random_tensor({3, 5}, rng);
    const std::int32_t mixed[] = {1, -1, 4};
    ops::cross_entropy(logits, mixed, -1, &d);
    for (std::size_t j = 0; j < 5; ++j) CHECK(d.at2(1, j) == 0.0);
}

TEST_CASE("grad norm and clipping", "[tensor]") {
    GradSet<double> g;
    g.emplace("w", Tensor64({2}, {3, 4}));
    CHECK(ops::global_grad_norm(g) == 5.0);
    GradSet<double> split;
    split.emplace("a", Tensor64({1}, {3}));
    split.emplace("b", Tensor64({1}, {4}));
    CHECK(ops::global_grad_norm(split) == 5.0);
    GradSet<double> z;
    z.emplace("w", Tensor64({3}));
    CHECK(ops::global_grad_norm(z) == 0.0);

    auto c = g;
    CHECK(ops::clip_gradients(c, 1.0) == 5.0);
    CHECK(std::abs(c.at("w")[0] - 0.6) < 1e-15);
    CHECK(std::abs(c.at("w")[1] - 0.8) < 1e-15);

    GradSet<double> small;
    small.emplace("w", Tensor64({2}, {0.3, 0.4}));
    auto s2 = small;
    ops::clip_gradients(s2, 1.0);
    CHECK(s2.at("w").bitwise_equal(small.at("w")));
    auto inf = g;
    ops::clip_gradients(inf, std::numeric_limits<double>::infinity());
    CHECK(inf.at("w").bitwise_equal(g.at("w")));

    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        GradSet<double> r;
        r.emplace("x", random_tensor({7}, rng, 3.0));
        const double before = ops::global_grad_norm(r);
        ops::clip_gradients(r, 1.0);
        CHECK(ops::global_grad_norm(r) <= before + 1e-12);
    }
}

TEST_CASE("grad_check trivial losses", "[tensor][gradcheck]") {
    TensorMap<double> params;
    params.emplace("w", Tensor64({3}, {0.5, -1.0, 2.0}));
    const Tensor64 x({3}, {1.5, 2.5, -0.5});
    GradSet<double> g;
    g.emplace("w", x);
    const auto lin = ops::grad_check([&](const TensorMap<double>& p) { return weighted_sum(p.at("w"), x); }, params, g);
    CHECK(lin.max_rel_error < 1e-10);

    GradSet<double> zero;
    zero.emplace("w", Tensor64({3}));
    const auto c = ops::grad_check([](const TensorMap<double>&) { return 4.0; }, params, zero);
    CHECK(c.max_rel_error == 0.0);

    GradSet<double> wrong;
    wrong.emplace("w", Tensor64({3}, {1, 1, 1}));
    CHECK(ops::grad_check([&](const TensorMap<double>& p) { return weighted_sum(p.at("w"), x); }, params, wrong)
              .max_rel_error > 0.1);
}

TEST_CASE("op gradients match central differences over 20 seeds", "[tensor][gradcheck]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t B = 1, H = 4, K = 2, T = 3, dh = 4;
        TensorMap<double> p;
        p.emplace("a", random_tensor({3, 4}, rng));
        p.emplace("b", random_tensor({4, 2}, rng));
        p.emplace("x", random_tensor({3, 6}, rng));
        p.emplace("nw", random_tensor({6}, rng));
        p.emplace("q", random_tensor({B, H, T, dh}, rng));
        p.emplace("k", random_tensor({B, K, T, dh}, rng));
        p.emplace("v", random_tensor({B, K, T, dh}, rng));
        p.emplace("logits", random_tensor({3, 5}, rng));
        const auto w_mm = random_tensor({3, 2}, rng);
        const auto w_silu = random_tensor({3, 6}, rng);
        const auto w_norm = random_tensor({3, 6}, rng);
        const auto w_att = random_tensor({B, H, T, dh}, rng);
        const std::int32_t targets[] = {0, 4, 2};

        auto loss = [&](const TensorMap<double>& q) {
            double l = weighted_sum(ops::matmul(q.at("a"), q.at("b")), w_mm);
            l += weighted_sum(ops::silu(q.at("x")), w_silu);
            l += weighted_sum(ops::rmsnorm(q.at("x"), q.at("nw"), 1e-5), w_norm);
            const auto qr = ops::rope_apply(q.at("q"), 2, 10000.0);
            const auto kr = ops::rope_apply(q.at("k"), 2, 10000.0);
            l += weighted_sum(ops::grouped_causal_attention(qr, kr, q.at("v")), w_att);
            l += ops::cross_entropy(q.at("logits"), targets, -1);
            return l;
        };

        GradSet<double> g = zeros_like(p);
        // matmul: dA = W·Bᵀ, dB = Aᵀ·W
        g.at("a") = ops::matmul_nt(w_mm, p.at("b"));
        ops::matmul_tn_acc(p.at("a"), w_mm, g.at("b"));
        auto dx = ops::silu_backward(p.at("x"), w_silu);
        std::vector<double> inv;
        ops::rmsnorm(p.at("x"), p.at("nw"), 1e-5, &inv);
        const auto dxn = ops::rmsnorm_backward(p.at("x"), p.at("nw"), inv, w_norm, &g.at("nw"));
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dxn[i];
        g.at("x") = dx;
        const auto qr = ops::rope_apply(p.at("q"), 2, 10000.0);
        const auto kr = ops::rope_apply(p.at("k"), 2, 10000.0);
        Tensor64 probs;
        ops::grouped_causal_attention(qr, kr, p.at("v"), &probs);
        const auto ag = ops::attention_backward(qr, kr, p.at("v"), probs, w_att);
        g.at("q") = ops::rope_backward(ag.dq, 2, 10000.0);
        g.at("k") = ops::rope_backward(ag.dk, 2, 10000.0);
        g.at("v") = ag.dv;
        ops::cross_entropy(p.at("logits"), targets, -1, &g.at("logits"));

        const auto r = ops::grad_check(loss, p, g);
        INFO("seed " << seed << " worst " << r.worst_name << "[" << r.worst_index << "]");
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("ops are bitwise deterministic", "[tensor]") {
    std::mt19937_64 rng(21);
    const auto a = random_tensor({16, 32}, rng).cast<float>();
    const auto b = random_tensor({32, 8}, rng).cast<float>();
    CHECK(ops::matmul(a, b).bitwise_equal(ops::matmul(a, b)));
    const auto q = random_tensor({2, 4, 7, 8}, rng).cast<float>();
    const auto k = random_tensor({2, 2, 7, 8}, rng).cast<float>();
    CHECK(ops::grouped_causal_attention(q, k, k).bitwise_equal(ops::grouped_causal_attention(q, k, k)));
}

TEST_CASE("finite checking flag", "[tensor]") {
    ops::set_check_finite(true);
    CHECK_THROWS_AS(ops::silu(Tensor64({1}, {std::numeric_limits<double>::quiet_NaN()})), NumericError);
    ops::set_check_finite(false);
    CHECK_NOTHROW(ops::silu(Tensor64({1}, {std::numeric_limits<double>::quiet_NaN()})));
}

TEST_CASE("fnv1a64 reference values", "[tensor]") {
    CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
}
