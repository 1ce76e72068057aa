#include <doctest.h>

#include "test_util.hpp"

using namespace faceswap;
using fstest::check_gradients;

namespace {

Tensor rnd(std::vector<int> shape, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    return Tensor::uniform(std::move(shape), rng, lo, hi);
}

}  // namespace

TEST_CASE("elementwise op gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            auto y = ad::add(ad::mul(v[0], v[1]), ad::scale(ad::sub(v[0], v[1]), 0.3f));
            return ad::sum_all(ad::silu(ad::add_scalar(y, 0.1f)));
        },
        {rnd({2, 3, 3}, 1), rnd({2, 3, 3}, 2)});
    CHECK(r.ok);
}

TEST_CASE("reduction and vector op gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            auto a = ad::mean_all(ad::mul(v[0], v[0]));
            auto b = ad::mse(v[0], v[1]);
            auto c = ad::dot(v[0], v[1]);
            return ad::add(a, ad::add(b, ad::scale(c, 0.1f)));
        },
        {rnd({8}, 3), rnd({8}, 4)});
    CHECK(r.ok);
}

TEST_CASE("sqrt and division gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            return ad::sum_all(ad::div_s(ad::sqrt_s(v[0], 0.1f), ad::add_scalar(v[1], 3.0f)));
        },
        {rnd({6}, 5, 0.5f, 2.0f), rnd({6}, 6)});
    CHECK(r.ok);
}

TEST_CASE("l2_normalize and cosine gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            return ad::cosine(ad::l2_normalize(v[0]), ad::l2_normalize(v[1]));
        },
        {rnd({5}, 7), rnd({5}, 8)}, 1e-3);
    CHECK(r.ok);
}

TEST_CASE("shape op gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            auto cat = ad::concat_ch(v[0], v[1]);
            auto pooled = ad::avg_pool2(cat);
            auto up = ad::upsample_nearest2(pooled);
            return ad::sum_all(ad::mul(up, up));
        },
        {rnd({1, 4, 4}, 9), rnd({2, 4, 4}, 10)});
    CHECK(r.ok);
}

TEST_CASE("broadcast_add_ch and global_avg_pool gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            auto y = ad::broadcast_add_ch(v[0], v[1]);
            return ad::sum_all(ad::mul(ad::global_avg_pool(y), v[1]));
        },
        {rnd({3, 2, 2}, 11), rnd({3}, 12)});
    CHECK(r.ok);
}

TEST_CASE("crop_resize gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            auto c = ad::crop_resize(v[0], 0.7f, 1.2f, 2.5f, 2.5f, 4, 4);
            return ad::sum_all(ad::mul(c, c));
        },
        {rnd({2, 5, 5}, 13)});
    CHECK(r.ok);
}

TEST_CASE("linear layer gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            return ad::sum_all(ad::silu(ad::linear(v[0], v[1], v[2])));
        },
        {rnd({4}, 14), rnd({3, 4}, 15), rnd({3}, 16)});
    CHECK(r.ok);
}

TEST_CASE("conv2d gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            return ad::sum_all(ad::mul(ad::conv2d(v[0], v[1], v[2], 1), v[3]));
        },
        {rnd({2, 4, 4}, 17), rnd({3, 2, 3, 3}, 18), rnd({3}, 19), rnd({3, 4, 4}, 20)});
    CHECK(r.ok);
}

TEST_CASE("clamp forward and gradient gating") {
    Tensor x({6}, {-2.0f, -0.5f, 0.0f, 0.4f, 1.5f, 0.9f});
    auto v = ad::leaf(x);
    auto y = ad::clamp(v, -1.0f, 1.0f);
    CHECK(y->value.data == FloatBuf({-1.0f, -0.5f, 0.0f, 0.4f, 1.0f, 0.9f}));
    ad::backward(ad::sum_all(ad::mul(y, y)));
    // saturated elements get zero gradient, interior ones 2*y
    CHECK(v->grad.data[0] == 0.0f);
    CHECK(v->grad.data[4] == 0.0f);
    CHECK(v->grad.data[1] == doctest::Approx(-1.0f));
    CHECK(v->grad.data[3] == doctest::Approx(0.8f));
    CHECK_THROWS_AS(ad::clamp(v, 1.0f, -1.0f), ParameterError);

    auto r = check_gradients(
        [](const std::vector<ad::Var>& v2) {
            return ad::sum_all(ad::mul(ad::clamp(v2[0], -1.0f, 1.0f), v2[0]));
        },
        {Tensor({4}, {-1.7f, -0.3f, 0.5f, 1.4f})});
    CHECK(r.ok);
}

TEST_CASE("group_norm gradients") {
    // float32 central differences are too noisy for the normalization terms,
    // so the primary oracle is a double-precision reference gradient of
    // sum(y^2); FD stays as a coarse sanity check.
    Tensor xt = rnd({4, 3, 3}, 21), gt = rnd({4}, 22, 0.5f, 1.5f), bt = rnd({4}, 23);
    auto x = ad::leaf(xt);
    auto g = ad::leaf(gt);
    auto b = ad::leaf(bt);
    ad::backward(ad::sum_all(ad::mul(ad::group_norm(x, g, b, 2), ad::group_norm(x, g, b, 2))));

    const int C = 4, HW = 9, groups = 2, cg = 2;
    const double eps = 1e-5;
    std::vector<double> xh(36), dx(36, 0), dgm(4, 0), dbt(4, 0);
    for (int gr = 0; gr < groups; ++gr) {
        int base = gr * cg * HW;
        double m = 0, v = 0;
        for (int i = 0; i < cg * HW; ++i) m += xt.data[base + i];
        m /= cg * HW;
        for (int i = 0; i < cg * HW; ++i) {
            double d = xt.data[base + i] - m;
            v += d * d;
        }
        v /= cg * HW;
        double is = 1.0 / std::sqrt(v + eps);
        for (int i = 0; i < cg * HW; ++i) xh[base + i] = (xt.data[base + i] - m) * is;
        std::vector<double> dxh(cg * HW);
        double sd = 0, sdx = 0;
        for (int j = 0; j < cg; ++j)
            for (int i = 0; i < HW; ++i) {
                int c = gr * cg + j;
                double yv = gt.data[c] * xh[c * HW + i] + bt.data[c];
                double d = 2 * yv * gt.data[c];
                dxh[j * HW + i] = d;
                sd += d;
                sdx += d * xh[c * HW + i];
                dgm[c] += 2 * yv * xh[c * HW + i];
                dbt[c] += 2 * yv;
            }
        sd /= cg * HW;
        sdx /= cg * HW;
        for (int j = 0; j < cg; ++j)
            for (int i = 0; i < HW; ++i) {
                int c = gr * cg + j;
                dx[c * HW + i] = is * (dxh[j * HW + i] - sd - xh[c * HW + i] * sdx);
            }
    }
    for (int i = 0; i < C * HW; ++i) CHECK(std::fabs(dx[i] - x->grad.data[i]) < 1e-4);
    for (int c = 0; c < C; ++c) {
        CHECK(std::fabs(dgm[c] - g->grad.data[c]) < 1e-4);
        CHECK(std::fabs(dbt[c] - b->grad.data[c]) < 1e-4);
    }

    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            auto y = ad::group_norm(v[0], v[1], v[2], 2);
            return ad::sum_all(ad::mul(y, y));
        },
        {xt, gt, bt}, 1e-2, 5e-2);
    CHECK(r.ok);
}

TEST_CASE("softmax_ch gradients and normalization") {
    Tensor x = rnd({3, 2, 2}, 24);
    Tensor p = ad::softmax_ch(ad::constant(x))->value;
    for (int y = 0; y < 2; ++y)
        for (int xx = 0; xx < 2; ++xx) {
            float s = 0;
            for (int c = 0; c < 3; ++c) s += p.at(c, y, xx);
            CHECK(s == doctest::Approx(1.0f).epsilon(1e-5));
        }
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            return ad::sum_all(ad::mul(ad::softmax_ch(v[0]), v[1]));
        },
        {x, rnd({3, 2, 2}, 25)}, 1e-3);
    CHECK(r.ok);
}

TEST_CASE("attention gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) {
            return ad::sum_all(ad::mul(ad::attention(v[0], v[1], v[2]), v[3]));
        },
        {rnd({2, 2, 2}, 26), rnd({2, 2, 2}, 27), rnd({2, 2, 2}, 28), rnd({2, 2, 2}, 29)}, 1e-3);
    CHECK(r.ok);
}

TEST_CASE("cross entropy gradients") {
    auto r = check_gradients(
        [](const std::vector<ad::Var>& v) { return ad::cross_entropy_logits(v[0], 2); },
        {rnd({5}, 30)}, 1e-3);
    CHECK(r.ok);
    std::vector<int> labels = {0, 1, 2, 1};
    auto r2 = check_gradients(
        [labels](const std::vector<ad::Var>& v) { return ad::cross_entropy_map(v[0], labels); },
        {rnd({3, 2, 2}, 31)}, 1e-3);
    CHECK(r2.ok);
}

TEST_CASE("gradients do not flow into constants") {
    auto c = ad::constant(rnd({4}, 32));
    auto l = ad::leaf(rnd({4}, 33));
    auto y = ad::sum_all(ad::mul(c, l));
    ad::backward(y);
    CHECK(l->has_grad);
    CHECK_FALSE(c->has_grad);
}

TEST_CASE("gradient accumulation across two backward passes") {
    auto l = ad::leaf(rnd({3}, 34));
    auto y1 = ad::sum_all(l);
    ad::backward(y1);
    Tensor g1 = l->grad;
    auto y2 = ad::sum_all(ad::scale(l, 2.0f));
    ad::backward(y2);
    for (int i = 0; i < 3; ++i) CHECK(l->grad.data[i] == doctest::Approx(g1.data[i] + 2.0f));
}
