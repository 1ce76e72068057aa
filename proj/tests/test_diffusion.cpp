#include <doctest.h>

#include "faceswap/diffusion.hpp"

using namespace faceswap;

TEST_CASE("linear schedule tables") {
    auto s = make_schedule(ScheduleKind::Linear, 1000);
    CHECK(s.num_steps == 1000);
    CHECK(s.betas[1] == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.betas[1000] == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(s.alpha_bars[0] == 1.0);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.betas[t] >= s.betas[t - 1]);
        CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);  // strictly decreasing
        CHECK(s.alpha_bars[t] > 0.0);
        CHECK(s.timestep_map[t] == t);
    }
}

TEST_CASE("cosine schedule tables") {
    auto s = make_schedule(ScheduleKind::Cosine, 200);
    CHECK(s.alpha_bars[0] == 1.0);
    for (int t = 1; t <= 200; ++t) {
        CHECK(s.betas[t] > 0.0);
        CHECK(s.betas[t] <= 0.999);
        CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
    }
}

TEST_CASE("schedule argument validation") {
    CHECK_THROWS_AS(make_schedule(ScheduleKind::Linear, 0), ParameterError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::Linear, 10, -1.0, 0.02), ParameterError);
    auto s = make_schedule(ScheduleKind::Linear, 10);
    CHECK_THROWS_AS(s.alpha_bar(11), ParameterError);
    CHECK_THROWS_AS(s.alpha_bar(-1), ParameterError);
}

TEST_CASE("q_sample at t=0 is the identity") {
    auto s = make_schedule(ScheduleKind::Linear, 50);
    std::mt19937_64 rng(1);
    Tensor x0 = Tensor::randn({3, 4, 4}, rng);
    Tensor eps = Tensor::randn({3, 4, 4}, rng);
    Tensor xt = q_sample(x0, 0, eps, s);
    for (size_t i = 0; i < x0.data.size(); ++i) CHECK(xt.data[i] == x0.data[i]);
}

TEST_CASE("q_sample / predict_x0 roundtrip at every t of a T=100 schedule") {
    auto s = make_schedule(ScheduleKind::Linear, 100);
    std::mt19937_64 rng(7);
    double max_err = 0;
    for (int c = 0; c < 100; ++c) {
        int t = 1 + (c % 100);
        Tensor x0 = Tensor::uniform({3, 4, 4}, rng, -1.0f, 1.0f);
        Tensor eps = Tensor::randn({3, 4, 4}, rng);
        Tensor back = predict_x0(q_sample(x0, t, eps, s), t, eps, s);
        for (size_t i = 0; i < x0.data.size(); ++i)
            max_err = std::max(max_err, std::fabs(double(back.data[i]) - x0.data[i]));
    }
    CHECK(max_err < 1e-5);
}

TEST_CASE("predict_x0 rejects t=0 and non-finite guards hold") {
    auto s = make_schedule(ScheduleKind::Linear, 10);
    Tensor x = Tensor::zeros({1, 2, 2});
    CHECK_THROWS_AS(predict_x0(x, 0, x, s), ParameterError);
    CHECK_THROWS_AS(predict_x0(x, 11, x, s), ParameterError);
}

TEST_CASE("respacing preserves alpha_bar at kept timesteps") {
    auto s = make_schedule(ScheduleKind::Linear, 1000);
    auto r = respace(s, 75);
    CHECK(r.num_steps == 75);
    CHECK(r.alpha_bars[0] == 1.0);
    for (int i = 1; i <= 75; ++i) {
        int orig = r.timestep_map[i];
        CHECK(orig >= 1);
        CHECK(orig <= 1000);
        CHECK(std::fabs(r.alpha_bars[i] - s.alpha_bars[orig]) < 1e-6);
        if (i > 1) CHECK(r.timestep_map[i] > r.timestep_map[i - 1]);
    }
    CHECK(r.timestep_map[75] == 1000);  // endpoint kept
    CHECK_THROWS_AS(respace(s, 0), ParameterError);
    CHECK_THROWS_AS(respace(s, 1001), ParameterError);
}

TEST_CASE("ddpm_step is deterministic at t=1 and equals the posterior mean") {
    auto s = make_schedule(ScheduleKind::Linear, 20);
    std::mt19937_64 rng(3);
    Tensor x = Tensor::randn({1, 2, 2}, rng);
    Tensor eps = Tensor::randn({1, 2, 2}, rng);
    Tensor z = Tensor::randn({1, 2, 2}, rng);
    Tensor mu = posterior_mean(x, 1, eps, s);
    Tensor step = ddpm_step(x, 1, eps, z, s);
    for (size_t i = 0; i < mu.data.size(); ++i) CHECK(step.data[i] == mu.data[i]);
}

TEST_CASE("ddpm_step Monte-Carlo moments match posterior mean and variance") {
    auto s = make_schedule(ScheduleKind::Linear, 50);
    int t = 25;
    std::mt19937_64 rng(5);
    Tensor x = Tensor::randn({1, 2, 2}, rng);
    Tensor eps = Tensor::randn({1, 2, 2}, rng);
    Tensor mu = posterior_mean(x, t, eps, s);
    double var_expected = s.posterior_variances[t];

    const int n = 20000;
    std::vector<double> sum(4, 0), sum2(4, 0);
    for (int i = 0; i < n; ++i) {
        Tensor z = Tensor::randn({1, 2, 2}, rng);
        Tensor out = ddpm_step(x, t, eps, z, s);
        for (int k = 0; k < 4; ++k) {
            sum[k] += out.data[k];
            sum2[k] += double(out.data[k]) * out.data[k];
        }
    }
    double sigma = std::sqrt(var_expected);
    for (int k = 0; k < 4; ++k) {
        double mean = sum[k] / n;
        double var = sum2[k] / n - mean * mean;
        CHECK(std::fabs(mean - mu.data[k]) < 3 * sigma / std::sqrt(double(n)));
        CHECK(std::fabs(var - var_expected) < 3 * var_expected * std::sqrt(2.0 / (n - 1)));
    }
}

TEST_CASE("posterior variance formula") {
    auto s = make_schedule(ScheduleKind::Linear, 30);
    for (int t = 1; t <= 30; ++t) {
        double expect = s.betas[t] * (1.0 - s.alpha_bars[t - 1]) / (1.0 - s.alpha_bars[t]);
        CHECK(s.posterior_variances[t] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(s.posterior_variances[1] == doctest::Approx(0.0));  // abar_0 = 1
}

TEST_CASE("differentiable predict_x0 matches the tensor version") {
    auto s = make_schedule(ScheduleKind::Linear, 40);
    std::mt19937_64 rng(9);
    Tensor x = Tensor::randn({3, 2, 2}, rng);
    Tensor eps = Tensor::randn({3, 2, 2}, rng);
    Tensor a = predict_x0(x, 17, eps, s);
    Tensor b = predict_x0(ad::constant(x), 17, ad::constant(eps), s)->value;
    // the two paths may differ by fma contraction, so allow last-bit slack
    for (size_t i = 0; i < a.data.size(); ++i)
        CHECK(std::fabs(a.data[i] - b.data[i]) <= 1e-6f * std::max(1.0f, std::fabs(a.data[i])));
}

TEST_CASE("schedule kind round trip") {
    CHECK(schedule_kind_from_string(to_string(ScheduleKind::Linear)) == ScheduleKind::Linear);
    CHECK(schedule_kind_from_string(to_string(ScheduleKind::Cosine)) == ScheduleKind::Cosine);
    CHECK_THROWS_AS(schedule_kind_from_string("bogus"), ConfigError);
}
