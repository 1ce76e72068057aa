#include <doctest.h>

#include "faceswap/sampler.hpp"

using namespace faceswap;

namespace {

struct SwapRig {
    std::shared_ptr<Denoiser> denoiser;
    ExpertSet experts;
    NoiseSchedule sched;
    RenderedFace src, targ;

    explicit SwapRig(int res = 16) {
        DenoiserConfig dc;
        dc.image_size = res;
        dc.base_channels = 8;
        dc.channel_multipliers = {1, 2};
        dc.num_res_blocks = 1;
        dc.conditioning_dim = 16;
        dc.id_vector_dim = 8;
        denoiser = std::make_shared<Denoiser>(dc, 5);
        denoiser->params().freeze();

        EmbedderConfig ec;
        ec.input_size = res;
        ec.base_channels = 4;
        ec.embed_dim = 8;
        ec.num_classes = 4;
        experts.embedder = std::make_shared<IdentityEmbedder>(ec);
        ParserConfig pc;
        pc.input_size = res;
        pc.base_channels = 4;
        experts.parser = std::make_shared<FaceParser>(pc);
        GazeConfig gc;
        gc.input_size = res;
        gc.crop_h = 4;
        gc.crop_w = 6;
        gc.base_channels = 4;
        experts.gaze = std::make_shared<GazeEstimator>(gc);
        experts.embedder->params().freeze();
        experts.parser->params().freeze();
        experts.gaze->params().freeze();

        sched = make_schedule(ScheduleKind::Linear, 50);
        std::mt19937_64 rng(2);
        src = render_face(sample_spec(rng), res);
        targ = render_face(sample_spec(rng), res);
    }

    SwapInputs inputs() const {
        SwapInputs in;
        in.x_src = src.image;
        in.x_targ = targ.image;
        in.targ_landmarks = {targ.left_eye_x, targ.left_eye_y, targ.right_eye_x, targ.right_eye_y};
        in.mask = targ.face_mask;
        return in;
    }

    SwapConfig fast_config() const {
        SwapConfig cfg;
        cfg.num_sample_steps = 8;
        cfg.mask_threshold = 5;
        cfg.guidance.num_augmentations = 1;
        cfg.guidance.lambda_id = 10;
        cfg.guidance.lambda_sem = 5;
        cfg.guidance.lambda_gaze = 5;
        cfg.mask_source = MaskSource::Oracle;
        cfg.seed = 77;
        return cfg;
    }
};

}  // namespace

TEST_CASE("soft_mask analytic values") {
    Tensor M = Tensor::full({1, 2, 2}, 1.0f);
    M.at(0, 0, 0) = 0.0f;

    Tensor at_T = soft_mask(M, 75, 75, 50);
    for (float v : at_T.data) CHECK(v == 0.0f);

    Tensor saturated = soft_mask(M, 25, 75, 50);  // t <= T - T_hat
    CHECK(saturated.data == M.data);

    Tensor half = soft_mask(M, 50, 75, 50);  // (75-50)/50 = 0.5
    CHECK(half.at(0, 0, 0) == 0.0f);
    CHECK(half.at(0, 0, 1) == 0.5f);
    CHECK(half.at(0, 1, 0) == 0.5f);
    CHECK(half.at(0, 1, 1) == 0.5f);

    CHECK_THROWS_AS(soft_mask(M, 10, 75, 0), ParameterError);
    CHECK_THROWS_AS(soft_mask(M, 0, 75, 50), ParameterError);
    CHECK_THROWS_AS(soft_mask(M, 76, 75, 50), ParameterError);
}

TEST_CASE("soft_mask intensity is non-decreasing as t decreases") {
    Tensor M = Tensor::full({1, 1, 1}, 1.0f);
    float prev = -1.0f;
    for (int t = 75; t >= 1; --t) {
        float v = soft_mask(M, t, 75, 50).data[0];
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(prev == 1.0f);
}

TEST_CASE("noisy_target endpoints and moments") {
    auto s = make_schedule(ScheduleKind::Linear, 40);
    std::mt19937_64 rng(3);
    Tensor x = Tensor::uniform({1, 2, 2}, rng, -1.0f, 1.0f);

    Tensor exact = noisy_target(x, 0, s, rng);
    CHECK(exact.data == x.data);  // abar_0 = 1, bit exact

    int t = 20;
    double abar = s.alpha_bars[t];
    const int n = 10000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        Tensor y = noisy_target(x, t, s, rng);
        sum += y.data[0];
        sum2 += double(y.data[0]) * y.data[0];
    }
    double mean = sum / n, var = sum2 / n - mean * mean;
    double expect_mean = std::sqrt(abar) * x.data[0], expect_var = 1.0 - abar;
    CHECK(std::fabs(mean - expect_mean) < 3 * std::sqrt(expect_var / n));
    CHECK(std::fabs(var - expect_var) < 3 * expect_var * std::sqrt(2.0 / (n - 1)));
    CHECK_THROWS_AS(noisy_target(x, 41, s, rng), ParameterError);
    CHECK_THROWS_AS(noisy_target(x, -1, s, rng), ParameterError);
}

TEST_CASE("blend endpoints and averaging") {
    std::mt19937_64 rng(4);
    Tensor a = Tensor::randn({3, 4, 4}, rng), b = Tensor::randn({3, 4, 4}, rng);
    Tensor zeros = Tensor::zeros({1, 4, 4});
    Tensor ones = Tensor::full({1, 4, 4}, 1.0f);
    Tensor half = Tensor::full({1, 4, 4}, 0.5f);

    CHECK(blend(a, b, zeros).data == b.data);
    CHECK(blend(a, b, ones).data == a.data);
    Tensor avg = blend(a, b, half);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                CHECK(avg.at(c, y, x) == doctest::Approx(0.5f * (a.at(c, y, x) + b.at(c, y, x))));
    CHECK_THROWS_AS(blend(a, b, Tensor::zeros({1, 2, 2})), ShapeError);
}

TEST_CASE("swap config validation") {
    SwapConfig cfg;
    cfg.mask_threshold = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = SwapConfig{};
    cfg.mask_threshold = cfg.num_sample_steps + 1;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    CHECK_NOTHROW(SwapConfig{}.validate());
    CHECK(mask_source_from_string("parser") == MaskSource::Parser);
    CHECK_THROWS_AS(mask_source_from_string("nope"), ConfigError);
}

TEST_CASE("swap is deterministic under a fixed seed") {
    SwapRig rig;
    auto a = swap(rig.inputs(), *rig.denoiser, rig.sched, rig.experts, rig.fast_config());
    auto b = swap(rig.inputs(), *rig.denoiser, rig.sched, rig.experts, rig.fast_config());
    CHECK(a.x_swap.data == b.x_swap.data);
    auto cfg2 = rig.fast_config();
    cfg2.seed += 1;
    auto c = swap(rig.inputs(), *rig.denoiser, rig.sched, rig.experts, cfg2);
    CHECK(a.x_swap.data != c.x_swap.data);
}

TEST_CASE("background pixels equal the target bit-exactly when T_hat <= T-1") {
    SwapRig rig;
    auto cfg = rig.fast_config();  // T=8, T_hat=5
    auto res = swap(rig.inputs(), *rig.denoiser, rig.sched, rig.experts, cfg);
    int bg = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (rig.targ.face_mask.at(0, y, x) == 0.0f) {
                ++bg;
                for (int c = 0; c < 3; ++c) CHECK(res.x_swap.at(c, y, x) == rig.targ.image.at(c, y, x));
            }
    CHECK(bg > 0);
}

TEST_CASE("per-step mask intensity diagnostics are monotone") {
    SwapRig rig;
    auto res = swap(rig.inputs(), *rig.denoiser, rig.sched, rig.experts, rig.fast_config());
    REQUIRE(res.steps.size() == 8);
    for (size_t i = 1; i < res.steps.size(); ++i) {
        CHECK(res.steps[i].t == res.steps[i - 1].t - 1);
        CHECK(res.steps[i].mask_max >= res.steps[i - 1].mask_max);
    }
    CHECK(res.steps.back().mask_max == 1.0f);
}

TEST_CASE("neutralized guidance and blending reduce to unguided sampling") {
    // All lambdas 0, all-one mask, T_hat = 1: after the first blend (which
    // replaces x_T's step output by the noisy target at T-1), the trajectory
    // is plain unguided ID-conditional sampling. Check bit-exact agreement
    // against a reference rollout with the identical RNG stream.
    SwapRig rig;
    SwapConfig cfg;
    cfg.num_sample_steps = 8;
    cfg.mask_threshold = 1;
    cfg.guidance.lambda_id = cfg.guidance.lambda_sem = cfg.guidance.lambda_gaze = 0;
    cfg.mask_source = MaskSource::User;
    cfg.seed = 99;
    auto in = rig.inputs();
    in.mask = Tensor::full({1, 16, 16}, 1.0f);
    auto res = swap(in, *rig.denoiser, rig.sched, rig.experts, cfg);

    NoiseSchedule sr = respace(rig.sched, cfg.num_sample_steps);
    Tensor v_id = rig.experts.embedder->embed_identity(in.x_src);
    std::mt19937_64 rng(cfg.seed);
    Tensor x = Tensor::randn({3, 16, 16}, rng);
    for (int t = cfg.num_sample_steps; t >= 1; --t) {
        Tensor eps = rig.denoiser->denoise(x, sr.timestep_map[t], v_id);
        Tensor z = Tensor::randn(x.shape, rng);
        Tensor x_prev = ddpm_step(x, t, eps, z, sr);
        Tensor x_targ_noisy = noisy_target(in.x_targ, t - 1, sr, rng);
        x = t == cfg.num_sample_steps ? x_targ_noisy : x_prev;  // M_T = 0, else M_t = 1
    }
    for (auto& v : x.data) v = std::clamp(v, -1.0f, 1.0f);
    CHECK(res.x_swap.data == x.data);
}

TEST_CASE("swap input validation") {
    SwapRig rig;
    auto cfg = rig.fast_config();
    auto in = rig.inputs();
    in.mask.reset();
    CHECK_THROWS_AS(swap(in, *rig.denoiser, rig.sched, rig.experts, cfg), ParameterError);
    in = rig.inputs();
    (*in.mask).data[0] = 1.5f;
    CHECK_THROWS_AS(swap(in, *rig.denoiser, rig.sched, rig.experts, cfg), ParameterError);
    ExpertSet broken = rig.experts;
    broken.gaze.reset();
    CHECK_THROWS_AS(swap(rig.inputs(), *rig.denoiser, rig.sched, broken, cfg), ParameterError);
}
