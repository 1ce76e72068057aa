#include "faceswap/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace faceswap {

std::string to_string(MaskSource m) {
    switch (m) {
        case MaskSource::Parser: return "parser";
        case MaskSource::Oracle: return "oracle";
        case MaskSource::User: return "user";
    }
    throw ParameterError("unknown mask source");
}

MaskSource mask_source_from_string(const std::string& s) {
    if (s == "parser") return MaskSource::Parser;
    if (s == "oracle") return MaskSource::Oracle;
    if (s == "user") return MaskSource::User;
    throw ConfigError("unknown mask source '" + s + "' (expected parser|oracle|user)");
}

void SwapConfig::validate() const {
    if (num_sample_steps < 1) throw ParameterError("num_sample_steps must be >= 1");
    if (mask_threshold < 1 || mask_threshold > num_sample_steps)
        throw ParameterError("mask_threshold must lie in [1, num_sample_steps]");
    guidance.validate();
}

nlohmann::json SwapConfig::to_json() const {
    return {{"num_sample_steps", num_sample_steps}, {"mask_threshold", mask_threshold},
            {"guidance", guidance.to_json()},       {"seed", seed},
            {"mask_source", to_string(mask_source)}};
}
SwapConfig SwapConfig::from_json(const nlohmann::json& j) {
    SwapConfig c;
    c.num_sample_steps = j.at("num_sample_steps");
    c.mask_threshold = j.at("mask_threshold");
    c.guidance = GuidanceConfig::from_json(j.at("guidance"));
    c.seed = j.at("seed");
    c.mask_source = mask_source_from_string(j.at("mask_source"));
    return c;
}

Tensor soft_mask(const Tensor& M, int t, int T, int T_hat) {
    if (T_hat <= 0) throw ParameterError("soft_mask: T_hat must be positive");
    if (t < 1 || t > T) throw ParameterError("soft_mask: t out of range [1, T]");
    float ramp = static_cast<float>(T - t) / static_cast<float>(T_hat);
    Tensor out(M.shape);
    for (size_t i = 0; i < M.data.size(); ++i) out.data[i] = std::min(1.0f, ramp * M.data[i]);
    return out;
}

Tensor noisy_target(const Tensor& x_targ, int t_index, const NoiseSchedule& sched, std::mt19937_64& rng) {
    if (t_index < 0 || t_index > sched.num_steps)
        throw ParameterError("noisy_target: t_index out of range [0, T]");
    double abar = sched.alpha_bars[static_cast<size_t>(t_index)];
    float cs = static_cast<float>(std::sqrt(abar));
    float cn = static_cast<float>(std::sqrt(1.0 - abar));
    Tensor z = Tensor::randn(x_targ.shape, rng);
    Tensor out(x_targ.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = cs * x_targ.data[i] + cn * z.data[i];
    return out;
}

Tensor blend(const Tensor& x_prev, const Tensor& x_targ_noisy, const Tensor& M_t) {
    require_same_shape(x_prev, x_targ_noisy, "blend");
    if (x_prev.shape.size() != 3 || M_t.shape.size() != 3 || M_t.shape[0] != 1 ||
        M_t.shape[1] != x_prev.shape[1] || M_t.shape[2] != x_prev.shape[2])
        throw ShapeError("blend: mask must be {1,H,W} matching the images");
    int C = x_prev.shape[0], H = x_prev.shape[1], W = x_prev.shape[2];
    Tensor out(x_prev.shape);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float m = M_t.at(0, y, x);
                out.at(c, y, x) = x_prev.at(c, y, x) * m + x_targ_noisy.at(c, y, x) * (1.0f - m);
            }
    return out;
}

SwapResult swap(const SwapInputs& in, const Denoiser& denoiser, const NoiseSchedule& train_sched,
                const ExpertSet& experts, const SwapConfig& cfg,
                const std::function<void(int, const Tensor&)>& on_step) {
    cfg.validate();
    require_same_shape(in.x_src, in.x_targ, "swap");
    if (!experts.embedder || !experts.parser || !experts.gaze)
        throw ParameterError("swap: incomplete expert set");

    NoiseSchedule sched = respace(train_sched, cfg.num_sample_steps);
    const int T = cfg.num_sample_steps;

    Tensor M;
    if (cfg.mask_source == MaskSource::Parser) {
        M = extract_hard_mask(experts.parser->parse_face(in.x_targ));
    } else {
        if (!in.mask) throw ParameterError("swap: mask source requires a supplied mask");
        M = *in.mask;
    }
    for (float v : M.data)
        if (v < 0.0f || v > 1.0f) throw ParameterError("swap: mask values must lie in [0,1]");

    Tensor v_id = experts.embedder->embed_identity(in.x_src);

    std::mt19937_64 rng(cfg.seed);
    Tensor x = Tensor::randn(in.x_targ.shape, rng);

    SwapResult res;
    res.steps.reserve(static_cast<size_t>(T));
    for (int t = T; t >= 1; --t) {
        GuidanceResult g = guidance_gradient(x, t, v_id, in.x_src, in.x_targ, in.targ_landmarks,
                                             denoiser, sched, experts, cfg.guidance);
        Tensor mu = posterior_mean(x, t, g.eps_pred, sched);
        float sigma = static_cast<float>(std::sqrt(sched.posterior_variances[static_cast<size_t>(t)]));
        Tensor z_step = Tensor::randn(x.shape, rng);
        Tensor x_prev(x.shape);
        for (size_t i = 0; i < x_prev.data.size(); ++i) {
            float noise = t > 1 ? sigma * z_step.data[i] : 0.0f;
            x_prev.data[i] = mu.data[i] - sigma * g.gradient.data[i] + noise;
        }

        Tensor x_targ_noisy = noisy_target(in.x_targ, t - 1, sched, rng);
        Tensor M_t = soft_mask(M, t, T, cfg.mask_threshold);
        x = blend(x_prev, x_targ_noisy, M_t);

        if (!all_finite(x))
            throw NumericError("swap: non-finite state after step t=" + std::to_string(t));

        SwapStepDiag d;
        d.t = t;
        d.guidance = g.diag;
        d.mask_max = *std::max_element(M_t.data.begin(), M_t.data.end());
        res.steps.push_back(d);
        if (on_step) on_step(t - 1, x);
    }

    res.x_swap = x;
    for (auto& v : res.x_swap.data) v = std::clamp(v, -1.0f, 1.0f);
    return res;
}

}  // namespace faceswap
