#ifndef FACESWAP_SAMPLER_HPP
#define FACESWAP_SAMPLER_HPP

#include <functional>
#include <optional>

#include "faceswap/guidance.hpp"

namespace faceswap {

enum class MaskSource { Parser, Oracle, User };
std::string to_string(MaskSource m);
MaskSource mask_source_from_string(const std::string& s);

struct SwapConfig {
    int num_sample_steps = 75;   // T
    int mask_threshold = 50;     // T-hat; saturation point of the soft mask
    GuidanceConfig guidance;
    uint64_t seed = 0;
    MaskSource mask_source = MaskSource::Parser;
    void validate() const;
    nlohmann::json to_json() const;
    static SwapConfig from_json(const nlohmann::json& j);
};

struct SwapInputs {
    Tensor x_src;                 // {3,H,W} in [-1,1]
    Tensor x_targ;                // {3,H,W} in [-1,1]
    EyeLandmarks targ_landmarks;  // target eye centers, pixel coordinates
    std::optional<Tensor> mask;   // {1,H,W}; required for Oracle/User mask sources
};

struct SwapStepDiag {
    int t = 0;
    GuidanceDiagnostics guidance;
    float mask_max = 0;
};

struct SwapResult {
    Tensor x_swap;                    // clamped to [-1,1]
    std::vector<SwapStepDiag> steps;  // in sampling order (t = T .. 1)
};

// M_t = min(1, ((T - t)/T_hat) * M), element-wise.
Tensor soft_mask(const Tensor& M, int t, int T, int T_hat);

// sqrt(abar_t) * x_targ + sqrt(1 - abar_t) * z; t_index may be 0 (abar_0 = 1,
// returning x_targ exactly).
Tensor noisy_target(const Tensor& x_targ, int t_index, const NoiseSchedule& sched, std::mt19937_64& rng);

// x_prev * M_t + x_targ_noisy * (1 - M_t); M_t is {1,H,W}, broadcast over channels.
Tensor blend(const Tensor& x_prev, const Tensor& x_targ_noisy, const Tensor& M_t);

// Guided reverse diffusion with target-preserving blending. train_sched is
// the schedule the denoiser was trained with; it is respaced internally to
// cfg.num_sample_steps. on_step, when set, receives each intermediate state
// (called with t-1 and x_{t-1}).
SwapResult swap(const SwapInputs& in, const Denoiser& denoiser, const NoiseSchedule& train_sched,
                const ExpertSet& experts, const SwapConfig& cfg,
                const std::function<void(int, const Tensor&)>& on_step = nullptr);

}  // namespace faceswap

#endif
