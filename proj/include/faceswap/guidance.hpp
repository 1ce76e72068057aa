#ifndef FACESWAP_GUIDANCE_HPP
#define FACESWAP_GUIDANCE_HPP

#include "faceswap/denoiser.hpp"
#include "faceswap/experts.hpp"

namespace faceswap {

struct GuidanceConfig {
    float lambda_id = 2000.0f;
    float lambda_sem = 150.0f;
    float lambda_gaze = 200.0f;
    int num_augmentations = 8;
    uint64_t augmentation_seed = 7;

    void validate() const;
    nlohmann::json to_json() const;
    static GuidanceConfig from_json(const nlohmann::json& j);
};

// averaged per-view cost components for one reverse step
struct GuidanceDiagnostics {
    double g_id = 0, g_sem = 0, g_gaze = 0, g_total = 0, grad_norm = 0;
};

struct GuidanceResult {
    Tensor gradient;   // d(average g_facial)/d(x_t)
    Tensor eps_pred;   // denoiser output at x_t (reused by the sampler)
    GuidanceDiagnostics diag;
};

// --- single-view cost terms (evaluation API) ---
float g_id(const IdentityEmbedder& embedder, const Tensor& x0_hat, const Tensor& x_src);
float g_sem(const FaceParser& parser, const Tensor& x0_hat, const Tensor& x_targ);
float g_gaze(const GazeEstimator& gaze, const Tensor& x0_hat, const Tensor& x_targ,
             const EyeLandmarks& landmarks_targ);
float g_facial(const ExpertSet& experts, const Tensor& x0_hat, const Tensor& x_src,
               const Tensor& x_targ, const EyeLandmarks& landmarks_targ, const GuidanceConfig& cfg);

// Combined guidance gradient with respect to x_t, flowing through the
// denoiser into predict_x0 and the experts. Cost terms are evaluated on the
// identity view plus num_augmentations random square-crop views (60-100%
// of the image, resized back; the same crop is applied to the reference
// image of each term) and averaged. Crops are drawn deterministically from
// (augmentation_seed, t). t is an index into sched; the denoiser is
// conditioned on sched.timestep_map[t].
GuidanceResult guidance_gradient(const Tensor& x_t, int t, const Tensor& v_id, const Tensor& x_src,
                                 const Tensor& x_targ, const EyeLandmarks& landmarks_targ,
                                 const Denoiser& denoiser, const NoiseSchedule& sched,
                                 const ExpertSet& experts, const GuidanceConfig& cfg);

}  // namespace faceswap

#endif
