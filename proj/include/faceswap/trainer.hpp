#ifndef FACESWAP_TRAINER_HPP
#define FACESWAP_TRAINER_HPP

#include <string>

#include "faceswap/denoiser.hpp"
#include "faceswap/experts.hpp"

namespace faceswap {

enum class IdentityLossForm { Cosine, SquaredL2 };
std::string to_string(IdentityLossForm f);
IdentityLossForm identity_loss_form_from_string(const std::string& s);

struct TrainConfig {
    int batch_size = 8;
    float learning_rate = 1e-4f;
    float lambda_id = 0.5f;
    int total_steps = 1000;
    uint64_t seed = 0;
    int checkpoint_every = 500;
    IdentityLossForm id_loss_form = IdentityLossForm::Cosine;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct StepLosses {
    double loss_noise = 0, loss_id = 0, loss_total = 0;
};

// One optimizer update on a batch: per example, t ~ U{1..T}, eps ~ N(0,I),
// x_t = q_sample, eps_hat = denoise(x_t, t, D_I(x0)), x0_hat = predict_x0,
// loss = mse(eps, eps_hat) + lambda * id_loss(D_I(x0), D_I(x0_hat)).
// The embedder must be frozen; only denoiser weights are updated.
StepLosses training_step(const std::vector<const Tensor*>& batch, std::mt19937_64& rng,
                         Denoiser& denoiser, const IdentityEmbedder& embedder,
                         const NoiseSchedule& sched, nn::AdamW& opt, const TrainConfig& cfg);

struct TrainCallbacks {
    // invoked after each step with the losses already logged
    std::function<void(int64_t step, const StepLosses&)> on_step;
    // invoked at checkpoint cadence (and once at the end)
    std::function<void(int64_t step, const Denoiser&, const nn::AdamW&)> on_checkpoint;
};

// Runs training_step for cfg.total_steps over the dataset with a
// deterministic batch order, appending a CSV row per step to metrics_csv
// (columns: step, loss_noise, loss_id, loss_total, wall_time_s). start_step
// > 0 resumes counting (optimizer/weights must come from the checkpoint).
void train(const std::vector<RenderedFace>& dataset, Denoiser& denoiser,
           const IdentityEmbedder& embedder, const NoiseSchedule& sched, nn::AdamW& opt,
           const TrainConfig& cfg, const std::string& metrics_csv, int64_t start_step = 0,
           const TrainCallbacks& callbacks = {});

}  // namespace faceswap

#endif
