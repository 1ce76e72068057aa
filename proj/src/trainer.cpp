#include "faceswap/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace faceswap {

std::string to_string(IdentityLossForm f) {
    return f == IdentityLossForm::Cosine ? "cosine" : "squared-l2";
}

IdentityLossForm identity_loss_form_from_string(const std::string& s) {
    if (s == "cosine") return IdentityLossForm::Cosine;
    if (s == "squared-l2" || s == "squared_l2") return IdentityLossForm::SquaredL2;
    throw ConfigError("unknown identity loss form '" + s + "' (expected cosine|squared-l2)");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lambda_id < 0) throw ConfigError("lambda_id must be >= 0");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"batch_size", batch_size},     {"learning_rate", learning_rate},
            {"lambda_id", lambda_id},       {"total_steps", total_steps},
            {"seed", seed},                 {"checkpoint_every", checkpoint_every},
            {"id_loss_form", to_string(id_loss_form)}};
}
TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.at("batch_size");
    c.learning_rate = j.at("learning_rate");
    c.lambda_id = j.at("lambda_id");
    c.total_steps = j.at("total_steps");
    c.seed = j.at("seed");
    c.checkpoint_every = j.at("checkpoint_every");
    c.id_loss_form = identity_loss_form_from_string(j.at("id_loss_form"));
    return c;
}

StepLosses training_step(const std::vector<const Tensor*>& batch, std::mt19937_64& rng,
                         Denoiser& denoiser, const IdentityEmbedder& embedder,
                         const NoiseSchedule& sched, nn::AdamW& opt, const TrainConfig& cfg) {
    cfg.validate();
    if (batch.empty()) throw ParameterError("training_step: empty batch");
    if (!embedder.params().frozen()) throw ParameterError("training_step: embedder must be frozen");

    denoiser.params().zero_grad();
    float inv_b = 1.0f / static_cast<float>(batch.size());
    StepLosses losses;
    std::uniform_int_distribution<int> td(1, sched.num_steps);
    for (const Tensor* x0 : batch) {
        int t = td(rng);
        Tensor eps = Tensor::randn(x0->shape, rng);
        Tensor v_id = embedder.embed_identity(*x0);
        Tensor x_t = q_sample(*x0, t, eps, sched);

        auto eps_hat = denoiser.forward(ad::constant(x_t), sched.timestep_map[static_cast<size_t>(t)],
                                        ad::constant(v_id));
        auto loss_noise = ad::mse(eps_hat, ad::constant(eps));

        ad::Var loss_id;
        if (cfg.lambda_id > 0) {
            auto x0_hat = predict_x0(ad::constant(x_t), t, eps_hat, sched);
            auto v_hat = embedder.embed(x0_hat);
            if (cfg.id_loss_form == IdentityLossForm::Cosine) {
                loss_id = ad::sub(ad::constant(Tensor::scalar(1.0f)), ad::cosine(v_hat, ad::constant(v_id)));
            } else {
                auto d = ad::sub(v_hat, ad::constant(v_id));
                loss_id = ad::sum_all(ad::mul(d, d));
            }
        } else {
            loss_id = ad::constant(Tensor::scalar(0.0f));
        }

        auto total = ad::add(loss_noise, ad::scale(loss_id, cfg.lambda_id));
        double ln = loss_noise->value.data[0], li = loss_id->value.data[0];
        if (!std::isfinite(total->value.data[0])) {
            std::ostringstream os;
            os << "non-finite training loss at t=" << t << " (abar=" << sched.alpha_bar(t)
               << ", loss_noise=" << ln << ", loss_id=" << li << ")";
            throw TrainingFailure(os.str());
        }
        ad::backward(ad::scale(total, inv_b));
        losses.loss_noise += ln * inv_b;
        losses.loss_id += li * inv_b;
    }
    losses.loss_total = losses.loss_noise + double(cfg.lambda_id) * losses.loss_id;

    opt.lr = cfg.learning_rate;
    opt.step(denoiser.params().params());
    return losses;
}

void train(const std::vector<RenderedFace>& dataset, Denoiser& denoiser,
           const IdentityEmbedder& embedder, const NoiseSchedule& sched, nn::AdamW& opt,
           const TrainConfig& cfg, const std::string& metrics_csv, int64_t start_step,
           const TrainCallbacks& callbacks) {
    cfg.validate();
    if (dataset.empty()) throw ParameterError("train: dataset is empty");

    std::ofstream csv(metrics_csv, start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!csv) throw IoError("train: cannot open metrics file " + metrics_csv);
    if (start_step == 0) csv << "step,loss_noise,loss_id,loss_total,wall_time_s\n";

    auto t0 = std::chrono::steady_clock::now();
    for (int64_t step = start_step + 1; step <= cfg.total_steps; ++step) {
        // per-step seeding keeps resumed runs on the identical sample stream
        std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * static_cast<uint64_t>(step)));
        std::vector<const Tensor*> batch;
        std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
        for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(&dataset[pick(rng)].image);

        StepLosses l = training_step(batch, rng, denoiser, embedder, sched, opt, cfg);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        csv << step << ',' << l.loss_noise << ',' << l.loss_id << ',' << l.loss_total << ',' << wall
            << '\n';
        csv.flush();
        if (callbacks.on_step) callbacks.on_step(step, l);
        if (callbacks.on_checkpoint && (step % cfg.checkpoint_every == 0 || step == cfg.total_steps))
            callbacks.on_checkpoint(step, denoiser, opt);
    }
}

}  // namespace faceswap
