#include "faceswap/nn.hpp"

#include <cmath>

namespace faceswap::nn {

void ParamStore::load_state_dict(const std::map<std::string, Tensor>& sd) {
    for (size_t i = 0; i < params_.size(); ++i) {
        auto it = sd.find(names_[i]);
        if (it == sd.end()) throw ConfigError("missing parameter in state dict: " + names_[i]);
        if (it->second.shape != params_[i]->value.shape)
            throw ConfigError("parameter shape mismatch for " + names_[i]);
        params_[i]->value = it->second;
    }
}

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int k, std::mt19937_64& rng,
               bool zero_init)
    : pad(k / 2) {
    float std = zero_init ? 0.0f : std::sqrt(2.0f / (in_ch * k * k));
    w = ps.add(name + ".w", Tensor::randn({out_ch, in_ch, k, k}, rng, std));
    b = ps.add(name + ".b", Tensor::zeros({out_ch}));
}

Linear::Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, std::mt19937_64& rng,
               bool bias, bool zero_init) {
    float std = zero_init ? 0.0f : std::sqrt(1.0f / in_dim);
    w = ps.add(name + ".w", Tensor::randn({out_dim, in_dim}, rng, std));
    if (bias) b = ps.add(name + ".b", Tensor::zeros({out_dim}));
}

GroupNorm::GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups_) : groups(groups_) {
    gamma = ps.add(name + ".gamma", Tensor::full({channels}, 1.0f));
    beta = ps.add(name + ".beta", Tensor::zeros({channels}));
}

void AdamW::step(const std::vector<ad::Var>& params) {
    if (moments_m.empty()) {
        for (const auto& p : params) {
            moments_m.push_back(Tensor::zeros(p->value.shape));
            moments_v.push_back(Tensor::zeros(p->value.shape));
        }
    }
    ++step_count_;
    float bc1 = 1.0f - std::pow(beta1, static_cast<float>(step_count_));
    float bc2 = 1.0f - std::pow(beta2, static_cast<float>(step_count_));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p->has_grad) continue;
        auto& m = moments_m[i];
        auto& v = moments_v[i];
        for (int64_t j = 0; j < p->value.numel(); ++j) {
            float g = p->grad.data[j];
            m.data[j] = beta1 * m.data[j] + (1.0f - beta1) * g;
            v.data[j] = beta2 * v.data[j] + (1.0f - beta2) * g * g;
            float mh = m.data[j] / bc1, vh = v.data[j] / bc2;
            p->value.data[j] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * p->value.data[j]);
        }
    }
}

Tensor sinusoidal_embedding(int t, int dim, float max_period) {
    Tensor out({dim});
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        float freq = std::exp(-std::log(max_period) * i / half);
        out.data[i] = std::cos(t * freq);
        out.data[half + i] = std::sin(t * freq);
    }
    return out;
}

}  // namespace faceswap::nn
