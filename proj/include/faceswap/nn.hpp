#ifndef FACESWAP_NN_HPP
#define FACESWAP_NN_HPP

#include <map>
#include <string>
#include <vector>

#include "faceswap/ad.hpp"

namespace faceswap::nn {

// Named parameter registry. Parameters are persistent ad::Var leaves; the
// same Vars are reused across graph evaluations, so gradients accumulate in
// place and must be cleared between optimizer steps.
class ParamStore {
public:
    ad::Var add(const std::string& name, Tensor init) {
        auto v = ad::leaf(std::move(init));
        names_.push_back(name);
        params_.push_back(v);
        return v;
    }
    const std::vector<ad::Var>& params() const { return params_; }
    const std::vector<std::string>& names() const { return names_; }

    void zero_grad() {
        for (auto& p : params_) p->has_grad = false;
    }
    void freeze() {
        for (auto& p : params_) p->requires_grad = false;
    }
    bool frozen() const { return !params_.empty() && !params_[0]->requires_grad; }

    std::map<std::string, Tensor> state_dict() const {
        std::map<std::string, Tensor> out;
        for (size_t i = 0; i < params_.size(); ++i) out[names_[i]] = params_[i]->value;
        return out;
    }
    void load_state_dict(const std::map<std::string, Tensor>& sd);

    int64_t total_parameters() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p->value.numel();
        return n;
    }

private:
    std::vector<std::string> names_;
    std::vector<ad::Var> params_;
};

// --- layers ---

struct Conv2d {
    ad::Var w, b;
    int pad = 1;
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int k, std::mt19937_64& rng,
           bool zero_init = false);
    ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b, pad); }
};

struct Linear {
    ad::Var w, b;  // b may be null
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, std::mt19937_64& rng,
           bool bias = true, bool zero_init = false);
    ad::Var operator()(const ad::Var& x) const { return ad::linear(x, w, b); }
};

struct GroupNorm {
    ad::Var gamma, beta;
    int groups = 1;
    GroupNorm() = default;
    GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups_);
    ad::Var operator()(const ad::Var& x) const { return ad::group_norm(x, gamma, beta, groups); }
};

// Decoupled weight decay Adam.
class AdamW {
public:
    float lr = 1e-4f, beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f, weight_decay = 0.0f;

    void step(const std::vector<ad::Var>& params);

    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t n) { step_count_ = n; }
    // serialized as flat arrays, in parameter order
    std::vector<Tensor> moments_m, moments_v;

private:
    int64_t step_count_ = 0;
};

// Standard transformer-style sinusoidal embedding of an integer timestep.
Tensor sinusoidal_embedding(int t, int dim, float max_period = 10000.0f);

}  // namespace faceswap::nn

#endif
