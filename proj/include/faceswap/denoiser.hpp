#ifndef FACESWAP_DENOISER_HPP
#define FACESWAP_DENOISER_HPP

#include <memory>

#include "faceswap/checkpoint.hpp"
#include "faceswap/diffusion.hpp"
#include "faceswap/nn.hpp"

namespace faceswap {

struct DenoiserConfig {
    int image_size = 32;
    int in_channels = 3;
    int base_channels = 64;
    std::vector<int> channel_multipliers = {1, 2, 2};
    int num_res_blocks = 2;
    int conditioning_dim = 128;
    int id_vector_dim = 64;
    bool attention_at_bottom = true;

    void validate() const;
    nlohmann::json to_json() const;
    static DenoiserConfig from_json(const nlohmann::json& j);
    bool operator==(const DenoiserConfig&) const = default;
};

// Identity-conditional noise prediction network: encoder-decoder with skip
// connections; every residual block receives the summed timestep + identity
// conditioning as a per-channel bias.
class Denoiser {
public:
    Denoiser(DenoiserConfig cfg, uint64_t init_seed);

    // sinusoidal timestep embedding through an MLP, plus a bias-free linear
    // projection of the identity vector
    ad::Var embed_condition(int t, const ad::Var& v_id) const;

    ad::Var forward(const ad::Var& x_t, int t, const ad::Var& v_id) const;
    Tensor denoise(const Tensor& x_t, int t, const Tensor& v_id) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const DenoiserConfig& config() const { return cfg_; }

private:
    struct ResBlock {
        nn::GroupNorm gn1, gn2;
        nn::Conv2d conv1, conv2, skip;  // skip.w empty when channels match
        nn::Linear cond_proj;
        bool has_skip = false;
        ad::Var operator()(const ad::Var& x, const ad::Var& cond_act) const;
    };
    struct AttnBlock {
        nn::GroupNorm gn;
        nn::Conv2d q, k, v, proj;
        ad::Var operator()(const ad::Var& x) const;
    };

    DenoiserConfig cfg_;
    nn::ParamStore params_;
    nn::Conv2d conv_in_, conv_out_;
    nn::GroupNorm gn_out_;
    nn::Linear time_in_, time_out_, id_proj_;
    std::vector<std::vector<ResBlock>> down_;   // per level
    std::vector<std::vector<ResBlock>> up_;     // per level (reverse order applied)
    ResBlock mid1_, mid2_;
    AttnBlock mid_attn_;
};

// Persistence (kind tag "denoiser"). The schedule descriptor, training step
// counter, seed record and optional optimizer state live in the container.
Checkpoint make_denoiser_checkpoint(const Denoiser& d, const nlohmann::json& schedule_desc, int64_t step,
                                    uint64_t seed, const nn::AdamW* optimizer = nullptr);
std::unique_ptr<Denoiser> denoiser_from_checkpoint(const Checkpoint& c, nn::AdamW* optimizer = nullptr);

}  // namespace faceswap

#endif
