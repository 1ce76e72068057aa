#include "faceswap/denoiser.hpp"

namespace faceswap {

namespace {
int norm_groups(int channels) {
    if (channels % 8 == 0) return 8;
    if (channels % 4 == 0) return 4;
    return 1;
}
}  // namespace

void DenoiserConfig::validate() const {
    if (channel_multipliers.empty()) throw ConfigError("denoiser: need at least one resolution level");
    int levels = static_cast<int>(channel_multipliers.size());
    if (image_size % (1 << (levels - 1)) != 0)
        throw ConfigError("denoiser: image_size must be divisible by 2^(levels-1)");
    if (conditioning_dim <= 0 || base_channels <= 0 || num_res_blocks <= 0 || id_vector_dim <= 0)
        throw ConfigError("denoiser: dimensions must be positive");
}

nlohmann::json DenoiserConfig::to_json() const {
    return {{"image_size", image_size},
            {"in_channels", in_channels},
            {"base_channels", base_channels},
            {"channel_multipliers", channel_multipliers},
            {"num_res_blocks", num_res_blocks},
            {"conditioning_dim", conditioning_dim},
            {"id_vector_dim", id_vector_dim},
            {"attention_at_bottom", attention_at_bottom}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.image_size = j.at("image_size");
    c.in_channels = j.at("in_channels");
    c.base_channels = j.at("base_channels");
    c.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
    c.num_res_blocks = j.at("num_res_blocks");
    c.conditioning_dim = j.at("conditioning_dim");
    c.id_vector_dim = j.at("id_vector_dim");
    c.attention_at_bottom = j.at("attention_at_bottom");
    return c;
}

ad::Var Denoiser::ResBlock::operator()(const ad::Var& x, const ad::Var& cond_act) const {
    auto h = conv1(ad::silu(gn1(x)));
    h = ad::broadcast_add_ch(h, cond_proj(cond_act));
    h = conv2(ad::silu(gn2(h)));
    return ad::add(h, has_skip ? skip(x) : x);
}

ad::Var Denoiser::AttnBlock::operator()(const ad::Var& x) const {
    auto h = gn(x);
    auto out = ad::attention(q(h), k(h), v(h));
    return ad::add(x, proj(out));
}

Denoiser::Denoiser(DenoiserConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    auto& ps = params_;
    int base = cfg_.base_channels, cd = cfg_.conditioning_dim;
    int levels = static_cast<int>(cfg_.channel_multipliers.size());

    time_in_ = nn::Linear(ps, "time_in", base, cd, rng);
    time_out_ = nn::Linear(ps, "time_out", cd, cd, rng);
    id_proj_ = nn::Linear(ps, "id_proj", cfg_.id_vector_dim, cd, rng, /*bias=*/false);
    conv_in_ = nn::Conv2d(ps, "conv_in", cfg_.in_channels, base, 3, rng);

    auto make_res = [&](const std::string& name, int cin, int cout) {
        ResBlock rb;
        rb.gn1 = nn::GroupNorm(ps, name + ".gn1", cin, norm_groups(cin));
        rb.conv1 = nn::Conv2d(ps, name + ".conv1", cin, cout, 3, rng);
        rb.cond_proj = nn::Linear(ps, name + ".cond", cd, cout, rng);
        rb.gn2 = nn::GroupNorm(ps, name + ".gn2", cout, norm_groups(cout));
        rb.conv2 = nn::Conv2d(ps, name + ".conv2", cout, cout, 3, rng);
        if (cin != cout) {
            rb.skip = nn::Conv2d(ps, name + ".skip", cin, cout, 1, rng);
            rb.has_skip = true;
        }
        return rb;
    };

    std::vector<int> skip_channels{base};
    int ch = base;
    down_.resize(levels);
    for (int l = 0; l < levels; ++l) {
        int out_ch = base * cfg_.channel_multipliers[l];
        for (int b = 0; b < cfg_.num_res_blocks; ++b) {
            down_[l].push_back(make_res("down" + std::to_string(l) + "_" + std::to_string(b), ch, out_ch));
            ch = out_ch;
            skip_channels.push_back(ch);
        }
        if (l < levels - 1) skip_channels.push_back(ch);  // post-downsample state
    }

    mid1_ = make_res("mid1", ch, ch);
    if (cfg_.attention_at_bottom) {
        mid_attn_.gn = nn::GroupNorm(ps, "mid_attn.gn", ch, norm_groups(ch));
        mid_attn_.q = nn::Conv2d(ps, "mid_attn.q", ch, ch, 1, rng);
        mid_attn_.k = nn::Conv2d(ps, "mid_attn.k", ch, ch, 1, rng);
        mid_attn_.v = nn::Conv2d(ps, "mid_attn.v", ch, ch, 1, rng);
        mid_attn_.proj = nn::Conv2d(ps, "mid_attn.proj", ch, ch, 1, rng, /*zero_init=*/true);
    }
    mid2_ = make_res("mid2", ch, ch);

    up_.resize(levels);
    for (int l = levels - 1; l >= 0; --l) {
        int out_ch = base * cfg_.channel_multipliers[l];
        int blocks = cfg_.num_res_blocks + 1;
        for (int b = 0; b < blocks; ++b) {
            int skip_ch = skip_channels.back();
            skip_channels.pop_back();
            up_[l].push_back(make_res("up" + std::to_string(l) + "_" + std::to_string(b), ch + skip_ch, out_ch));
            ch = out_ch;
        }
    }

    gn_out_ = nn::GroupNorm(ps, "gn_out", ch, norm_groups(ch));
    conv_out_ = nn::Conv2d(ps, "conv_out", ch, cfg_.in_channels, 3, rng, /*zero_init=*/true);
}

ad::Var Denoiser::embed_condition(int t, const ad::Var& v_id) const {
    if (v_id->value.shape != std::vector<int>{cfg_.id_vector_dim})
        throw ConfigError("embed_condition: identity vector dimension mismatch");
    auto t_emb = ad::constant(nn::sinusoidal_embedding(t, cfg_.base_channels));
    auto h = time_out_(ad::silu(time_in_(t_emb)));
    return ad::add(h, id_proj_(v_id));
}

ad::Var Denoiser::forward(const ad::Var& x_t, int t, const ad::Var& v_id) const {
    const auto& s = x_t->value.shape;
    if (s != std::vector<int>{cfg_.in_channels, cfg_.image_size, cfg_.image_size})
        throw ShapeError("denoise: input shape " + x_t->value.shape_str() + " does not match config");
    auto cond = ad::silu(embed_condition(t, v_id));

    int levels = static_cast<int>(cfg_.channel_multipliers.size());
    auto h = conv_in_(x_t);
    std::vector<ad::Var> skips{h};
    for (int l = 0; l < levels; ++l) {
        for (const auto& rb : down_[l]) {
            h = rb(h, cond);
            skips.push_back(h);
        }
        if (l < levels - 1) {
            h = ad::avg_pool2(h);
            skips.push_back(h);
        }
    }
    h = mid1_(h, cond);
    if (cfg_.attention_at_bottom) h = mid_attn_(h);
    h = mid2_(h, cond);
    for (int l = levels - 1; l >= 0; --l) {
        for (const auto& rb : up_[l]) {
            h = rb(ad::concat_ch(h, skips.back()), cond);
            skips.pop_back();
        }
        if (l > 0) h = ad::upsample_nearest2(h);
    }
    return conv_out_(ad::silu(gn_out_(h)));
}

Tensor Denoiser::denoise(const Tensor& x_t, int t, const Tensor& v_id) const {
    return forward(ad::constant(x_t), t, ad::constant(v_id))->value;
}

Checkpoint make_denoiser_checkpoint(const Denoiser& d, const nlohmann::json& schedule_desc, int64_t step,
                                    uint64_t seed, const nn::AdamW* optimizer) {
    Checkpoint c;
    c.kind = "denoiser";
    c.meta["config"] = d.config().to_json();
    c.meta["schedule"] = schedule_desc;
    c.meta["step"] = step;
    c.meta["seed"] = seed;
    c.arrays = d.params().state_dict();
    if (optimizer && !optimizer->moments_m.empty()) {
        c.meta["optimizer_step"] = optimizer->step_count();
        const auto& names = d.params().names();
        for (size_t i = 0; i < names.size(); ++i) {
            c.arrays["opt.m." + names[i]] = optimizer->moments_m[i];
            c.arrays["opt.v." + names[i]] = optimizer->moments_v[i];
        }
    }
    return c;
}

std::unique_ptr<Denoiser> denoiser_from_checkpoint(const Checkpoint& c, nn::AdamW* optimizer) {
    if (c.kind != "denoiser") throw ConfigError("checkpoint kind is '" + c.kind + "', expected 'denoiser'");
    DenoiserConfig cfg = DenoiserConfig::from_json(c.meta.at("config"));
    uint64_t seed = c.meta.value("seed", 0ull);
    auto d = std::make_unique<Denoiser>(cfg, seed);
    d->params().load_state_dict(c.arrays);
    if (optimizer && c.meta.contains("optimizer_step")) {
        const auto& names = d->params().names();
        optimizer->moments_m.clear();
        optimizer->moments_v.clear();
        for (const auto& n : names) {
            optimizer->moments_m.push_back(c.arrays.at("opt.m." + n));
            optimizer->moments_v.push_back(c.arrays.at("opt.v." + n));
        }
        optimizer->set_step_count(c.meta["optimizer_step"].get<int64_t>());
    }
    return d;
}

}  // namespace faceswap
