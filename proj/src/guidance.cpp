#include "faceswap/guidance.hpp"

#include <cmath>
#include <sstream>

namespace faceswap {

namespace {

// binary {11,H,W} mask selecting the facial-class channels
Tensor facial_channel_mask(int H, int W) {
    Tensor m({kNumFaceClasses, H, W});
    for (int c = 0; c < kNumFaceClasses; ++c)
        if (is_facial_class(c))
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) m.at(c, y, x) = 1.0f;
    return m;
}

ad::Var g_id_term(const IdentityEmbedder& e, const ad::Var& x0_view, const Tensor& src_embed) {
    return ad::sub(ad::constant(Tensor::scalar(1.0f)), ad::cosine(e.embed(x0_view), ad::constant(src_embed)));
}

ad::Var g_sem_term(const FaceParser& p, const ad::Var& x0_view, const Tensor& targ_parse,
                   const Tensor& chmask) {
    int H = targ_parse.shape[1], W = targ_parse.shape[2];
    auto d = ad::mul(ad::sub(p.parse(x0_view), ad::constant(targ_parse)), ad::constant(chmask));
    return ad::scale(ad::sum_all(ad::mul(d, d)), 1.0f / (static_cast<float>(H) * W));
}

ad::Var g_gaze_term(const GazeEstimator& g, const ad::Var& x0_view, const EyeLandmarks& lm,
                    const Tensor& targ_gaze) {
    auto d = ad::sub(g.estimate(x0_view, lm), ad::constant(targ_gaze));
    return ad::sum_all(ad::mul(d, d));
}

Tensor mean_gaze_tensor(const GazeVector& v) { return Tensor({2}, {v.mean[0], v.mean[1]}); }

struct View {
    float y0 = 0, x0 = 0, size = 0;  // source rectangle (square) in pixels
    bool identity = true;
};

// Maps landmarks from full-image coordinates into view coordinates.
EyeLandmarks map_landmarks(const EyeLandmarks& lm, const View& v, int H, int W) {
    if (v.identity) return lm;
    float sy = H / v.size, sx = W / v.size;
    return {(lm.left_x - v.x0) * sx, (lm.left_y - v.y0) * sy, (lm.right_x - v.x0) * sx,
            (lm.right_y - v.y0) * sy};
}

bool landmarks_inside(const EyeLandmarks& lm, int H, int W) {
    auto ok = [&](float x, float y) { return x >= 0 && x <= W && y >= 0 && y <= H; };
    return ok(lm.left_x, lm.left_y) && ok(lm.right_x, lm.right_y);
}

ad::Var apply_view(const ad::Var& img, const View& v) {
    if (v.identity) return img;
    const auto& s = img->value.shape;
    return ad::crop_resize(img, v.y0, v.x0, v.size, v.size, s[1], s[2]);
}

Tensor apply_view_tensor(const Tensor& img, const View& v) {
    return apply_view(ad::constant(img), v)->value;
}

}  // namespace

void GuidanceConfig::validate() const {
    if (lambda_id < 0 || lambda_sem < 0 || lambda_gaze < 0)
        throw ParameterError("guidance weights must be non-negative");
    if (num_augmentations < 1) throw ParameterError("num_augmentations must be >= 1");
}

nlohmann::json GuidanceConfig::to_json() const {
    return {{"lambda_id", lambda_id},   {"lambda_sem", lambda_sem},
            {"lambda_gaze", lambda_gaze}, {"num_augmentations", num_augmentations},
            {"augmentation_seed", augmentation_seed}};
}
GuidanceConfig GuidanceConfig::from_json(const nlohmann::json& j) {
    GuidanceConfig c;
    c.lambda_id = j.at("lambda_id");
    c.lambda_sem = j.at("lambda_sem");
    c.lambda_gaze = j.at("lambda_gaze");
    c.num_augmentations = j.at("num_augmentations");
    c.augmentation_seed = j.at("augmentation_seed");
    return c;
}

float g_id(const IdentityEmbedder& embedder, const Tensor& x0_hat, const Tensor& x_src) {
    Tensor src = embedder.embed_identity(x_src);
    return g_id_term(embedder, ad::constant(x0_hat), src)->value.data[0];
}

float g_sem(const FaceParser& parser, const Tensor& x0_hat, const Tensor& x_targ) {
    require_same_shape(x0_hat, x_targ, "g_sem");
    Tensor targ = parser.parse_face(x_targ);
    Tensor chmask = facial_channel_mask(targ.shape[1], targ.shape[2]);
    return g_sem_term(parser, ad::constant(x0_hat), targ, chmask)->value.data[0];
}

float g_gaze(const GazeEstimator& gaze, const Tensor& x0_hat, const Tensor& x_targ,
             const EyeLandmarks& landmarks_targ) {
    Tensor targ = mean_gaze_tensor(gaze.estimate_gaze(x_targ, landmarks_targ));
    return g_gaze_term(gaze, ad::constant(x0_hat), landmarks_targ, targ)->value.data[0];
}

float g_facial(const ExpertSet& experts, const Tensor& x0_hat, const Tensor& x_src,
               const Tensor& x_targ, const EyeLandmarks& landmarks_targ, const GuidanceConfig& cfg) {
    cfg.validate();
    float total = 0;
    if (cfg.lambda_id > 0) total += cfg.lambda_id * g_id(*experts.embedder, x0_hat, x_src);
    if (cfg.lambda_sem > 0) total += cfg.lambda_sem * g_sem(*experts.parser, x0_hat, x_targ);
    if (cfg.lambda_gaze > 0) total += cfg.lambda_gaze * g_gaze(*experts.gaze, x0_hat, x_targ, landmarks_targ);
    return total;
}

GuidanceResult guidance_gradient(const Tensor& x_t, int t, const Tensor& v_id, const Tensor& x_src,
                                 const Tensor& x_targ, const EyeLandmarks& landmarks_targ,
                                 const Denoiser& denoiser, const NoiseSchedule& sched,
                                 const ExpertSet& experts, const GuidanceConfig& cfg) {
    cfg.validate();
    sched.check_index(t);
    int t_cond = sched.timestep_map[static_cast<size_t>(t)];
    int H = x_t.shape[1], W = x_t.shape[2];

    GuidanceResult out;
    bool any = cfg.lambda_id > 0 || cfg.lambda_sem > 0 || cfg.lambda_gaze > 0;
    if (!any) {
        out.eps_pred = denoiser.denoise(x_t, t_cond, v_id);
        out.gradient = Tensor::zeros(x_t.shape);
        return out;
    }

    auto x_t_var = ad::leaf(x_t);
    auto eps = denoiser.forward(x_t_var, t_cond, ad::constant(v_id));
    // clamp to the image range before the experts: at early steps the raw
    // x0 estimate is amplified by 1/sqrt(alpha_bar) and would overflow them
    auto x0 = ad::clamp(predict_x0(x_t_var, t, eps, sched), -1.0f, 1.0f);

    // identity view first, then deterministic random crops
    std::mt19937_64 rng(cfg.augmentation_seed + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(t));
    std::vector<View> views(1);
    for (int v = 0; v < cfg.num_augmentations; ++v) {
        View view;  // falls back to the full image if no crop keeps the eyes inside
        for (int attempt = 0; attempt < 100; ++attempt) {
            View cand;
            cand.identity = false;
            float frac = std::uniform_real_distribution<float>(0.6f, 1.0f)(rng);
            cand.size = frac * std::min(H, W);
            cand.y0 = std::uniform_real_distribution<float>(0.0f, H - cand.size)(rng);
            cand.x0 = std::uniform_real_distribution<float>(0.0f, W - cand.size)(rng);
            if (cfg.lambda_gaze <= 0 || landmarks_inside(map_landmarks(landmarks_targ, cand, H, W), H, W)) {
                view = cand;
                break;
            }
        }
        views.push_back(view);
    }

    Tensor chmask = cfg.lambda_sem > 0 ? facial_channel_mask(H, W) : Tensor();
    ad::Var total;
    GuidanceDiagnostics diag;
    auto src_var = ad::constant(x_src);
    auto targ_var = ad::constant(x_targ);
    for (const auto& view : views) {
        auto x0_view = apply_view(x0, view);
        ad::Var view_total;
        auto accumulate = [&](float lambda, const ad::Var& term, double& slot) {
            slot += term->value.data[0];
            auto weighted = ad::scale(term, lambda);
            view_total = view_total ? ad::add(view_total, weighted) : weighted;
        };
        if (cfg.lambda_id > 0) {
            Tensor src_emb = experts.embedder->embed_identity(apply_view(src_var, view)->value);
            accumulate(cfg.lambda_id, g_id_term(*experts.embedder, x0_view, src_emb), diag.g_id);
        }
        if (cfg.lambda_sem > 0) {
            Tensor targ_parse = experts.parser->parse_face(apply_view(targ_var, view)->value);
            accumulate(cfg.lambda_sem, g_sem_term(*experts.parser, x0_view, targ_parse, chmask), diag.g_sem);
        }
        if (cfg.lambda_gaze > 0) {
            EyeLandmarks lm = map_landmarks(landmarks_targ, view, H, W);
            Tensor targ_gaze =
                mean_gaze_tensor(experts.gaze->estimate_gaze(apply_view_tensor(x_targ, view), lm));
            accumulate(cfg.lambda_gaze, g_gaze_term(*experts.gaze, x0_view, lm, targ_gaze), diag.g_gaze);
        }
        total = total ? ad::add(total, view_total) : view_total;
    }
    float inv_views = 1.0f / static_cast<float>(views.size());
    total = ad::scale(total, inv_views);
    diag.g_id *= inv_views;
    diag.g_sem *= inv_views;
    diag.g_gaze *= inv_views;
    diag.g_total = total->value.data[0];

    ad::backward(total);
    out.gradient = x_t_var->has_grad ? x_t_var->grad : Tensor::zeros(x_t.shape);
    out.eps_pred = eps->value;

    double nrm = 0;
    for (float g : out.gradient.data) nrm += double(g) * g;
    diag.grad_norm = std::sqrt(nrm);
    out.diag = diag;

    if (!all_finite(out.gradient) || !std::isfinite(diag.g_total)) {
        std::ostringstream os;
        os << "non-finite guidance gradient at t=" << t << " (g_id=" << diag.g_id
           << ", g_sem=" << diag.g_sem << ", g_gaze=" << diag.g_gaze << ")";
        throw GuidanceFailure(os.str());
    }
    return out;
}

}  // namespace faceswap
