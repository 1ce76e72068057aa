#include "faceswap/experts.hpp"

#include <algorithm>
#include <cmath>

namespace faceswap {

namespace {

ad::Var resize_to(const ad::Var& image, int size) {
    const auto& s = image->value.shape;
    if (s.size() != 3 || s[0] != 3) throw ShapeError("expert input must be {3,H,W}");
    if (s[1] == size && s[2] == size) return image;
    return ad::crop_resize(image, 0, 0, static_cast<float>(s[1]), static_cast<float>(s[2]), size, size);
}

FaceSpec with_random_attributes(const FaceSpec& identity, std::mt19937_64& rng) {
    FaceSpec s = identity;
    std::uniform_real_distribution<float> u01(-1.0f, 1.0f);
    s.yaw_deg = u01(rng) * 30.0f;
    s.expression = u01(rng);
    s.gaze_x = u01(rng);
    s.gaze_y = u01(rng);
    s.background = std::uniform_int_distribution<int>(0, 3)(rng);
    return s;
}

void check_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) throw ExpertFailure(std::string(what) + ": non-finite activations");
}

// 3x3 box blur with edge clamp, applied per channel
Tensor box_blur(const Tensor& img) {
    int C = img.shape[0], H = img.shape[1], W = img.shape[2];
    Tensor out(img.shape);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float s = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        s += img.at(c, std::clamp(y + dy, 0, H - 1), std::clamp(x + dx, 0, W - 1));
                out.at(c, y, x) = s / 9.0f;
            }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- embedder

nlohmann::json EmbedderConfig::to_json() const {
    return {{"input_size", input_size}, {"base_channels", base_channels}, {"embed_dim", embed_dim},
            {"num_classes", num_classes}, {"seed", seed}};
}
EmbedderConfig EmbedderConfig::from_json(const nlohmann::json& j) {
    EmbedderConfig c;
    c.input_size = j.at("input_size");
    c.base_channels = j.at("base_channels");
    c.embed_dim = j.at("embed_dim");
    c.num_classes = j.at("num_classes");
    c.seed = j.at("seed");
    return c;
}

IdentityEmbedder::IdentityEmbedder(EmbedderConfig cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg_.seed);
    int b = cfg_.base_channels;
    c1_ = nn::Conv2d(params_, "c1", 3, b, 3, rng);
    c2_ = nn::Conv2d(params_, "c2", b, 2 * b, 3, rng);
    c3_ = nn::Conv2d(params_, "c3", 2 * b, 4 * b, 3, rng);
    c4_ = nn::Conv2d(params_, "c4", 4 * b, 4 * b, 3, rng);
    fc_ = nn::Linear(params_, "fc", 4 * b, cfg_.embed_dim, rng);
    head_ = nn::Linear(params_, "head", cfg_.embed_dim, cfg_.num_classes, rng);
}

ad::Var IdentityEmbedder::features(const ad::Var& image) const {
    auto h = resize_to(image, cfg_.input_size);
    h = ad::avg_pool2(ad::silu(c1_(h)));
    h = ad::avg_pool2(ad::silu(c2_(h)));
    h = ad::silu(c3_(h));
    h = ad::silu(c4_(h));  // receptive field must span the whole face
    return ad::global_avg_pool(h);
}

ad::Var IdentityEmbedder::embed(const ad::Var& image) const { return ad::l2_normalize(fc_(features(image))); }

ad::Var IdentityEmbedder::class_logits(const ad::Var& image) const {
    return logits_from_embedding(embed(image));
}

ad::Var IdentityEmbedder::logits_from_embedding(const ad::Var& embedding) const {
    // cosine-classifier style head on the unit embedding
    return head_(ad::scale(embedding, 10.0f));
}

Tensor IdentityEmbedder::embed_identity(const Tensor& image) const {
    Tensor out = embed(ad::constant(image))->value;
    check_finite(out, "embed_identity");
    return out;
}

// ------------------------------------------------------------------ parser

nlohmann::json ParserConfig::to_json() const {
    return {{"input_size", input_size}, {"base_channels", base_channels}, {"seed", seed}};
}
ParserConfig ParserConfig::from_json(const nlohmann::json& j) {
    ParserConfig c;
    c.input_size = j.at("input_size");
    c.base_channels = j.at("base_channels");
    c.seed = j.at("seed");
    return c;
}

FaceParser::FaceParser(ParserConfig cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg_.seed);
    int b = cfg_.base_channels;
    c1_ = nn::Conv2d(params_, "c1", 3, b, 3, rng);
    c2_ = nn::Conv2d(params_, "c2", b, b, 3, rng);
    c3_ = nn::Conv2d(params_, "c3", b, 2 * b, 3, rng);
    c4_ = nn::Conv2d(params_, "c4", 2 * b, 2 * b, 3, rng);
    c5_ = nn::Conv2d(params_, "c5", 3 * b, b, 3, rng);
    out_ = nn::Conv2d(params_, "out", b, kNumFaceClasses, 1, rng);
}

ad::Var FaceParser::logits(const ad::Var& image) const {
    auto x = resize_to(image, cfg_.input_size);
    auto h1 = ad::silu(c2_(ad::silu(c1_(x))));          // full res, b channels
    auto h2 = ad::silu(c3_(ad::avg_pool2(h1)));
    h2 = ad::silu(c4_(h2));                             // half res, 2b channels
    auto h = ad::concat_ch(h1, ad::upsample_nearest2(h2));
    return out_(ad::silu(c5_(h)));
}

ad::Var FaceParser::parse(const ad::Var& image) const { return ad::softmax_ch(logits(image)); }

Tensor FaceParser::parse_face(const Tensor& image) const {
    Tensor out = parse(ad::constant(image))->value;
    check_finite(out, "parse_face");
    return out;
}

Tensor extract_hard_mask(const Tensor& parse_map) {
    if (parse_map.shape.size() != 3 || parse_map.shape[0] != kNumFaceClasses)
        throw ShapeError("extract_hard_mask: need {11,H,W} parse map");
    int H = parse_map.shape[1], W = parse_map.shape[2];
    Tensor mask({1, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            for (int c = 1; c < kNumFaceClasses; ++c)
                if (parse_map.at(c, y, x) > parse_map.at(best, y, x)) best = c;
            mask.at(0, y, x) = is_facial_class(best) ? 1.0f : 0.0f;
        }
    return mask;
}

// -------------------------------------------------------------------- gaze

nlohmann::json GazeConfig::to_json() const {
    return {{"input_size", input_size}, {"crop_h", crop_h}, {"crop_w", crop_w},
            {"base_channels", base_channels}, {"seed", seed}};
}
GazeConfig GazeConfig::from_json(const nlohmann::json& j) {
    GazeConfig c;
    c.input_size = j.at("input_size");
    c.crop_h = j.at("crop_h");
    c.crop_w = j.at("crop_w");
    c.base_channels = j.at("base_channels");
    c.seed = j.at("seed");
    return c;
}

GazeEstimator::GazeEstimator(GazeConfig cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg_.seed);
    int b = cfg_.base_channels;
    c1_ = nn::Conv2d(params_, "c1", 3, b, 3, rng);
    c2_ = nn::Conv2d(params_, "c2", b, 2 * b, 3, rng);
    fc_ = nn::Linear(params_, "fc", 2 * b, 2, rng);
}

ad::Var GazeEstimator::eye_branch(const ad::Var& image, float cx, float cy) const {
    const auto& s = image->value.shape;
    if (cx < 0 || cy < 0 || cx > s[2] || cy > s[1])
        throw ParameterError("estimate_gaze: eye landmark outside image bounds");
    auto patch = ad::crop_resize(image, cy - cfg_.crop_h / 2.0f, cx - cfg_.crop_w / 2.0f,
                                 static_cast<float>(cfg_.crop_h), static_cast<float>(cfg_.crop_w),
                                 cfg_.crop_h, cfg_.crop_w);
    auto h = ad::silu(c2_(ad::silu(c1_(patch))));
    return fc_(ad::global_avg_pool(h));
}

ad::Var GazeEstimator::estimate(const ad::Var& image, const EyeLandmarks& lm) const {
    auto l = eye_branch(image, lm.left_x, lm.left_y);
    auto r = eye_branch(image, lm.right_x, lm.right_y);
    return ad::scale(ad::add(l, r), 0.5f);
}

GazeVector GazeEstimator::estimate_gaze(const Tensor& image, const EyeLandmarks& lm) const {
    auto img = ad::constant(image);
    Tensor l = eye_branch(img, lm.left_x, lm.left_y)->value;
    Tensor r = eye_branch(img, lm.right_x, lm.right_y)->value;
    check_finite(l, "estimate_gaze");
    check_finite(r, "estimate_gaze");
    GazeVector v;
    for (int i = 0; i < 2; ++i) {
        v.left[i] = l.data[i];
        v.right[i] = r.data[i];
        v.mean[i] = 0.5f * (l.data[i] + r.data[i]);
    }
    return v;
}

// ----------------------------------------------------------------- fitting

std::shared_ptr<IdentityEmbedder> fit_identity_embedder(const std::vector<RenderedFace>& dataset,
                                                        EmbedderConfig cfg, std::ostream* log) {
    if (dataset.empty()) throw ParameterError("fit_identity_embedder: empty dataset");
    int res = dataset[0].image.shape[1];
    if (cfg.input_size <= 0) cfg.input_size = res;
    cfg.num_classes = std::min<int>(cfg.num_classes, static_cast<int>(dataset.size()));
    auto embedder = std::make_shared<IdentityEmbedder>(cfg);

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const int variants = 8;
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::vector<Tensor> id_params;
    for (int k = 0; k < cfg.num_classes; ++k)
        for (int v = 0; v < variants; ++v) {
            const FaceSpec& spec = dataset[static_cast<size_t>(k)].spec;
            images.push_back(render_face(with_random_attributes(spec, rng), res).image);
            labels.push_back(k);
            auto ni = spec.normalized_identity();
            id_params.push_back(Tensor({static_cast<int64_t>(ni.size())},
                                       FloatBuf(ni.begin(), ni.end())));
        }

    // auxiliary head (discarded after fitting): regressing the generator's
    // identity parameters forces the embedding to encode all of them, not
    // just the dominant color cues the classification loss settles for.
    // Fine-geometry params (eye spacing/color, nose, mouth) get extra weight
    // since they occupy few pixels and are otherwise ignored
    nn::ParamStore aux_store;
    nn::Linear aux_head(aux_store, "aux", cfg.embed_dim, static_cast<int>(id_params[0].numel()), rng);
    // coarse params only: fine geometry (eye spacing, nose, mouth) occupies
    // so few pixels that encoding it inflates the embedder's input Jacobian,
    // and the sampling-time guidance perturbation sigma*lambda*grad then
    // overwhelms the image; coarse cues keep gradients small and semantic
    const Tensor aux_weights({6}, {4.0f, 4.0f, 0.0f, 8.0f, 0.0f, 0.0f});

    nn::AdamW opt;
    opt.lr = 2e-3f;
    std::vector<ad::Var> all_params = embedder->params().params();
    for (const auto& p : aux_store.params()) all_params.push_back(p);
    const int steps = cfg.num_classes * variants * 12;
    std::uniform_int_distribution<size_t> pick(0, images.size() - 1);
    // pixel-noise augmentation: the embedder is later evaluated on denoised
    // estimates that sit off the clean-render manifold, and a noise-robust
    // embedder keeps its input gradients well behaved there
    std::uniform_real_distribution<float> noise_level(0.0f, 0.2f);
    std::normal_distribution<float> pixel_noise(0.0f, 1.0f);
    // blur augmentation: mid-trajectory denoised estimates are soft/blurry,
    // and an embedder that has only seen sharp renders produces erratic
    // gradients there; training on blurred variants keeps its identity read
    // stable on the images guidance actually differentiates through
    std::uniform_int_distribution<int> blur_passes(0, 2);
    for (int s = 0; s < steps; ++s) {
        size_t i = pick(rng);
        Tensor img = images[i];
        for (int bp = blur_passes(rng); bp > 0; --bp) img = box_blur(img);
        float nl = noise_level(rng);
        for (auto& v : img.data) v = std::min(1.0f, std::max(-1.0f, v + nl * pixel_noise(rng)));
        embedder->params().zero_grad();
        aux_store.zero_grad();
        auto e = embedder->embed(ad::constant(img));
        auto pdiff = ad::sub(aux_head(e), ad::constant(id_params[i]));
        auto loss = ad::add(ad::cross_entropy_logits(embedder->logits_from_embedding(e), labels[i]),
                            ad::sum_all(ad::mul(ad::mul(pdiff, pdiff), ad::constant(aux_weights))));
        ad::backward(loss);
        opt.step(all_params);
        if (log && s % 1000 == 0) (*log) << "embedder step " << s << " loss " << loss->value.data[0] << "\n";
    }
    embedder->params().freeze();
    return embedder;
}

float embedder_triplet_accuracy(const IdentityEmbedder& e, int num_triplets, uint64_t seed, int resolution) {
    std::mt19937_64 rng(seed);
    int hits = 0;
    for (int i = 0; i < num_triplets; ++i) {
        FaceSpec anchor = sample_spec(rng);
        FaceSpec positive = with_random_attributes(anchor, rng);
        FaceSpec negative = sample_spec(rng);
        Tensor ea = e.embed_identity(render_face(anchor, resolution).image);
        Tensor ep = e.embed_identity(render_face(positive, resolution).image);
        Tensor en = e.embed_identity(render_face(negative, resolution).image);
        double cp = 0, cn = 0;
        for (int k = 0; k < ea.numel(); ++k) {
            cp += double(ea.data[k]) * ep.data[k];
            cn += double(ea.data[k]) * en.data[k];
        }
        if (cp > cn) ++hits;
    }
    return static_cast<float>(hits) / num_triplets;
}

float parser_mean_iou(const FaceParser& p, const std::vector<RenderedFace>& heldout) {
    std::vector<int64_t> inter(kNumFaceClasses, 0), uni(kNumFaceClasses, 0);
    for (const auto& f : heldout) {
        Tensor probs = p.parse_face(f.image);
        int H = probs.shape[1], W = probs.shape[2];
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int pred = 0;
                for (int c = 1; c < kNumFaceClasses; ++c)
                    if (probs.at(c, y, x) > probs.at(pred, y, x)) pred = c;
                int truth = f.labels[static_cast<size_t>(y) * W + x];
                if (pred == truth) {
                    ++inter[truth];
                    ++uni[truth];
                } else {
                    ++uni[truth];
                    ++uni[pred];
                }
            }
    }
    double sum = 0;
    int present = 0;
    for (int c = 0; c < kNumFaceClasses; ++c)
        if (uni[c] > 0) {
            sum += double(inter[c]) / double(uni[c]);
            ++present;
        }
    return present ? static_cast<float>(sum / present) : 0.0f;
}

float gaze_mean_abs_error(const GazeEstimator& g, const std::vector<RenderedFace>& heldout) {
    double err = 0;
    for (const auto& f : heldout) {
        GazeVector v = g.estimate_gaze(f.image, {f.left_eye_x, f.left_eye_y, f.right_eye_x, f.right_eye_y});
        err += 0.5 * (std::fabs(v.mean[0] - f.gaze_x) + std::fabs(v.mean[1] - f.gaze_y));
    }
    return static_cast<float>(err / heldout.size());
}

ExpertSet fit_toy_experts(const std::vector<RenderedFace>& dataset, uint64_t seed, ExpertFitMetrics* metrics,
                          std::ostream* log) {
    if (dataset.size() < 20) throw ParameterError("fit_toy_experts: dataset too small");
    int res = dataset[0].image.shape[1];
    size_t val_count = std::max<size_t>(10, dataset.size() / 10);
    size_t train_count = dataset.size() - val_count;
    std::vector<RenderedFace> train(dataset.begin(), dataset.begin() + static_cast<long>(train_count));
    std::vector<RenderedFace> val(dataset.begin() + static_cast<long>(train_count), dataset.end());

    ExpertSet set;
    EmbedderConfig ecfg;
    ecfg.seed = seed;
    set.embedder = fit_identity_embedder(train, ecfg, log);

    // parser: per-pixel cross-entropy against oracle labels
    ParserConfig pcfg;
    pcfg.input_size = res;
    pcfg.seed = seed + 1;
    set.parser = std::make_shared<FaceParser>(pcfg);
    {
        std::mt19937_64 rng(seed + 101);
        nn::AdamW opt;
        opt.lr = 2e-3f;
        std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
        const int steps = 6000;
        for (int s = 0; s < steps; ++s) {
            const auto& f = train[pick(rng)];
            set.parser->params().zero_grad();
            auto loss = ad::cross_entropy_map(set.parser->logits(ad::constant(f.image)), f.labels);
            ad::backward(loss);
            opt.step(set.parser->params().params());
            if (log && s % 1000 == 0) (*log) << "parser step " << s << " loss " << loss->value.data[0] << "\n";
        }
        set.parser->params().freeze();
    }

    // gaze: regression against the oracle gaze vector
    GazeConfig gcfg;
    gcfg.input_size = res;
    gcfg.crop_h = std::max(4, res * 6 / 32);
    gcfg.crop_w = std::max(6, res * 10 / 32);
    gcfg.seed = seed + 2;
    set.gaze = std::make_shared<GazeEstimator>(gcfg);
    {
        std::mt19937_64 rng(seed + 202);
        nn::AdamW opt;
        opt.lr = 2e-3f;
        std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
        const int steps = 8000;
        for (int s = 0; s < steps; ++s) {
            const auto& f = train[pick(rng)];
            set.gaze->params().zero_grad();
            Tensor target({2}, {f.gaze_x, f.gaze_y});
            auto pred = set.gaze->estimate(ad::constant(f.image),
                                           {f.left_eye_x, f.left_eye_y, f.right_eye_x, f.right_eye_y});
            auto loss = ad::mse(pred, ad::constant(target));
            ad::backward(loss);
            opt.step(set.gaze->params().params());
            if (log && s % 2000 == 0) (*log) << "gaze step " << s << " loss " << loss->value.data[0] << "\n";
        }
        set.gaze->params().freeze();
    }

    ExpertFitMetrics m;
    m.triplet_accuracy = embedder_triplet_accuracy(*set.embedder, 500, seed + 303, res);
    m.mean_iou = parser_mean_iou(*set.parser, val);
    m.gaze_mae = gaze_mean_abs_error(*set.gaze, val);
    if (metrics) *metrics = m;
    if (log)
        (*log) << "expert validation: triplet_acc=" << m.triplet_accuracy << " mean_iou=" << m.mean_iou
               << " gaze_mae=" << m.gaze_mae << "\n";
    if (m.triplet_accuracy < 0.95f)
        throw TrainingFailure("embedder triplet accuracy " + std::to_string(m.triplet_accuracy) + " below 0.95");
    if (m.mean_iou <= 0.7f) throw TrainingFailure("parser mean IoU " + std::to_string(m.mean_iou) + " below 0.7");
    if (m.gaze_mae >= 0.1f) throw TrainingFailure("gaze MAE " + std::to_string(m.gaze_mae) + " above 0.1");
    return set;
}

// ------------------------------------------------------------- persistence

Checkpoint make_expert_checkpoint(const IdentityEmbedder& e) {
    Checkpoint c;
    c.kind = "embedder";
    c.meta["config"] = e.config().to_json();
    c.arrays = e.params().state_dict();
    return c;
}
Checkpoint make_expert_checkpoint(const FaceParser& p) {
    Checkpoint c;
    c.kind = "parser";
    c.meta["config"] = p.config().to_json();
    c.arrays = p.params().state_dict();
    return c;
}
Checkpoint make_expert_checkpoint(const GazeEstimator& g) {
    Checkpoint c;
    c.kind = "gaze";
    c.meta["config"] = g.config().to_json();
    c.arrays = g.params().state_dict();
    return c;
}

std::shared_ptr<IdentityEmbedder> embedder_from_checkpoint(const Checkpoint& c) {
    if (c.kind != "embedder") throw ConfigError("checkpoint kind '" + c.kind + "', expected 'embedder'");
    auto e = std::make_shared<IdentityEmbedder>(EmbedderConfig::from_json(c.meta.at("config")));
    e->params().load_state_dict(c.arrays);
    e->params().freeze();
    return e;
}
std::shared_ptr<FaceParser> parser_from_checkpoint(const Checkpoint& c) {
    if (c.kind != "parser") throw ConfigError("checkpoint kind '" + c.kind + "', expected 'parser'");
    auto p = std::make_shared<FaceParser>(ParserConfig::from_json(c.meta.at("config")));
    p->params().load_state_dict(c.arrays);
    p->params().freeze();
    return p;
}
std::shared_ptr<GazeEstimator> gaze_from_checkpoint(const Checkpoint& c) {
    if (c.kind != "gaze") throw ConfigError("checkpoint kind '" + c.kind + "', expected 'gaze'");
    auto g = std::make_shared<GazeEstimator>(GazeConfig::from_json(c.meta.at("config")));
    g->params().load_state_dict(c.arrays);
    g->params().freeze();
    return g;
}

}  // namespace faceswap
