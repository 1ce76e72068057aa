#ifndef FACESWAP_EXPERTS_HPP
#define FACESWAP_EXPERTS_HPP

#include <memory>
#include <ostream>

#include "faceswap/checkpoint.hpp"
#include "faceswap/nn.hpp"
#include "faceswap/synthface.hpp"

namespace faceswap {

// ---------------------------------------------------------------- embedder

struct EmbedderConfig {
    int input_size = 32;
    int base_channels = 16;
    int embed_dim = 64;
    int num_classes = 96;  // identity buckets used during fitting
    uint64_t seed = 1;
    nlohmann::json to_json() const;
    static EmbedderConfig from_json(const nlohmann::json& j);
};

// Toy stand-in for a pretrained identity embedder: small conv net with a
// unit-norm output head, fitted by classification over identity buckets.
class IdentityEmbedder {
public:
    explicit IdentityEmbedder(EmbedderConfig cfg);

    // Unit-length embedding, differentiable w.r.t. the input image. Inputs
    // are expected in [-1,1]; other resolutions are resized bilinearly.
    ad::Var embed(const ad::Var& image) const;
    Tensor embed_identity(const Tensor& image) const;
    ad::Var class_logits(const ad::Var& image) const;               // fitting only
    ad::Var logits_from_embedding(const ad::Var& embedding) const;  // fitting only

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const EmbedderConfig& config() const { return cfg_; }

private:
    ad::Var features(const ad::Var& image) const;
    EmbedderConfig cfg_;
    nn::ParamStore params_;
    nn::Conv2d c1_, c2_, c3_, c4_;
    nn::Linear fc_, head_;
};

// ------------------------------------------------------------------ parser

struct ParserConfig {
    int input_size = 32;
    int base_channels = 16;
    uint64_t seed = 2;
    nlohmann::json to_json() const;
    static ParserConfig from_json(const nlohmann::json& j);
};

// Per-pixel class probabilities over the 11 face classes.
class FaceParser {
public:
    explicit FaceParser(ParserConfig cfg);

    ad::Var logits(const ad::Var& image) const;
    ad::Var parse(const ad::Var& image) const;  // softmax probabilities {11,H,W}
    Tensor parse_face(const Tensor& image) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const ParserConfig& config() const { return cfg_; }

private:
    ParserConfig cfg_;
    nn::ParamStore params_;
    nn::Conv2d c1_, c2_, c3_, c4_, c5_, out_;
};

// binary facial mask from argmax class membership (hair/background excluded)
Tensor extract_hard_mask(const Tensor& parse_map);

// -------------------------------------------------------------------- gaze

struct GazeConfig {
    int input_size = 32;
    int crop_h = 6;   // scaled-down analog of the conventional tall eye crop
    int crop_w = 10;
    int base_channels = 16;
    uint64_t seed = 3;
    nlohmann::json to_json() const;
    static GazeConfig from_json(const nlohmann::json& j);
};

struct EyeLandmarks {
    float left_x, left_y, right_x, right_y;  // continuous pixel coordinates
};

struct GazeVector {
    float left[2], right[2], mean[2];
};

class GazeEstimator {
public:
    explicit GazeEstimator(GazeConfig cfg);

    // Crops fixed-size patches centered at the landmarks (bilinear, so the
    // result is differentiable w.r.t. image pixels) and averages the two
    // per-eye regressions.
    ad::Var estimate(const ad::Var& image, const EyeLandmarks& lm) const;
    GazeVector estimate_gaze(const Tensor& image, const EyeLandmarks& lm) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const GazeConfig& config() const { return cfg_; }

private:
    ad::Var eye_branch(const ad::Var& image, float cx, float cy) const;
    GazeConfig cfg_;
    nn::ParamStore params_;
    nn::Conv2d c1_, c2_;
    nn::Linear fc_;
};

// ----------------------------------------------------------------- fitting

struct ExpertSet {
    std::shared_ptr<IdentityEmbedder> embedder;
    std::shared_ptr<FaceParser> parser;
    std::shared_ptr<GazeEstimator> gaze;
};

struct ExpertFitMetrics {
    float triplet_accuracy = 0;
    float mean_iou = 0;
    float gaze_mae = 0;
};

// Fits all three toy experts on oracle-labeled synthetic data and freezes
// them. Throws TrainingFailure when a validation floor is not met
// (triplet accuracy >= 0.95, mean IoU > 0.7, gaze MAE < 0.1).
ExpertSet fit_toy_experts(const std::vector<RenderedFace>& dataset, uint64_t seed,
                          ExpertFitMetrics* metrics = nullptr, std::ostream* log = nullptr);

// Fits a single embedder (used for the separately-seeded evaluation
// embedder mirroring the cross-embedder protocol).
std::shared_ptr<IdentityEmbedder> fit_identity_embedder(const std::vector<RenderedFace>& dataset,
                                                        EmbedderConfig cfg, std::ostream* log = nullptr);

// validation helpers (also used by the acceptance suite)
float embedder_triplet_accuracy(const IdentityEmbedder& e, int num_triplets, uint64_t seed, int resolution);
float parser_mean_iou(const FaceParser& p, const std::vector<RenderedFace>& heldout);
float gaze_mean_abs_error(const GazeEstimator& g, const std::vector<RenderedFace>& heldout);

// persistence (kind tags "embedder" / "parser" / "gaze")
Checkpoint make_expert_checkpoint(const IdentityEmbedder& e);
Checkpoint make_expert_checkpoint(const FaceParser& p);
Checkpoint make_expert_checkpoint(const GazeEstimator& g);
std::shared_ptr<IdentityEmbedder> embedder_from_checkpoint(const Checkpoint& c);
std::shared_ptr<FaceParser> parser_from_checkpoint(const Checkpoint& c);
std::shared_ptr<GazeEstimator> gaze_from_checkpoint(const Checkpoint& c);

}  // namespace faceswap

#endif
