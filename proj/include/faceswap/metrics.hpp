#ifndef FACESWAP_METRICS_HPP
#define FACESWAP_METRICS_HPP

#include <map>

#include "faceswap/sampler.hpp"
#include "faceswap/synthface.hpp"

namespace faceswap {

// cos(D_I(a), D_I(b)) in [-1,1]
float id_similarity(const Tensor& a, const Tensor& b, const IdentityEmbedder& embedder);

// D(swap,src) / (D(swap,src) + D(swap,targ)); 0.5 on a 0/0 tie.
float relative_distance(const Tensor& x_swap, const Tensor& x_src, const Tensor& x_targ,
                        const std::function<float(const Tensor&, const Tensor&)>& distance);

// cosine distance 1 - cos in the embedder's space (the default distance)
std::function<float(const Tensor&, const Tensor&)> embedding_cosine_distance(
    const IdentityEmbedder& embedder);

// Oracle attribute errors of a swapped image against the TARGET's ground
// truth, in normalized parameter units. shape_err covers the identity-linked
// geometry parameters (face aspect, eye spacing, nose size, mouth width).
struct AttributeErrors {
    float pose_err = 0, expr_err = 0, gaze_err = 0, shape_err = 0;
};
AttributeErrors attribute_errors(const Tensor& x_swap, const FaceSpec& targ_oracle,
                                 const SpecFitter& fitter);

struct EvalPairRecord {
    int index = 0;
    bool failed = false;
    std::string error;
    float id_cosine = 0, id_relative = 0;
    float oracle_dist_src = 0, oracle_dist_targ = 0;
    float pose_err = 0, expr_err = 0, gaze_err = 0, shape_err = 0;
    float mask_iou = 0;
};

struct EvalAggregate {
    double mean = 0, stddev = 0;
};

struct EvalReport {
    std::vector<EvalPairRecord> pairs;
    std::map<std::string, EvalAggregate> aggregates;  // over non-failed pairs
    std::string config_fingerprint;
};

struct EvalContext {
    const Denoiser* denoiser = nullptr;
    const NoiseSchedule* train_sched = nullptr;
    const ExpertSet* experts = nullptr;              // experts the sampler uses
    const IdentityEmbedder* eval_embedder = nullptr; // held-out embedder for scoring
    const SpecFitter* fitter = nullptr;
    SwapConfig swap_cfg;                             // per-pair seed = seed + index
};

// Swaps and scores every (src, targ) pair; per-pair failures are recorded
// and the suite continues.
EvalReport evaluate_suite(const std::vector<std::pair<RenderedFace, RenderedFace>>& pairs,
                          const EvalContext& ctx);

void write_eval_csv(const EvalReport& report, const std::string& path);
std::string eval_summary(const EvalReport& report);

}  // namespace faceswap

#endif
