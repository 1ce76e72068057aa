#include "faceswap/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace faceswap {

namespace {

float cosine_of(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "cosine");
    double num = 0, na = 0, nb = 0;
    for (int i = 0; i < a.numel(); ++i) {
        num += double(a.data[i]) * b.data[i];
        na += double(a.data[i]) * a.data[i];
        nb += double(b.data[i]) * b.data[i];
    }
    double den = std::sqrt(na) * std::sqrt(nb);
    return den > 0 ? static_cast<float>(num / den) : 0.0f;
}

float mask_iou(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mask_iou");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        bool pa = a.data[i] > 0.5f, pb = b.data[i] > 0.5f;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni ? static_cast<float>(double(inter) / double(uni)) : 1.0f;
}

}  // namespace

float id_similarity(const Tensor& a, const Tensor& b, const IdentityEmbedder& embedder) {
    return cosine_of(embedder.embed_identity(a), embedder.embed_identity(b));
}

float relative_distance(const Tensor& x_swap, const Tensor& x_src, const Tensor& x_targ,
                        const std::function<float(const Tensor&, const Tensor&)>& distance) {
    float ds = distance(x_swap, x_src);
    float dt = distance(x_swap, x_targ);
    if (ds < 0 || dt < 0) throw ParameterError("relative_distance: distances must be non-negative");
    float denom = ds + dt;
    if (denom == 0) return 0.5f;  // degenerate tie
    return ds / denom;
}

std::function<float(const Tensor&, const Tensor&)> embedding_cosine_distance(
    const IdentityEmbedder& embedder) {
    return [&embedder](const Tensor& a, const Tensor& b) {
        return std::max(0.0f, 1.0f - id_similarity(a, b, embedder));
    };
}

AttributeErrors attribute_errors(const Tensor& x_swap, const FaceSpec& targ_oracle,
                                 const SpecFitter& fitter) {
    FaceSpec fit = fitter.fit(x_swap);
    auto fa = fit.normalized_attributes(), ta = targ_oracle.normalized_attributes();
    auto fi = fit.normalized_identity(), ti = targ_oracle.normalized_identity();
    AttributeErrors e;
    e.pose_err = std::fabs(fa[0] - ta[0]);
    e.expr_err = std::fabs(fa[1] - ta[1]);
    e.gaze_err = 0.5f * (std::fabs(fa[2] - ta[2]) + std::fabs(fa[3] - ta[3]));
    // geometry params: face_aspect, eye_spacing, nose_size, mouth_width
    double s = 0;
    for (int k : {1, 2, 4, 5}) s += double(fi[k] - ti[k]) * (fi[k] - ti[k]);
    e.shape_err = static_cast<float>(std::sqrt(s));
    return e;
}

EvalReport evaluate_suite(const std::vector<std::pair<RenderedFace, RenderedFace>>& pairs,
                          const EvalContext& ctx) {
    if (pairs.empty()) throw ParameterError("evaluate_suite: empty pair list");
    if (!ctx.denoiser || !ctx.train_sched || !ctx.experts || !ctx.eval_embedder || !ctx.fitter)
        throw ParameterError("evaluate_suite: incomplete context");

    EvalReport report;
    {
        std::ostringstream os;
        os << std::hex << std::hash<std::string>{}(ctx.swap_cfg.to_json().dump());
        report.config_fingerprint = os.str();
    }

    auto dist = embedding_cosine_distance(*ctx.eval_embedder);
    for (size_t i = 0; i < pairs.size(); ++i) {
        const RenderedFace& src = pairs[i].first;
        const RenderedFace& targ = pairs[i].second;
        EvalPairRecord rec;
        rec.index = static_cast<int>(i);
        try {
            SwapConfig cfg = ctx.swap_cfg;
            cfg.seed = ctx.swap_cfg.seed + i;
            SwapInputs in;
            in.x_src = src.image;
            in.x_targ = targ.image;
            in.targ_landmarks = {targ.left_eye_x, targ.left_eye_y, targ.right_eye_x, targ.right_eye_y};
            if (cfg.mask_source != MaskSource::Parser) in.mask = targ.face_mask;
            SwapResult sw = swap(in, *ctx.denoiser, *ctx.train_sched, *ctx.experts, cfg);

            rec.id_cosine = id_similarity(sw.x_swap, src.image, *ctx.eval_embedder);
            rec.id_relative = relative_distance(sw.x_swap, src.image, targ.image, dist);
            FaceSpec fit = ctx.fitter->fit(sw.x_swap);
            rec.oracle_dist_src = identity_param_distance(fit, src.spec);
            rec.oracle_dist_targ = identity_param_distance(fit, targ.spec);
            AttributeErrors ae = attribute_errors(sw.x_swap, targ.spec, *ctx.fitter);
            rec.pose_err = ae.pose_err;
            rec.expr_err = ae.expr_err;
            rec.gaze_err = ae.gaze_err;
            rec.shape_err = ae.shape_err;
            rec.mask_iou =
                mask_iou(extract_hard_mask(ctx.experts->parser->parse_face(targ.image)), targ.face_mask);
        } catch (const FaceswapError& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        report.pairs.push_back(std::move(rec));
    }

    auto aggregate = [&](const std::string& name, auto getter) {
        double sum = 0, sum2 = 0;
        int n = 0;
        for (const auto& r : report.pairs)
            if (!r.failed) {
                double v = getter(r);
                sum += v;
                sum2 += v * v;
                ++n;
            }
        EvalAggregate a;
        if (n > 0) {
            a.mean = sum / n;
            double var = sum2 / n - a.mean * a.mean;
            a.stddev = var > 0 ? std::sqrt(var) : 0.0;
        }
        report.aggregates[name] = a;
    };
    aggregate("id_cosine", [](const EvalPairRecord& r) { return r.id_cosine; });
    aggregate("id_relative", [](const EvalPairRecord& r) { return r.id_relative; });
    aggregate("oracle_dist_src", [](const EvalPairRecord& r) { return r.oracle_dist_src; });
    aggregate("oracle_dist_targ", [](const EvalPairRecord& r) { return r.oracle_dist_targ; });
    aggregate("pose_err", [](const EvalPairRecord& r) { return r.pose_err; });
    aggregate("expr_err", [](const EvalPairRecord& r) { return r.expr_err; });
    aggregate("gaze_err", [](const EvalPairRecord& r) { return r.gaze_err; });
    aggregate("shape_err", [](const EvalPairRecord& r) { return r.shape_err; });
    aggregate("mask_iou", [](const EvalPairRecord& r) { return r.mask_iou; });
    return report;
}

void write_eval_csv(const EvalReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open eval report file " + path);
    f << "index,failed,id_cosine,id_relative,oracle_dist_src,oracle_dist_targ,pose_err,expr_err,"
         "gaze_err,shape_err,mask_iou,error\n";
    for (const auto& r : report.pairs) {
        f << r.index << ',' << (r.failed ? 1 : 0) << ',' << r.id_cosine << ',' << r.id_relative << ','
          << r.oracle_dist_src << ',' << r.oracle_dist_targ << ',' << r.pose_err << ',' << r.expr_err
          << ',' << r.gaze_err << ',' << r.shape_err << ',' << r.mask_iou << ',' << '"' << r.error
          << '"' << '\n';
    }
}

std::string eval_summary(const EvalReport& report) {
    std::ostringstream os;
    int failed = 0;
    for (const auto& r : report.pairs) failed += r.failed;
    os << "pairs: " << report.pairs.size() << " (failed: " << failed << ")\n";
    os << "config fingerprint: " << report.config_fingerprint << "\n";
    for (const auto& [name, a] : report.aggregates)
        os << name << ": mean " << a.mean << " stddev " << a.stddev << "\n";
    return os.str();
}

}  // namespace faceswap
