// Command-line front end: gen-data, fit-experts, train, swap, sweep, eval.
//
// Exit codes:
//   0 success
//   2 configuration / parameter / shape error
//   3 I/O error
//   4 training failure
//   5 guidance failure
//   6 expert failure
//   7 numeric error
//   8 oracle unavailable
//   1 unexpected error

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "faceswap/config.hpp"
#include "faceswap/image_io.hpp"
#include "faceswap/metrics.hpp"
#include "faceswap/trainer.hpp"

namespace fs = std::filesystem;
using namespace faceswap;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // section.key=value
    std::string output_dir;
};

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = opts.config_path.empty() ? RunConfig() : RunConfig::from_file(opts.config_path);
    for (const auto& ov : opts.overrides) {
        size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + ov + "' must be key=value");
        cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (!opts.output_dir.empty()) cfg.set("global.output_dir", opts.output_dir);
    return cfg;
}

std::string output_dir(const RunConfig& cfg, const std::string& sub) {
    std::string root = cfg.get_str("global", "output_dir", "out");
    if (const char* env = std::getenv("FACESWAP_OUTPUT_ROOT")) root = env;
    fs::path dir = fs::path(root) / sub;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());
    return dir.string();
}

void dump_resolved(const RunConfig& cfg, const std::string& dir) {
    cfg.write_file((fs::path(dir) / "resolved_config.ini").string());
}

NoiseSchedule schedule_from_config(const RunConfig& cfg) {
    return make_schedule(schedule_kind_from_string(cfg.get_str("schedule", "kind", "linear")),
                         static_cast<int>(cfg.get_int("schedule", "steps", 1000)),
                         cfg.get_real("schedule", "beta_start", 1e-4),
                         cfg.get_real("schedule", "beta_end", 0.02));
}

nlohmann::json schedule_desc_from_config(const RunConfig& cfg) {
    return {{"kind", cfg.get_str("schedule", "kind", "linear")},
            {"steps", cfg.get_int("schedule", "steps", 1000)},
            {"beta_start", cfg.get_real("schedule", "beta_start", 1e-4)},
            {"beta_end", cfg.get_real("schedule", "beta_end", 0.02)}};
}

NoiseSchedule schedule_from_desc(const nlohmann::json& d) {
    return make_schedule(schedule_kind_from_string(d.at("kind")), d.at("steps"), d.at("beta_start"),
                         d.at("beta_end"));
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}
std::vector<float> parse_float_list(const std::string& s) {
    std::vector<float> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stof(tok));
    return out;
}

DenoiserConfig denoiser_config_from(const RunConfig& cfg, int default_size) {
    DenoiserConfig d;
    d.image_size = static_cast<int>(cfg.get_int("denoiser", "image_size", default_size));
    d.base_channels = static_cast<int>(cfg.get_int("denoiser", "base_channels", d.base_channels));
    d.channel_multipliers = parse_int_list(cfg.get_str("denoiser", "channel_multipliers", "1,2,2"));
    d.num_res_blocks = static_cast<int>(cfg.get_int("denoiser", "num_res_blocks", d.num_res_blocks));
    d.conditioning_dim = static_cast<int>(cfg.get_int("denoiser", "conditioning_dim", d.conditioning_dim));
    d.id_vector_dim = static_cast<int>(cfg.get_int("denoiser", "id_vector_dim", d.id_vector_dim));
    d.attention_at_bottom = cfg.get_bool("denoiser", "attention_at_bottom", d.attention_at_bottom);
    d.validate();
    return d;
}

ExpertSet load_experts(const std::string& dir) {
    ExpertSet set;
    set.embedder = embedder_from_checkpoint(load_checkpoint((fs::path(dir) / "embedder.ckpt").string()));
    set.parser = parser_from_checkpoint(load_checkpoint((fs::path(dir) / "parser.ckpt").string()));
    set.gaze = gaze_from_checkpoint(load_checkpoint((fs::path(dir) / "gaze.ckpt").string()));
    return set;
}

GuidanceConfig guidance_from_config(const RunConfig& cfg) {
    GuidanceConfig g;
    g.lambda_id = static_cast<float>(cfg.get_real("swap", "lambda_id", g.lambda_id));
    g.lambda_sem = static_cast<float>(cfg.get_real("swap", "lambda_sem", g.lambda_sem));
    g.lambda_gaze = static_cast<float>(cfg.get_real("swap", "lambda_gaze", g.lambda_gaze));
    g.num_augmentations = static_cast<int>(cfg.get_int("swap", "augmentations", g.num_augmentations));
    g.augmentation_seed = static_cast<uint64_t>(cfg.get_int("swap", "augmentation_seed", 7));
    return g;
}

SwapConfig swap_config_from(const RunConfig& cfg) {
    SwapConfig s;
    s.num_sample_steps = static_cast<int>(cfg.get_int("swap", "sample_steps", s.num_sample_steps));
    s.mask_threshold = static_cast<int>(cfg.get_int("swap", "mask_threshold", s.mask_threshold));
    s.guidance = guidance_from_config(cfg);
    s.seed = static_cast<uint64_t>(cfg.get_int("swap", "seed", 0));
    s.mask_source = mask_source_from_string(cfg.get_str("swap", "mask_source", "parser"));
    s.validate();
    return s;
}

// eye centers from the parser's argmax map (used when no oracle landmarks exist)
EyeLandmarks landmarks_from_parser(const FaceParser& parser, const Tensor& image) {
    Tensor probs = parser.parse_face(image);
    int H = probs.shape[1], W = probs.shape[2];
    double sx[2] = {0, 0}, sy[2] = {0, 0};
    int64_t n[2] = {0, 0};
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            for (int c = 1; c < kNumFaceClasses; ++c)
                if (probs.at(c, y, x) > probs.at(best, y, x)) best = c;
            if (best == kLeftEye || best == kRightEye) {
                int k = best == kLeftEye ? 0 : 1;
                sx[k] += x + 0.5;
                sy[k] += y + 0.5;
                ++n[k];
            }
        }
    if (!n[0] || !n[1])
        throw ExpertFailure("parser found no eye pixels in the target; pass --landmarks explicitly");
    return {static_cast<float>(sx[0] / n[0]), static_cast<float>(sy[0] / n[0]),
            static_cast<float>(sx[1] / n[1]), static_cast<float>(sy[1] / n[1])};
}

std::vector<std::pair<RenderedFace, RenderedFace>> make_pairs(const std::vector<RenderedFace>& dataset,
                                                              int n, uint64_t seed) {
    if (dataset.size() < 2) throw ParameterError("need at least 2 faces to form pairs");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
    std::vector<std::pair<RenderedFace, RenderedFace>> pairs;
    for (int i = 0; i < n; ++i) {
        size_t a = pick(rng), b = pick(rng);
        while (b == a) b = pick(rng);
        pairs.emplace_back(dataset[a], dataset[b]);
    }
    return pairs;
}

// ------------------------------------------------------------------ commands

int cmd_gen_data(const RunConfig& cfg) {
    int n = static_cast<int>(cfg.get_int("data", "count", 2000));
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("data", "seed", 7));
    int res = static_cast<int>(cfg.get_int("data", "resolution", 32));
    std::string dir = output_dir(cfg, cfg.get_str("data", "name", "dataset"));
    auto faces = sample_dataset(n, seed, res);
    export_dataset(faces, dir);
    dump_resolved(cfg, dir);
    std::cout << "wrote " << faces.size() << " faces at " << res << "x" << res << " to " << dir << "\n";
    return 0;
}

int cmd_fit_experts(const RunConfig& cfg) {
    std::string dataset_dir = cfg.get_str("experts", "dataset", "");
    if (dataset_dir.empty()) throw ConfigError("experts.dataset (dataset directory) is required");
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("experts", "seed", 11));
    std::string dir = output_dir(cfg, cfg.get_str("experts", "name", "experts"));

    auto dataset = import_dataset(dataset_dir);
    ExpertFitMetrics m;
    ExpertSet set = fit_toy_experts(dataset, seed, &m, &std::cout);
    save_checkpoint((fs::path(dir) / "embedder.ckpt").string(), make_expert_checkpoint(*set.embedder));
    save_checkpoint((fs::path(dir) / "parser.ckpt").string(), make_expert_checkpoint(*set.parser));
    save_checkpoint((fs::path(dir) / "gaze.ckpt").string(), make_expert_checkpoint(*set.gaze));

    // independently seeded embedder for cross-embedder evaluation
    EmbedderConfig ecfg;
    ecfg.base_channels = 12;
    ecfg.embed_dim = 48;
    ecfg.seed = seed + 1000;
    auto eval_embedder = fit_identity_embedder(dataset, ecfg, &std::cout);
    save_checkpoint((fs::path(dir) / "embedder_eval.ckpt").string(),
                    make_expert_checkpoint(*eval_embedder));

    std::ofstream mf(fs::path(dir) / "expert_metrics.csv");
    mf << "triplet_accuracy,mean_iou,gaze_mae\n"
       << m.triplet_accuracy << ',' << m.mean_iou << ',' << m.gaze_mae << '\n';
    dump_resolved(cfg, dir);
    std::cout << "triplet_accuracy=" << m.triplet_accuracy << " mean_iou=" << m.mean_iou
              << " gaze_mae=" << m.gaze_mae << "\nexperts written to " << dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    std::string dataset_dir = cfg.get_str("train", "dataset", "");
    if (dataset_dir.empty()) throw ConfigError("train.dataset (dataset directory) is required");
    std::string experts_dir = cfg.get_str("train", "experts", "");
    if (experts_dir.empty()) throw ConfigError("train.experts (experts directory) is required");
    std::string dir = output_dir(cfg, cfg.get_str("train", "name", "train"));

    TrainConfig tc;
    tc.batch_size = static_cast<int>(cfg.get_int("train", "batch_size", tc.batch_size));
    tc.learning_rate = static_cast<float>(cfg.get_real("train", "learning_rate", tc.learning_rate));
    tc.lambda_id = static_cast<float>(cfg.get_real("train", "lambda_id", tc.lambda_id));
    tc.total_steps = static_cast<int>(cfg.get_int("train", "total_steps", tc.total_steps));
    tc.seed = static_cast<uint64_t>(cfg.get_int("train", "seed", 0));
    tc.checkpoint_every = static_cast<int>(cfg.get_int("train", "checkpoint_every", tc.checkpoint_every));
    tc.id_loss_form = identity_loss_form_from_string(cfg.get_str("train", "id_loss_form", "cosine"));
    tc.validate();

    auto dataset = import_dataset(dataset_dir);
    auto embedder = embedder_from_checkpoint(
        load_checkpoint((fs::path(experts_dir) / "embedder.ckpt").string()));

    NoiseSchedule sched = schedule_from_config(cfg);
    nlohmann::json sched_desc = schedule_desc_from_config(cfg);

    std::unique_ptr<Denoiser> denoiser;
    nn::AdamW opt;
    int64_t start_step = 0;
    std::string resume = cfg.get_str("train", "resume", "");
    if (!resume.empty()) {
        Checkpoint c = load_checkpoint(resume);
        denoiser = denoiser_from_checkpoint(c, &opt);
        start_step = c.meta.at("step").get<int64_t>();
        std::cout << "resuming from step " << start_step << "\n";
    } else {
        DenoiserConfig dc = denoiser_config_from(cfg, dataset[0].image.shape[1]);
        dc.id_vector_dim = embedder->config().embed_dim;
        denoiser = std::make_unique<Denoiser>(dc, tc.seed + 17);
    }

    std::string ckpt_path = (fs::path(dir) / "denoiser.ckpt").string();
    TrainCallbacks cb;
    cb.on_step = [](int64_t step, const StepLosses& l) {
        if (step % 100 == 0)
            std::cout << "step " << step << " loss_noise " << l.loss_noise << " loss_id " << l.loss_id
                      << "\n";
    };
    cb.on_checkpoint = [&](int64_t step, const Denoiser& d, const nn::AdamW& o) {
        save_checkpoint(ckpt_path, make_denoiser_checkpoint(d, sched_desc, step, tc.seed, &o));
    };
    dump_resolved(cfg, dir);
    train(dataset, *denoiser, *embedder, sched, opt, tc, (fs::path(dir) / "loss.csv").string(),
          start_step, cb);
    std::cout << "denoiser checkpoint written to " << ckpt_path << "\n";
    return 0;
}

int cmd_swap(const RunConfig& cfg, const std::string& src_path, const std::string& targ_path,
             const std::string& landmarks_flag) {
    std::string denoiser_path = cfg.get_str("swap", "denoiser", "");
    if (denoiser_path.empty()) throw ConfigError("swap.denoiser (checkpoint path) is required");
    std::string experts_dir = cfg.get_str("swap", "experts", "");
    if (experts_dir.empty()) throw ConfigError("swap.experts (experts directory) is required");
    std::string dir = output_dir(cfg, cfg.get_str("swap", "name", "swap"));

    Checkpoint c = load_checkpoint(denoiser_path);
    auto denoiser = denoiser_from_checkpoint(c);
    denoiser->params().freeze();  // guidance needs input grads only
    NoiseSchedule sched = schedule_from_desc(c.meta.at("schedule"));
    ExpertSet experts = load_experts(experts_dir);

    SwapInputs in;
    in.x_src = read_ppm(src_path);
    in.x_targ = read_ppm(targ_path);
    if (!landmarks_flag.empty()) {
        auto v = parse_float_list(landmarks_flag);
        if (v.size() != 4) throw ParameterError("--landmarks expects lx,ly,rx,ry");
        in.targ_landmarks = {v[0], v[1], v[2], v[3]};
    } else {
        in.targ_landmarks = landmarks_from_parser(*experts.parser, in.x_targ);
    }
    SwapConfig sc = swap_config_from(cfg);
    if (sc.mask_source == MaskSource::User) {
        std::string mp = cfg.get_str("swap", "mask", "");
        if (mp.empty()) throw ConfigError("swap.mask (mask path) required for user mask source");
        in.mask = read_pgm(mp);
    } else if (sc.mask_source == MaskSource::Oracle) {
        throw ConfigError("oracle mask source is only available in eval/sweep (needs dataset masks)");
    }

    int dump_every = static_cast<int>(cfg.get_int("swap", "dump_every", 0));
    std::function<void(int, const Tensor&)> on_step;
    if (dump_every > 0)
        on_step = [&](int t, const Tensor& x) {
            if (t % dump_every == 0) {
                Tensor img = x;
                for (auto& v : img.data) v = std::clamp(v, -1.0f, 1.0f);
                char name[64];
                std::snprintf(name, sizeof(name), "step_%03d.ppm", t);
                write_ppm((fs::path(dir) / name).string(), img);
            }
        };

    SwapResult res = swap(in, *denoiser, sched, experts, sc, on_step);
    std::string out_path = (fs::path(dir) / "swap.ppm").string();
    write_ppm(out_path, res.x_swap);
    std::ofstream diag(fs::path(dir) / "guidance.csv");
    diag << "t,g_id,g_sem,g_gaze,grad_norm,mask_max\n";
    for (const auto& s : res.steps)
        diag << s.t << ',' << s.guidance.g_id << ',' << s.guidance.g_sem << ',' << s.guidance.g_gaze
             << ',' << s.guidance.grad_norm << ',' << s.mask_max << '\n';
    dump_resolved(cfg, dir);
    std::cout << "swap written to " << out_path << "\n";
    return 0;
}

EvalContext make_eval_context(const RunConfig& cfg, std::unique_ptr<Denoiser>& denoiser,
                              NoiseSchedule& sched, ExpertSet& experts,
                              std::shared_ptr<IdentityEmbedder>& eval_embedder,
                              std::unique_ptr<SpecFitter>& fitter, int resolution) {
    std::string denoiser_path = cfg.get_str("swap", "denoiser", "");
    if (denoiser_path.empty()) throw ConfigError("swap.denoiser (checkpoint path) is required");
    std::string experts_dir = cfg.get_str("swap", "experts", "");
    if (experts_dir.empty()) throw ConfigError("swap.experts (experts directory) is required");

    Checkpoint c = load_checkpoint(denoiser_path);
    denoiser = denoiser_from_checkpoint(c);
    denoiser->params().freeze();
    sched = schedule_from_desc(c.meta.at("schedule"));
    experts = load_experts(experts_dir);
    eval_embedder = embedder_from_checkpoint(
        load_checkpoint((fs::path(experts_dir) / "embedder_eval.ckpt").string()));
    fitter = std::make_unique<SpecFitter>(resolution,
                                          static_cast<int>(cfg.get_int("eval", "fitter_cache", 2048)),
                                          static_cast<uint64_t>(cfg.get_int("eval", "fitter_seed", 99)));

    EvalContext ctx;
    ctx.denoiser = denoiser.get();
    ctx.train_sched = &sched;
    ctx.experts = &experts;
    ctx.eval_embedder = eval_embedder.get();
    ctx.fitter = fitter.get();
    ctx.swap_cfg = swap_config_from(cfg);
    return ctx;
}

int cmd_eval(const RunConfig& cfg) {
    std::string dataset_dir = cfg.get_str("eval", "dataset", "");
    if (dataset_dir.empty()) throw ConfigError("eval.dataset (dataset directory) is required");
    int n = static_cast<int>(cfg.get_int("eval", "pairs", 50));
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("eval", "seed", 123));
    std::string dir = output_dir(cfg, cfg.get_str("eval", "name", "eval"));

    auto dataset = import_dataset(dataset_dir);
    auto pairs = make_pairs(dataset, n, seed);

    std::unique_ptr<Denoiser> denoiser;
    NoiseSchedule sched;
    ExpertSet experts;
    std::shared_ptr<IdentityEmbedder> eval_embedder;
    std::unique_ptr<SpecFitter> fitter;
    EvalContext ctx = make_eval_context(cfg, denoiser, sched, experts, eval_embedder, fitter,
                                        dataset[0].image.shape[1]);
    if (ctx.swap_cfg.mask_source == MaskSource::User)
        throw ConfigError("eval supports parser or oracle mask sources");

    EvalReport report = evaluate_suite(pairs, ctx);
    write_eval_csv(report, (fs::path(dir) / "report.csv").string());
    std::string summary = eval_summary(report);
    std::ofstream sf(fs::path(dir) / "summary.txt");
    sf << summary;
    dump_resolved(cfg, dir);
    std::cout << summary;
    return 0;
}

int cmd_sweep(const RunConfig& cfg) {
    std::string dataset_dir = cfg.get_str("sweep", "dataset", "");
    if (dataset_dir.empty()) throw ConfigError("sweep.dataset (dataset directory) is required");
    auto t_hats = parse_int_list(cfg.get_str("sweep", "mask_thresholds", "15,40,65"));
    auto lambda_sems = parse_float_list(cfg.get_str("sweep", "lambda_sems", "150"));
    auto lambda_gazes = parse_float_list(
        cfg.get_str("sweep", "lambda_gazes", cfg.get_str("swap", "lambda_gaze", "200")));
    if (t_hats.empty() || lambda_sems.empty() || lambda_gazes.empty())
        throw ConfigError("sweep grid must be non-empty");
    int n = static_cast<int>(cfg.get_int("sweep", "pairs", 10));
    uint64_t seed = static_cast<uint64_t>(cfg.get_int("sweep", "seed", 123));
    std::string dir = output_dir(cfg, cfg.get_str("sweep", "name", "sweep"));

    auto dataset = import_dataset(dataset_dir);
    auto pairs = make_pairs(dataset, n, seed);

    std::unique_ptr<Denoiser> denoiser;
    NoiseSchedule sched;
    ExpertSet experts;
    std::shared_ptr<IdentityEmbedder> eval_embedder;
    std::unique_ptr<SpecFitter> fitter;
    EvalContext ctx = make_eval_context(cfg, denoiser, sched, experts, eval_embedder, fitter,
                                        dataset[0].image.shape[1]);

    std::ofstream out(fs::path(dir) / "sweep.csv");
    out << "mask_threshold,lambda_sem,lambda_gaze,id_cosine,id_relative,oracle_dist_src,pose_err,"
           "expr_err,gaze_err,shape_err,failures\n";
    int cell = 0;
    for (int th : t_hats)
        for (float ls : lambda_sems)
            for (float lg : lambda_gazes) {
                EvalContext cell_ctx = ctx;
                cell_ctx.swap_cfg.mask_threshold = th;
                cell_ctx.swap_cfg.guidance.lambda_sem = ls;
                cell_ctx.swap_cfg.guidance.lambda_gaze = lg;
                cell_ctx.swap_cfg.seed = seed + 1000 * static_cast<uint64_t>(++cell);
                try {
                    EvalReport r = evaluate_suite(pairs, cell_ctx);
                    int failures = 0;
                    for (const auto& p : r.pairs) failures += p.failed;
                    out << th << ',' << ls << ',' << lg << ',' << r.aggregates["id_cosine"].mean << ','
                        << r.aggregates["id_relative"].mean << ','
                        << r.aggregates["oracle_dist_src"].mean << ',' << r.aggregates["pose_err"].mean
                        << ',' << r.aggregates["expr_err"].mean << ',' << r.aggregates["gaze_err"].mean
                        << ',' << r.aggregates["shape_err"].mean << ',' << failures << '\n';
                } catch (const FaceswapError& e) {
                    std::cerr << "sweep cell (" << th << "," << ls << "," << lg << ") failed: "
                              << e.what() << "\n";
                    out << th << ',' << ls << ',' << lg << ",,,,,,,," << n << '\n';
                }
                out.flush();
            }
    dump_resolved(cfg, dir);
    std::cout << "sweep table written to " << (fs::path(dir) / "sweep.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion face swapping on synthetic faces"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string src_path, targ_path, landmarks_flag;
    for (auto* name : {"gen-data", "fit-experts", "train", "swap", "sweep", "eval"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "INI config file");
        sub->add_option("--set", opts.overrides, "override: section.key=value")->take_all();
        sub->add_option("--output-dir", opts.output_dir, "output root directory");
        if (std::string(name) == "swap") {
            sub->add_option("source", src_path, "source image (PPM)")->required();
            sub->add_option("target", targ_path, "target image (PPM)")->required();
            sub->add_option("--landmarks", landmarks_flag, "target eye centers lx,ly,rx,ry");
        }
    }

    try {
        app.parse(argc, argv);
        RunConfig cfg = resolve_config(opts);
        if (app.got_subcommand("gen-data")) return cmd_gen_data(cfg);
        if (app.got_subcommand("fit-experts")) return cmd_fit_experts(cfg);
        if (app.got_subcommand("train")) return cmd_train(cfg);
        if (app.got_subcommand("swap")) return cmd_swap(cfg, src_path, targ_path, landmarks_flag);
        if (app.got_subcommand("sweep")) return cmd_sweep(cfg);
        if (app.got_subcommand("eval")) return cmd_eval(cfg);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingFailure& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return 4;
    } catch (const GuidanceFailure& e) {
        std::cerr << "guidance failure: " << e.what() << "\n";
        return 5;
    } catch (const ExpertFailure& e) {
        std::cerr << "expert failure: " << e.what() << "\n";
        return 6;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 7;
    } catch (const OracleUnavailable& e) {
        std::cerr << "oracle unavailable: " << e.what() << "\n";
        return 8;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
