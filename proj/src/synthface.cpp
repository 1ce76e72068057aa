#include "faceswap/synthface.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "faceswap/image_io.hpp"

namespace faceswap {

namespace {

struct Rgb {
    float r, g, b;
};
inline Rgb lerp(const Rgb& a, const Rgb& b, float t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

constexpr Rgb kBackgrounds[4] = {{0.75f, 0.85f, 0.95f}, {0.55f, 0.75f, 0.55f}, {0.85f, 0.75f, 0.55f}, {0.35f, 0.35f, 0.45f}};
constexpr Rgb kSkinLight = {0.98f, 0.87f, 0.77f};
constexpr Rgb kSkinDark = {0.45f, 0.30f, 0.18f};
constexpr Rgb kHairColor = {0.10f, 0.08f, 0.06f};
constexpr Rgb kBrowColor = {0.15f, 0.10f, 0.08f};
constexpr Rgb kSclera = {0.97f, 0.97f, 0.97f};
constexpr Rgb kIrisColors[3] = {{0.35f, 0.20f, 0.05f}, {0.15f, 0.40f, 0.80f}, {0.10f, 0.55f, 0.30f}};
constexpr Rgb kLipBase = {0.65f, 0.25f, 0.25f};
constexpr Rgb kMouthInteriorColor = {0.20f, 0.08f, 0.08f};

// geometry constants, normalized [0,1] image coordinates
constexpr float kFaceCx = 0.5f, kFaceCy = 0.53f, kFaceRy = 0.36f;
constexpr float kEyeY = 0.43f, kEyeRx = 0.075f, kEyeRy = 0.05f, kIrisR = 0.03f;
constexpr float kBrowY = 0.355f, kBrowHw = 0.075f, kBrowHh = 0.012f;
constexpr float kMouthY = 0.70f, kLipT = 0.022f, kMouthGap = 0.03f, kCurveAmp = 0.035f;

// Iris offset is a documented invertible function of the gaze vector:
//   offset = (gaze_x * kGazeOffX, gaze_y * kGazeOffY)
constexpr float kGazeOffX = kEyeRx - kIrisR - 0.005f;  // 0.04
constexpr float kGazeOffY = kEyeRy - kIrisR;           // 0.02

struct FaceGeometry {
    float rx_eff, eye_off, dx_feat, dx_nose;
    Rgb skin, nose_col, lip_col;
    float lex, ley, rex, rey;  // eye centers (normalized)
};

FaceGeometry geometry_of(const FaceSpec& s) {
    FaceGeometry g;
    float yaw = s.yaw_deg * static_cast<float>(M_PI) / 180.0f;
    float sy = std::sin(yaw), cy = std::cos(yaw);
    g.rx_eff = kFaceRy * s.face_aspect * (0.85f + 0.15f * cy);
    g.dx_feat = 0.06f * sy;
    g.dx_nose = 0.10f * sy;
    g.eye_off = s.eye_spacing * g.rx_eff * cy / 0.36f * 0.36f;
    g.skin = lerp(kSkinLight, kSkinDark, s.skin_tone);
    g.nose_col = {g.skin.r * 0.82f, g.skin.g * 0.82f, g.skin.b * 0.82f};
    g.lip_col = lerp(kLipBase, g.skin, 0.3f);
    g.lex = kFaceCx - g.eye_off + g.dx_feat;
    g.rex = kFaceCx + g.eye_off + g.dx_feat;
    g.ley = g.rey = kEyeY;
    return g;
}

inline bool in_ellipse(float u, float v, float cx, float cy, float rx, float ry) {
    float du = (u - cx) / rx, dv = (v - cy) / ry;
    return du * du + dv * dv <= 1.0f;
}

// Classifies one sample point; returns the semantic label and its color.
std::pair<int, Rgb> classify(float u, float v, const FaceSpec& s, const FaceGeometry& g) {
    if (in_ellipse(u, v, kFaceCx, kFaceCy, g.rx_eff, kFaceRy)) {
        // brows
        for (int side = 0; side < 2; ++side) {
            float ex = side == 0 ? g.lex : g.rex;
            if (std::fabs(u - ex) <= kBrowHw && std::fabs(v - kBrowY) <= kBrowHh)
                return {side == 0 ? kLeftBrow : kRightBrow, kBrowColor};
        }
        // eyes
        for (int side = 0; side < 2; ++side) {
            float ex = side == 0 ? g.lex : g.rex;
            if (in_ellipse(u, v, ex, kEyeY, kEyeRx, kEyeRy)) {
                float ix = ex + s.gaze_x * kGazeOffX, iy = kEyeY + s.gaze_y * kGazeOffY;
                float du = u - ix, dv = v - iy;
                bool iris = du * du + dv * dv <= kIrisR * kIrisR;
                return {side == 0 ? kLeftEye : kRightEye, iris ? kIrisColors[s.eye_color] : kSclera};
            }
        }
        // mouth
        float xm = kFaceCx + g.dx_feat;
        float halfw = s.mouth_width * g.rx_eff;
        float xi = (u - xm) / halfw;
        if (std::fabs(xi) <= 1.0f) {
            float ycurve = kMouthY - s.expression * kCurveAmp * (1.0f - xi * xi);
            if (v >= ycurve - kLipT && v < ycurve) return {kUpperLip, g.lip_col};
            if (v >= ycurve && v < ycurve + kMouthGap) return {kMouthInterior, kMouthInteriorColor};
            if (v >= ycurve + kMouthGap && v < ycurve + kMouthGap + kLipT) return {kLowerLip, g.lip_col};
        }
        // nose
        float xn = kFaceCx + g.dx_nose;
        float len = s.nose_size * 1.2f;
        if (v >= 0.48f && v <= 0.48f + len) {
            float hw = (v - 0.48f) / len * s.nose_size * 0.45f / 0.14f * 0.14f;
            if (std::fabs(u - xn) <= hw) return {kNose, g.nose_col};
        }
        return {kSkin, g.skin};
    }
    if (in_ellipse(u, v, kFaceCx, 0.50f, g.rx_eff + 0.05f, kFaceRy + 0.06f)) return {kHair, kHairColor};
    return {kBackground, kBackgrounds[s.background]};
}

void check_range(float v, float lo, float hi, const char* what) {
    if (!(v >= lo && v <= hi)) throw ParameterError(std::string(what) + " out of range");
}

}  // namespace

void FaceSpec::validate() const {
    check_range(skin_tone, 0, 1, "skin_tone");
    check_range(face_aspect, 0.70f, 1.00f, "face_aspect");
    check_range(eye_spacing, 0.28f, 0.44f, "eye_spacing");
    if (eye_color < 0 || eye_color > 2) throw ParameterError("eye_color out of range");
    check_range(nose_size, 0.06f, 0.14f, "nose_size");
    check_range(mouth_width, 0.18f, 0.38f, "mouth_width");
    check_range(yaw_deg, -30, 30, "yaw_deg");
    check_range(expression, -1, 1, "expression");
    check_range(gaze_x, -1, 1, "gaze_x");
    check_range(gaze_y, -1, 1, "gaze_y");
    if (background < 0 || background > 3) throw ParameterError("background out of range");
}

std::array<float, 6> FaceSpec::normalized_identity() const {
    return {skin_tone,
            (face_aspect - 0.70f) / 0.30f,
            (eye_spacing - 0.28f) / 0.16f,
            eye_color / 2.0f,
            (nose_size - 0.06f) / 0.08f,
            (mouth_width - 0.18f) / 0.20f};
}

std::array<float, 4> FaceSpec::normalized_attributes() const {
    return {(yaw_deg + 30.0f) / 60.0f, (expression + 1.0f) / 2.0f, (gaze_x + 1.0f) / 2.0f, (gaze_y + 1.0f) / 2.0f};
}

RenderedFace render_face(const FaceSpec& spec, int resolution, int supersample) {
    spec.validate();
    if (resolution < 8 || supersample < 1) throw ParameterError("render_face: bad resolution/supersample");
    FaceGeometry g = geometry_of(spec);
    int R = resolution, ss = supersample;
    RenderedFace out;
    out.spec = spec;
    out.image = Tensor({3, R, R});
    out.face_mask = Tensor({1, R, R});
    out.labels.assign(static_cast<size_t>(R) * R, 0);
    std::array<int, kNumFaceClasses> counts{};
    for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
            counts.fill(0);
            float ar = 0, ag = 0, ab = 0;
            for (int a = 0; a < ss; ++a)
                for (int b = 0; b < ss; ++b) {
                    float u = (x + (b + 0.5f) / ss) / R;
                    float v = (y + (a + 0.5f) / ss) / R;
                    auto [label, col] = classify(u, v, spec, g);
                    ++counts[label];
                    ar += col.r;
                    ag += col.g;
                    ab += col.b;
                }
            float inv = 1.0f / (ss * ss);
            out.image.at(0, y, x) = ar * inv * 2.0f - 1.0f;
            out.image.at(1, y, x) = ag * inv * 2.0f - 1.0f;
            out.image.at(2, y, x) = ab * inv * 2.0f - 1.0f;
            int best = 0;
            for (int c = 1; c < kNumFaceClasses; ++c)
                if (counts[c] > counts[best]) best = c;
            out.labels[static_cast<size_t>(y) * R + x] = best;
            out.face_mask.at(0, y, x) = is_facial_class(best) ? 1.0f : 0.0f;
        }
    out.left_eye_x = g.lex * R;
    out.left_eye_y = g.ley * R;
    out.right_eye_x = g.rex * R;
    out.right_eye_y = g.rey * R;
    out.gaze_x = spec.gaze_x;
    out.gaze_y = spec.gaze_y;
    return out;
}

FaceSpec sample_spec(std::mt19937_64& rng) {
    auto uni = [&](float lo, float hi) {
        return std::uniform_real_distribution<float>(lo, hi)(rng);
    };
    FaceSpec s;
    s.skin_tone = uni(0, 1);
    s.face_aspect = uni(0.70f, 1.00f);
    s.eye_spacing = uni(0.28f, 0.44f);
    s.eye_color = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
    s.nose_size = uni(0.06f, 0.14f);
    s.mouth_width = uni(0.18f, 0.38f);
    s.yaw_deg = uni(-30, 30);
    s.expression = uni(-1, 1);
    s.gaze_x = uni(-1, 1);
    s.gaze_y = uni(-1, 1);
    s.background = static_cast<int>(std::uniform_int_distribution<int>(0, 3)(rng));
    return s;
}

std::vector<RenderedFace> sample_dataset(int n, uint64_t seed, int resolution) {
    if (n < 1) throw ParameterError("sample_dataset: n must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<RenderedFace> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        FaceSpec s = sample_spec(rng);
        s.seed = seed;
        out.push_back(render_face(s, resolution));
    }
    return out;
}

float identity_param_distance(const FaceSpec& a, const FaceSpec& b) {
    auto na = a.normalized_identity(), nb = b.normalized_identity();
    float ss = 0;
    for (size_t i = 0; i < na.size(); ++i) {
        float d = na[i] - nb[i];
        ss += d * d;
    }
    return std::sqrt(ss);
}

float oracle_identity_distance(const FaceSpec& a, const FaceSpec& b) { return identity_param_distance(a, b); }

// ------------------------------------------------------------------- fitting

SpecFitter::SpecFitter(int resolution, int cache_size, uint64_t seed, float residual_threshold)
    : resolution_(resolution), residual_threshold_(residual_threshold) {
    std::mt19937_64 rng(seed);
    cache_specs_.reserve(static_cast<size_t>(cache_size));
    cache_images_.reserve(static_cast<size_t>(cache_size));
    for (int i = 0; i < cache_size; ++i) {
        FaceSpec s = sample_spec(rng);
        cache_specs_.push_back(s);
        cache_images_.push_back(render_face(s, resolution).image);
    }
}

float SpecFitter::rms(const Tensor& a, const Tensor& b) const {
    double ss = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = a.data[i] - b.data[i];
        ss += d * d;
    }
    // normalize the [-1,1] pixel range to [0,1]
    return static_cast<float>(std::sqrt(ss / a.numel()) / 2.0);
}

FaceSpec SpecFitter::fit(const Tensor& image) const {
    if (image.shape != std::vector<int>{3, resolution_, resolution_})
        throw ShapeError("SpecFitter::fit: image resolution mismatch");
    // seed the local search from the closest cached renders
    const size_t num_seeds = std::min<size_t>(3, cache_images_.size());
    std::vector<std::pair<float, size_t>> ranked(cache_images_.size());
    for (size_t i = 0; i < cache_images_.size(); ++i) ranked[i] = {rms(cache_images_[i], image), i};
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(num_seeds), ranked.end());

    struct ParamRef {
        float FaceSpec::*field;
        float lo, hi;
    };
    static const ParamRef kParams[] = {
        {&FaceSpec::skin_tone, 0, 1},          {&FaceSpec::face_aspect, 0.70f, 1.00f},
        {&FaceSpec::eye_spacing, 0.28f, 0.44f}, {&FaceSpec::nose_size, 0.06f, 0.14f},
        {&FaceSpec::mouth_width, 0.18f, 0.38f}, {&FaceSpec::yaw_deg, -30, 30},
        {&FaceSpec::expression, -1, 1},         {&FaceSpec::gaze_x, -1, 1},
        {&FaceSpec::gaze_y, -1, 1},
    };
    auto eval = [&](const FaceSpec& s) { return rms(render_face(s, resolution_).image, image); };

    FaceSpec best_spec = cache_specs_[ranked[0].second];
    float best_err = std::numeric_limits<float>::max();
    for (size_t si = 0; si < num_seeds; ++si) {
        FaceSpec cur = cache_specs_[ranked[si].second];
        float cur_err = eval(cur);
        const int rounds = 6;
        for (int r = 0; r < rounds; ++r) {
            float frac = 0.3f / (1 << r);
            for (const auto& p : kParams) {
                float step = frac * (p.hi - p.lo);
                for (float sgn : {-1.0f, 1.0f}) {
                    // keep stepping in an improving direction
                    for (int k = 0; k < 8; ++k) {
                        FaceSpec trial = cur;
                        trial.*(p.field) = std::min(p.hi, std::max(p.lo, cur.*(p.field) + sgn * step));
                        float e = eval(trial);
                        if (e >= cur_err || trial.*(p.field) == cur.*(p.field)) break;
                        cur_err = e;
                        cur = trial;
                    }
                }
            }
            for (int ec = 0; ec < 3; ++ec) {
                FaceSpec trial = cur;
                trial.eye_color = ec;
                float e = eval(trial);
                if (e < cur_err) {
                    cur_err = e;
                    cur = trial;
                }
            }
            for (int bg = 0; bg < 4; ++bg) {
                FaceSpec trial = cur;
                trial.background = bg;
                float e = eval(trial);
                if (e < cur_err) {
                    cur_err = e;
                    cur = trial;
                }
            }
        }
        if (cur_err < best_err) {
            best_err = cur_err;
            best_spec = cur;
        }
    }
    FaceSpec cur = best_spec;
    float cur_err = best_err;
    last_residual_ = cur_err;
    if (cur_err > residual_threshold_)
        throw OracleUnavailable("spec fit residual " + std::to_string(cur_err) + " above threshold " +
                                std::to_string(residual_threshold_));
    return cur;
}

float oracle_identity_distance(const Tensor& a, const Tensor& b, const SpecFitter& fitter) {
    return identity_param_distance(fitter.fit(a), fitter.fit(b));
}

// -------------------------------------------------------------------- export

namespace {

void write_labels_pgm(const std::string& path, const std::vector<int>& labels, int R) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << R << " " << R << "\n255\n";
    for (int i = 0; i < R * R; ++i) f.put(static_cast<char>(labels[static_cast<size_t>(i)]));
    if (!f) throw IoError("write failed: " + path);
}

std::vector<int> read_labels_pgm(const std::string& path, int& R) {
    Tensor t = read_pgm(path);
    R = t.shape[1];
    std::vector<int> labels(static_cast<size_t>(R) * R);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(std::lround(t.data[i] * 255.0f));
    return labels;
}

std::string fmt_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void export_dataset(const std::vector<RenderedFace>& faces, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("cannot create dataset directory: " + directory);
    std::ofstream csv(directory + "/metadata.csv");
    if (!csv) throw IoError("cannot write metadata.csv in " + directory);
    csv << "index,image,mask,labels,skin_tone,face_aspect,eye_spacing,eye_color,nose_size,mouth_width,"
           "yaw_deg,expression,gaze_x,gaze_y,background,seed,left_eye_x,left_eye_y,right_eye_x,right_eye_y\n";
    char name[64];
    for (size_t i = 0; i < faces.size(); ++i) {
        const auto& f = faces[i];
        std::snprintf(name, sizeof name, "face_%05zu.ppm", i);
        std::string img = name;
        std::snprintf(name, sizeof name, "mask_%05zu.pgm", i);
        std::string msk = name;
        std::snprintf(name, sizeof name, "labels_%05zu.pgm", i);
        std::string lbl = name;
        write_ppm(directory + "/" + img, f.image);
        write_pgm(directory + "/" + msk, f.face_mask);
        write_labels_pgm(directory + "/" + lbl, f.labels, f.image.shape[1]);
        const auto& s = f.spec;
        csv << i << ',' << img << ',' << msk << ',' << lbl << ',' << fmt_float(s.skin_tone) << ','
            << fmt_float(s.face_aspect) << ',' << fmt_float(s.eye_spacing) << ',' << s.eye_color << ','
            << fmt_float(s.nose_size) << ',' << fmt_float(s.mouth_width) << ',' << fmt_float(s.yaw_deg) << ','
            << fmt_float(s.expression) << ',' << fmt_float(s.gaze_x) << ',' << fmt_float(s.gaze_y) << ','
            << s.background << ',' << s.seed << ',' << fmt_float(f.left_eye_x) << ',' << fmt_float(f.left_eye_y)
            << ',' << fmt_float(f.right_eye_x) << ',' << fmt_float(f.right_eye_y) << '\n';
    }
    if (!csv) throw IoError("metadata write failed in " + directory);
}

std::vector<RenderedFace> import_dataset(const std::string& directory) {
    std::ifstream csv(directory + "/metadata.csv");
    if (!csv) throw IoError("cannot open metadata.csv in " + directory);
    std::string line;
    std::getline(csv, line);  // header
    std::vector<RenderedFace> out;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 20) throw IoError("malformed metadata row: " + line);
        RenderedFace f;
        f.image = read_ppm(directory + "/" + cells[1]);
        f.face_mask = read_pgm(directory + "/" + cells[2]);
        int R;
        f.labels = read_labels_pgm(directory + "/" + cells[3], R);
        auto& s = f.spec;
        s.skin_tone = std::stof(cells[4]);
        s.face_aspect = std::stof(cells[5]);
        s.eye_spacing = std::stof(cells[6]);
        s.eye_color = std::stoi(cells[7]);
        s.nose_size = std::stof(cells[8]);
        s.mouth_width = std::stof(cells[9]);
        s.yaw_deg = std::stof(cells[10]);
        s.expression = std::stof(cells[11]);
        s.gaze_x = std::stof(cells[12]);
        s.gaze_y = std::stof(cells[13]);
        s.background = std::stoi(cells[14]);
        s.seed = std::stoull(cells[15]);
        f.left_eye_x = std::stof(cells[16]);
        f.left_eye_y = std::stof(cells[17]);
        f.right_eye_x = std::stof(cells[18]);
        f.right_eye_y = std::stof(cells[19]);
        f.gaze_x = s.gaze_x;
        f.gaze_y = s.gaze_y;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace faceswap
