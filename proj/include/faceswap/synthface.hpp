#ifndef FACESWAP_SYNTHFACE_HPP
#define FACESWAP_SYNTHFACE_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "faceswap/tensor.hpp"

namespace faceswap {

// Semantic classes emitted by the renderer (and predicted by the toy parser).
enum FaceClass : int {
    kBackground = 0,
    kSkin = 1,
    kLeftEye = 2,
    kRightEye = 3,
    kLeftBrow = 4,
    kRightBrow = 5,
    kNose = 6,
    kUpperLip = 7,
    kLowerLip = 8,
    kMouthInterior = 9,
    kHair = 10,
};
inline constexpr int kNumFaceClasses = 11;
// classes that form the facial hard mask (hair and background excluded)
inline constexpr std::array<int, 8> kFacialMaskClasses = {kSkin,     kLeftEye,  kRightEye, kLeftBrow,
                                                          kRightBrow, kNose,     kUpperLip, kLowerLip};
// mouth interior also counts as face for the oracle mask
inline bool is_facial_class(int c) { return c >= kSkin && c <= kMouthInterior; }

// Ground-truth parameter record for one synthetic face. The first six
// fields define WHO (identity); the rest define HOW (attributes).
struct FaceSpec {
    // identity
    float skin_tone = 0.5f;      // [0,1]
    float face_aspect = 0.85f;   // [0.70,1.00] horizontal/vertical radius ratio
    float eye_spacing = 0.36f;   // [0.28,0.44] eye offset as fraction of face half-width
    int eye_color = 0;           // {0,1,2}
    float nose_size = 0.10f;     // [0.06,0.14]
    float mouth_width = 0.28f;   // [0.18,0.38]
    // attributes
    float yaw_deg = 0.0f;        // [-30,30]
    float expression = 0.0f;     // [-1,1] mouth curve
    float gaze_x = 0.0f;         // [-1,1]
    float gaze_y = 0.0f;         // [-1,1]
    int background = 0;          // {0..3}

    uint64_t seed = 0;

    void validate() const;
    // identity params mapped to [0,1] by their documented ranges
    std::array<float, 6> normalized_identity() const;
    std::array<float, 4> normalized_attributes() const;  // yaw, expression, gaze x/y
};

struct RenderedFace {
    Tensor image;                    // {3,H,W}, values in [-1,1]
    Tensor face_mask;                // {1,H,W}, binary (facial classes, no hair/background)
    std::vector<int> labels;         // per-pixel FaceClass, H*W
    float left_eye_x = 0, left_eye_y = 0;    // continuous pixel coordinates
    float right_eye_x = 0, right_eye_y = 0;
    float gaze_x = 0, gaze_y = 0;    // ground truth (copied from spec)
    FaceSpec spec;
};

// Deterministic anti-aliased rasterization; identical specs yield
// bit-identical images.
RenderedFace render_face(const FaceSpec& spec, int resolution, int supersample = 4);

FaceSpec sample_spec(std::mt19937_64& rng);
std::vector<RenderedFace> sample_dataset(int n, uint64_t seed, int resolution);

// Euclidean distance in normalized identity-parameter space.
float identity_param_distance(const FaceSpec& a, const FaceSpec& b);

// Recovers a FaceSpec from an image by nearest neighbour over a cached set
// of rendered specs followed by local coordinate descent on pixel error.
class SpecFitter {
public:
    SpecFitter(int resolution, int cache_size = 2048, uint64_t seed = 99,
               float residual_threshold = 0.15f);

    // Throws OracleUnavailable when the refined pixel RMS residual (image
    // range normalized to [0,1]) exceeds the threshold.
    FaceSpec fit(const Tensor& image) const;
    float last_residual() const { return last_residual_; }

    float residual_threshold() const { return residual_threshold_; }
    int resolution() const { return resolution_; }

private:
    float rms(const Tensor& a, const Tensor& b) const;
    int resolution_;
    float residual_threshold_;
    std::vector<FaceSpec> cache_specs_;
    std::vector<Tensor> cache_images_;
    mutable float last_residual_ = 0.0f;
};

// Oracle identity distance between two images (specs recovered by fitting).
float oracle_identity_distance(const Tensor& a, const Tensor& b, const SpecFitter& fitter);
float oracle_identity_distance(const FaceSpec& a, const FaceSpec& b);

// --- dataset export / import ---
struct DatasetPaths {
    std::string directory;
    std::string metadata_csv() const { return directory + "/metadata.csv"; }
};
void export_dataset(const std::vector<RenderedFace>& faces, const std::string& directory);
std::vector<RenderedFace> import_dataset(const std::string& directory);

}  // namespace faceswap

#endif
