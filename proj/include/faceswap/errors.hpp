#ifndef FACESWAP_ERRORS_HPP
#define FACESWAP_ERRORS_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace faceswap {

// Error taxonomy shared by all modules. The CLI maps these to exit codes.
struct FaceswapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct ShapeError : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct ConfigError : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct NumericError : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct IoError : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct ExpertFailure : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct TrainingFailure : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct GuidanceFailure : FaceswapError {
    using FaceswapError::FaceswapError;
};
struct OracleUnavailable : FaceswapError {
    using FaceswapError::FaceswapError;
};

}  // namespace faceswap

#endif
