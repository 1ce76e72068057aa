#ifndef FACESWAP_CHECKPOINT_HPP
#define FACESWAP_CHECKPOINT_HPP

#include <map>
#include <string>

#include <json.hpp>

#include "faceswap/tensor.hpp"

namespace faceswap {

// Self-describing binary container: magic + format version, a JSON header
// (kind tag, config record, step counter, seed), then named float32 arrays.
struct Checkpoint {
    std::string kind;
    nlohmann::json meta;
    std::map<std::string, Tensor> arrays;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace faceswap

#endif
