#include "faceswap/checkpoint.hpp"

#include <fstream>

namespace faceswap {

static constexpr char kMagic[8] = {'F', 'S', 'W', 'C', 'K', 'P', 'T', '\0'};

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    nlohmann::json header;
    header["kind"] = c.kind;
    header["meta"] = c.meta;
    auto arrays = nlohmann::json::array();
    for (const auto& [name, t] : c.arrays) arrays.push_back({{"name", name}, {"shape", t.shape}});
    header["arrays"] = arrays;
    std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint for write: " + path);
    f.write(kMagic, 8);
    uint32_t ver = kCheckpointVersion;
    f.write(reinterpret_cast<const char*>(&ver), 4);
    uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : c.arrays)
        f.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
    if (!f) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint not found: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 7) != std::string(kMagic, 7)) throw IoError("corrupt checkpoint (bad magic): " + path);
    uint32_t ver;
    f.read(reinterpret_cast<char*>(&ver), 4);
    if (!f || ver != kCheckpointVersion)
        throw ConfigError("checkpoint format version mismatch in " + path + " (got " + std::to_string(ver) + ")");
    uint64_t hlen;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    if (!f || hlen > (1ull << 30)) throw IoError("corrupt checkpoint (bad header length): " + path);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw IoError("corrupt checkpoint (truncated header): " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception&) {
        throw IoError("corrupt checkpoint (bad header json): " + path);
    }
    Checkpoint c;
    c.kind = header.value("kind", "");
    c.meta = header.value("meta", nlohmann::json::object());
    for (const auto& a : header["arrays"]) {
        std::string name = a["name"];
        std::vector<int> shape = a["shape"].get<std::vector<int>>();
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
        if (!f) throw IoError("corrupt checkpoint (truncated payload): " + path);
        c.arrays[name] = std::move(t);
    }
    return c;
}

}  // namespace faceswap
