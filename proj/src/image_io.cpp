#include "faceswap/image_io.hpp"

#include <cmath>
#include <fstream>

namespace faceswap {

static uint8_t quantize(float v, float lo, float hi) {
    float u = (v - lo) / (hi - lo);
    u = std::min(std::max(u, 0.0f), 1.0f);
    return static_cast<uint8_t>(std::lround(u * 255.0f));
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.shape.size() != 3 || image.shape[0] != 3) throw ShapeError("write_ppm: need {3,H,W}");
    int H = image.shape[1], W = image.shape[2];
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P6\n" << W << " " << H << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(W) * 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<size_t>(x) * 3 + c] = quantize(image.at(c, y, x), -1.0f, 1.0f);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed: " + path);
}

static void read_header(std::ifstream& f, const std::string& path, const char* magic, int& w, int& h) {
    std::string m;
    f >> m;
    if (m != magic) throw IoError("bad magic in " + path);
    int maxval;
    f >> w >> h >> maxval;
    if (!f || maxval != 255 || w <= 0 || h <= 0) throw IoError("bad header in " + path);
    f.get();  // single whitespace before payload
}

Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    int W, H;
    read_header(f, path, "P6", W, H);
    std::vector<uint8_t> buf(static_cast<size_t>(W) * H * 3);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("truncated ppm: " + path);
    Tensor t({3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                t.at(c, y, x) = buf[(static_cast<size_t>(y) * W + x) * 3 + c] / 255.0f * 2.0f - 1.0f;
    return t;
}

void write_pgm(const std::string& path, const Tensor& mask) {
    if (mask.shape.size() != 3 || mask.shape[0] != 1) throw ShapeError("write_pgm: need {1,H,W}");
    int H = mask.shape[1], W = mask.shape[2];
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << W << " " << H << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(W));
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) row[static_cast<size_t>(x)] = quantize(mask.at(0, y, x), 0.0f, 1.0f);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed: " + path);
}

Tensor read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    int W, H;
    read_header(f, path, "P5", W, H);
    std::vector<uint8_t> buf(static_cast<size_t>(W) * H);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("truncated pgm: " + path);
    Tensor t({1, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) t.at(0, y, x) = buf[static_cast<size_t>(y) * W + x] / 255.0f;
    return t;
}

}  // namespace faceswap
