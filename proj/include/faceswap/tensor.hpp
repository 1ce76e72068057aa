#ifndef FACESWAP_TENSOR_HPP
#define FACESWAP_TENSOR_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "faceswap/errors.hpp"

namespace faceswap {

// 64-byte-aligned allocator. Keeping every tensor buffer on the same
// alignment makes SIMD kernels whose iteration order depends on pointer
// alignment (notably Eigen's vector paths) bit-reproducible across
// allocations, which the determinism guarantees rely on.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(64)));
    }
    void deallocate(T* p, size_t n) noexcept {
        ::operator delete(p, n * sizeof(T), std::align_val_t(64));
    }
    bool operator==(const AlignedAllocator&) const noexcept { return true; }
    bool operator!=(const AlignedAllocator&) const noexcept { return false; }
};

using FloatBuf = std::vector<float, AlignedAllocator<float>>;

// Dense float tensor, row-major. Images are stored as {C, H, W},
// vectors as {N}, scalars as {1}.
struct Tensor {
    std::vector<int> shape;
    FloatBuf data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }
    Tensor(std::vector<int> s, FloatBuf d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw ShapeError("tensor data size does not match shape");
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }
    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(float v) { return full({1}, v); }
    static Tensor randn(std::vector<int> s, std::mt19937_64& rng, float stddev = 1.0f) {
        Tensor t(std::move(s));
        std::normal_distribution<float> nd(0.0f, stddev);
        for (auto& v : t.data) v = nd(rng);
        return t;
    }
    static Tensor uniform(std::vector<int> s, std::mt19937_64& rng, float lo, float hi) {
        Tensor t(std::move(s));
        std::uniform_real_distribution<float> ud(lo, hi);
        for (auto& v : t.data) v = ud(rng);
        return t;
    }

    float& at(int i) { return data[static_cast<size_t>(i)]; }
    float at(int i) const { return data[static_cast<size_t>(i)]; }
    // {C,H,W} access
    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

inline bool all_finite(const Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace faceswap

#endif
