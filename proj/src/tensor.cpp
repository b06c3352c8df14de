// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0

#include "llf/tensor.h"

#include <cstring>

namespace llf {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ConfigError("tensor dims must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename T>
bool BasicTensor<T>::bitwise_equal(const BasicTensor& other) const {
    return mShape == other.mShape &&
           (mData.empty() || std::memcmp(mData.data(), other.mData.data(), mData.size() * sizeof(T)) == 0);
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
std::uint64_t hash_tensors(const TensorMap<T>& tensors) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : tensors) {
        h = fnv1a64(name.data(), name.size(), h);
        for (std::size_t d : t.shape()) {
            const std::uint64_t d64 = d;
            h = fnv1a64(&d64, sizeof(d64), h);
        }
        h = fnv1a64(t.data(), t.numel() * sizeof(T), h);
    }
    return h;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template std::uint64_t hash_tensors<float>(const TensorMap<float>&);
template std::uint64_t hash_tensors<double>(const TensorMap<double>&);

}  // namespace llf
