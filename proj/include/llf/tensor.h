// Copyright (c) 2026, The llf Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor. f32 is the training type, f64 the verification type.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "llf/error.h"

namespace llf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T(0)) : mShape(std::move(shape)) {
        mData.assign(shape_numel(mShape), fill);
    }

    BasicTensor(Shape shape, std::vector<T> data) : mShape(std::move(shape)), mData(std::move(data)) {
        if (mData.size() != shape_numel(mShape)) {
            throw ConfigError("tensor data length " + std::to_string(mData.size()) + " does not match shape " +
                              shape_str(mShape));
        }
    }

    BasicTensor(Shape shape, std::initializer_list<T> data) : BasicTensor(std::move(shape), std::vector<T>(data)) {}

    const Shape& shape() const { return mShape; }
    std::size_t rank() const { return mShape.size(); }
    std::size_t numel() const { return mData.size(); }
    bool empty() const { return mData.empty(); }

    /// Size of dimension `i`; negative indices count from the back.
    std::size_t dim(int i) const {
        const int r = static_cast<int>(mShape.size());
        const int k = i < 0 ? r + i : i;
        if (k < 0 || k >= r) throw ConfigError("dim index out of range for shape " + shape_str(mShape));
        return mShape[static_cast<std::size_t>(k)];
    }

    T* data() { return mData.data(); }
    const T* data() const { return mData.data(); }
    std::span<T> span() { return mData; }
    std::span<const T> span() const { return mData; }
    std::vector<T>& vec() { return mData; }
    const std::vector<T>& vec() const { return mData; }

    T& operator[](std::size_t i) { return mData[i]; }
    const T& operator[](std::size_t i) const { return mData[i]; }

    T& at2(std::size_t i, std::size_t j) { return mData[i * mShape[1] + j]; }
    const T& at2(std::size_t i, std::size_t j) const { return mData[i * mShape[1] + j]; }

    void fill(T v) { std::fill(mData.begin(), mData.end(), v); }

    /// Same elements, new shape. Element count must match.
    BasicTensor reshaped(Shape shape) const {
        if (shape_numel(shape) != mData.size()) {
            throw ConfigError("cannot reshape " + shape_str(mShape) + " to " + shape_str(shape));
        }
        return BasicTensor(std::move(shape), mData);
    }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(mData.size());
        for (std::size_t i = 0; i < mData.size(); ++i) out[i] = static_cast<U>(mData[i]);
        return BasicTensor<U>(mShape, std::move(out));
    }

    bool bitwise_equal(const BasicTensor& other) const;

private:
    Shape mShape;
    std::vector<T> mData;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Named gradients (or parameters), iterated in sorted-name order.
template <typename T>
using TensorMap = std::map<std::string, BasicTensor<T>>;

template <typename T>
using GradSet = TensorMap<T>;

/// Zero-filled tensors with the same names and shapes as `like`.
template <typename T>
GradSet<T> zeros_like(const TensorMap<T>& like) {
    GradSet<T> out;
    for (const auto& [name, t] : like) out.emplace(name, BasicTensor<T>(t.shape()));
    return out;
}

template <typename T, typename U>
TensorMap<U> cast_map(const TensorMap<T>& in) {
    TensorMap<U> out;
    for (const auto& [name, t] : in) out.emplace(name, t.template cast<U>());
    return out;
}

/// 64-bit FNV-1a over the sorted names, shapes and raw element bytes.
template <typename T>
std::uint64_t hash_tensors(const TensorMap<T>& tensors);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace llf
