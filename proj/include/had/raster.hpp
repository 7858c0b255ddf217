// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <string>

#include "had/errors.hpp"

namespace had {

/// Dense H x W raster with C channels per pixel. Pixels are stored row-major
/// (pixel index = y * width + x), one Eigen row per pixel, so whole-image
/// arithmetic can be written as Eigen array expressions on `data`.
template <typename Scalar, int Channels>
struct Raster {
    static constexpr int kChannels = Channels;
    static constexpr int kStorage = Channels == 1 ? Eigen::ColMajor : Eigen::RowMajor;
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Channels, kStorage>;

    int width = 0;
    int height = 0;
    Storage data;

    Raster() = default;
    Raster(int w, int h) : width(w), height(h), data(Storage::Zero(Eigen::Index(w) * h, Channels)) {}
    Raster(int w, int h, Scalar fill)
        : width(w), height(h), data(Storage::Constant(Eigen::Index(w) * h, Channels, fill)) {}

    Eigen::Index size() const { return Eigen::Index(width) * height; }
    Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }

    Scalar &operator()(int x, int y, int c = 0) { return data(index(x, y), c); }
    Scalar operator()(int x, int y, int c = 0) const { return data(index(x, y), c); }

    auto pixel(Eigen::Index i) { return data.row(i); }
    auto pixel(Eigen::Index i) const { return data.row(i); }

    template <typename OtherScalar, int OtherChannels>
    bool same_shape(const Raster<OtherScalar, OtherChannels> &o) const {
        return width == o.width && height == o.height;
    }

    bool operator==(const Raster &o) const {
        return width == o.width && height == o.height && (data == o.data).all();
    }
};

using ImageBuffer = Raster<double, 3>;
using DepthBuffer = Raster<double, 1>;
using ScoreMap = Raster<double, 1>;
using AlphaMap = Raster<double, 1>;
/// true = hallucinated pixel, excluded from the novel-view loss.
using BinaryMask = Raster<bool, 1>;

template <typename A, typename B>
void require_same_shape(const A &a, const B &b, const std::string &what) {
    if (!a.same_shape(b))
        throw ContractViolation(what + ": dimension mismatch (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
}

} // namespace had
