// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <vector>

namespace had {

/// Real spherical-harmonic constant of the degree-1 band.
inline constexpr double kShC1 = 0.4886025119029199;

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Scalar>
Scalar logit(Scalar p) {
    return std::log(p / (Scalar(1) - p));
}

/// Rotation matrix of q / |q|, entries written out so that the backward pass
/// in the rasterizer differentiates exactly this expression.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_from_quaternion(const Eigen::Quaternion<Scalar> &q_in) {
    const Eigen::Quaternion<Scalar> q = q_in.normalized();
    const Scalar w = q.w(), x = q.x(), y = q.y(), z = q.z();
    Eigen::Matrix<Scalar, 3, 3> r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// One anisotropic 3D Gaussian. `sh` row 0 is the base RGB color (degree 0,
/// used as plain RGB); rows 1..3 are the degree-1 coefficients for the
/// (-y, +z, -x) basis functions.
template <typename Scalar>
struct GaussianPrimitive {
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
    using ShCoeffs = Eigen::Matrix<Scalar, 4, 3>;

    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
    Scalar opacity_logit = 0;
    ShCoeffs sh = ShCoeffs::Zero();

    Vec3 scale() const { return log_scale.array().exp(); }
    Scalar opacity() const { return sigmoid(opacity_logit); }

    /// R S S^T R^T.
    Mat3 covariance() const {
        const Mat3 m = rotation_from_quaternion(rotation) * scale().asDiagonal();
        return m * m.transpose();
    }

    /// View-dependent color for a unit direction from the camera center to the mean.
    Vec3 color(const Vec3 &dir, int sh_degree) const {
        Vec3 c = sh.row(0).transpose();
        if (sh_degree >= 1)
            c += Scalar(kShC1) * (-dir.y() * sh.row(1).transpose() + dir.z() * sh.row(2).transpose() -
                                  dir.x() * sh.row(3).transpose());
        return c;
    }

    bool operator==(const GaussianPrimitive &o) const {
        return mean == o.mean && log_scale == o.log_scale && rotation.coeffs() == o.rotation.coeffs() &&
               opacity_logit == o.opacity_logit && sh == o.sh;
    }
};

template <typename Scalar>
struct GaussianSet {
    std::vector<GaussianPrimitive<Scalar>> primitives;
    Eigen::Matrix<Scalar, 3, 1> background_color = Eigen::Matrix<Scalar, 3, 1>::Zero();
    int sh_degree = 0;

    std::size_t size() const { return primitives.size(); }
    bool empty() const { return primitives.empty(); }

    bool operator==(const GaussianSet &o) const {
        return primitives == o.primitives && background_color == o.background_color && sh_degree == o.sh_degree;
    }
};

using Gaussian = GaussianPrimitive<double>;
using GaussianSetd = GaussianSet<double>;

} // namespace had
