// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

#include "had/errors.hpp"

namespace had {

/// Pinhole camera, world-to-camera extrinsics, OpenCV axis convention
/// (x right, y down, z forward). Pixel (x, y) has its center at (x + 0.5, y + 0.5).
template <typename Scalar>
struct Camera {
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

    Scalar fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 1, height = 1;
    Mat3 rotation_w2c = Mat3::Identity();
    Vec3 translation_w2c = Vec3::Zero();

    Vec3 to_camera(const Vec3 &world) const { return rotation_w2c * world + translation_w2c; }
    Vec3 to_world(const Vec3 &cam) const { return rotation_w2c.transpose() * (cam - translation_w2c); }
    Vec3 center() const { return -rotation_w2c.transpose() * translation_w2c; }

    /// Pixel coordinates of a camera-frame point (z must be positive).
    Eigen::Matrix<Scalar, 2, 1> project_camera(const Vec3 &p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }

    /// Camera-frame point at depth z (along the optical axis) behind pixel coordinates (u, v).
    Vec3 unproject(Scalar u, Scalar v, Scalar z) const {
        return {(u - cx) / fx * z, (v - cy) / fy * z, z};
    }

    bool same_intrinsics(const Camera &o) const {
        return fx == o.fx && fy == o.fy && cx == o.cx && cy == o.cy && width == o.width &&
               height == o.height;
    }

    bool operator==(const Camera &o) const {
        return same_intrinsics(o) && rotation_w2c == o.rotation_w2c &&
               translation_w2c == o.translation_w2c;
    }

    void validate() const {
        if (!(width > 0 && height > 0)) throw ContractViolation("camera: non-positive resolution");
        if (!(fx > 0 && fy > 0)) throw ContractViolation("camera: non-positive focal length");
        const Scalar err = (rotation_w2c.transpose() * rotation_w2c - Mat3::Identity()).cwiseAbs().maxCoeff();
        if (!(err <= Scalar(1e-9))) throw ContractViolation("camera: rotation is not orthonormal");
    }
};

using Camerad = Camera<double>;

/// Camera at `eye` looking at `target`; `up` is the world up direction.
template <typename Scalar>
Camera<Scalar> look_at(const Eigen::Matrix<Scalar, 3, 1> &eye, const Eigen::Matrix<Scalar, 3, 1> &target,
                       const Eigen::Matrix<Scalar, 3, 1> &up, Scalar fx, Scalar fy, Scalar cx, Scalar cy,
                       int width, int height) {
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = z.cross(up).normalized();
    const Vec3 y = z.cross(x);
    Camera<Scalar> cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    cam.rotation_w2c.row(0) = x.transpose();
    cam.rotation_w2c.row(1) = y.transpose();
    cam.rotation_w2c.row(2) = z.transpose();
    // Re-orthonormalize through a quaternion so the 1e-9 invariant holds tightly.
    cam.rotation_w2c = Eigen::Quaternion<Scalar>(cam.rotation_w2c).normalized().toRotationMatrix();
    cam.translation_w2c = -cam.rotation_w2c * eye;
    return cam;
}

/// Pose between c0 (u = 0) and c1 (u = 1): shortest-arc slerp of the
/// orientation, linear interpolation of the camera center in world frame.
template <typename Scalar>
Camera<Scalar> interpolate_pose(const Camera<Scalar> &c0, const Camera<Scalar> &c1, Scalar u) {
    if (!c0.same_intrinsics(c1)) throw ContractViolation("interpolate_pose: cameras have different intrinsics");
    if (!(u >= 0 && u <= 1)) throw ContractViolation("interpolate_pose: fraction outside [0, 1]");
    if (u == 0) return c0;
    if (u == 1) return c1;
    const Eigen::Quaternion<Scalar> q0(c0.rotation_w2c), q1(c1.rotation_w2c);
    // Eigen's slerp flips the sign of the second quaternion when the dot product is negative.
    const Eigen::Quaternion<Scalar> q = q0.normalized().slerp(u, q1.normalized()).normalized();
    const auto center = ((1 - u) * c0.center() + u * c1.center()).eval();
    Camera<Scalar> out = c0;
    out.rotation_w2c = q.toRotationMatrix();
    out.translation_w2c = -out.rotation_w2c * center;
    return out;
}

} // namespace had
