// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "had/camera.hpp"
#include "had/gaussian.hpp"
#include "had/raster.hpp"

namespace had {

enum class ViewRole { input, target, test, novel };

std::string to_string(ViewRole role);
ViewRole view_role_from_string(const std::string &s);

struct ViewRecord {
    Camerad camera;
    ImageBuffer image;
    ViewRole role = ViewRole::input;

    bool operator==(const ViewRecord &) const = default;
};

struct ViewSet {
    std::vector<ViewRecord> views;

    int count(ViewRole role) const;
    /// Indices into `views` holding `role`, in storage order.
    std::vector<int> indices(ViewRole role) const;
    std::vector<ViewRecord> of_role(ViewRole role) const;

    /// Throws ContractViolation if images and cameras disagree or there is no input view.
    void validate() const;

    bool operator==(const ViewSet &) const = default;
};

enum class SceneKind { blob_field, textured_room };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string &s);

struct SceneSpec {
    SceneKind scene_kind = SceneKind::blob_field;
    int num_gaussians = 300;
    int num_input_views = 9;
    int num_target_views = 6;
    int num_test_views = 6;
    int width = 64;
    int height = 64;
    std::uint64_t seed = 0;

    /// Input cameras span [-input_arc_deg, +input_arc_deg] on the camera arc;
    /// target and test cameras continue out to +/- extrapolation_arc_deg.
    double input_arc_deg = 35.0;
    double extrapolation_arc_deg = 80.0;
    double camera_distance = 3.4;
    double fov_deg = 55.0;

    void validate() const;
};

/// Ground-truth scene plus its rendered views. Image contents of every view are
/// renders of the returned set.
std::pair<GaussianSetd, ViewSet> make_synthetic_scene(const SceneSpec &spec);

/// Region the input cameras look at: the least-squares point closest to all
/// input optical axes, with a radius of 0.4 x the mean camera distance.
struct SceneBounds {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 1;
};

SceneBounds estimate_scene_bounds(const ViewSet &views);

/// Index (into `views.views`) of the `count` input views closest to `cam` by
/// camera-center distance, nearest first.
std::vector<int> nearest_input_views(const ViewSet &views, const Camerad &cam, int count);

} // namespace had
