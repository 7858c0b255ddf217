// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>

#include "had/rasterizer.hpp"
#include "had/rng.hpp"

namespace had {

std::string to_string(ViewRole role) {
    switch (role) {
    case ViewRole::input: return "input";
    case ViewRole::target: return "target";
    case ViewRole::test: return "test";
    case ViewRole::novel: return "novel";
    }
    return "unknown";
}

ViewRole view_role_from_string(const std::string &s) {
    if (s == "input") return ViewRole::input;
    if (s == "target") return ViewRole::target;
    if (s == "test") return ViewRole::test;
    if (s == "novel") return ViewRole::novel;
    throw ConfigError("unknown view role '" + s + "'");
}

std::string to_string(SceneKind kind) {
    return kind == SceneKind::blob_field ? "blob_field" : "textured_room";
}

SceneKind scene_kind_from_string(const std::string &s) {
    if (s == "blob_field") return SceneKind::blob_field;
    if (s == "textured_room") return SceneKind::textured_room;
    throw ConfigError("unknown scene kind '" + s + "'");
}

int ViewSet::count(ViewRole role) const {
    return int(std::count_if(views.begin(), views.end(), [&](const auto &v) { return v.role == role; }));
}

std::vector<int> ViewSet::indices(ViewRole role) const {
    std::vector<int> out;
    for (int i = 0; i < int(views.size()); ++i)
        if (views[i].role == role) out.push_back(i);
    return out;
}

std::vector<ViewRecord> ViewSet::of_role(ViewRole role) const {
    std::vector<ViewRecord> out;
    for (const auto &v : views)
        if (v.role == role) out.push_back(v);
    return out;
}

void ViewSet::validate() const {
    if (count(ViewRole::input) < 1) throw ContractViolation("view set has no input view");
    for (const auto &v : views) {
        v.camera.validate();
        if (v.image.width != v.camera.width || v.image.height != v.camera.height)
            throw ContractViolation("view image does not match its camera resolution");
    }
}

void SceneSpec::validate() const {
    if (num_gaussians <= 0 || num_input_views <= 0 || num_target_views <= 0 || num_test_views <= 0)
        throw ConfigError("scene spec: all counts must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("scene spec: image size must be positive");
    if (!(input_arc_deg > 0 && extrapolation_arc_deg > input_arc_deg && extrapolation_arc_deg < 180))
        throw ConfigError("scene spec: need 0 < input_arc_deg < extrapolation_arc_deg < 180");
    if (!(camera_distance > 0 && fov_deg > 0 && fov_deg < 170)) throw ConfigError("scene spec: bad camera geometry");
}

namespace {

using Vec3 = Eigen::Vector3d;

Eigen::Quaterniond random_rotation(Rng &rng) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return q.normalized();
}

GaussianSetd make_blob_field(const SceneSpec &spec, Rng &rng) {
    GaussianSetd set;
    set.background_color = Vec3(0.06, 0.06, 0.09);
    for (int i = 0; i < spec.num_gaussians; ++i) {
        Gaussian g;
        g.mean = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        for (int k = 0; k < 3; ++k) g.log_scale(k) = std::log(rng.uniform(0.05, 0.16));
        g.rotation = random_rotation(rng);
        g.opacity_logit = logit(rng.uniform(0.55, 0.95));
        for (int c = 0; c < 3; ++c) g.sh(0, c) = rng.uniform(0.05, 0.95);
        set.primitives.push_back(g);
    }
    return set;
}

/// Axis-aligned rectangle carrying a procedural texture.
struct Panel {
    Vec3 origin;         // corner
    Vec3 u, v;           // edge vectors
    int normal_axis;     // world axis of the panel normal
    Vec3 color_a, color_b;
    double checker;      // checker cells per unit length
    double stripe;       // stripe frequency along u

    double area() const { return u.norm() * v.norm(); }

    Vec3 color_at(double a, double b) const {
        const double la = a * u.norm(), lb = b * v.norm();
        const bool odd = (int(std::floor(la * checker)) + int(std::floor(lb * checker))) % 2 != 0;
        const Vec3 base = odd ? color_a : color_b;
        const double s = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * stripe * la);
        return (0.8 * base + 0.2 * s * Vec3(1.0, 0.9, 0.7)).cwiseMax(0.0).cwiseMin(1.0);
    }
};

GaussianSetd make_textured_room(const SceneSpec &spec, Rng &rng) {
    auto rand_color = [&] { return Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)); };
    std::vector<Panel> panels;
    // floor and back wall
    panels.push_back({Vec3(-1.6, -1.0, -1.6), Vec3(3.2, 0, 0), Vec3(0, 0, 3.2), 1, rand_color(), rand_color(), 2.0, 1.5});
    panels.push_back({Vec3(-1.6, -1.0, 1.6), Vec3(3.2, 0, 0), Vec3(0, 2.2, 0), 2, rand_color(), rand_color(), 2.5, 0.7});
    // central box: top, front, left, right faces
    const double h = 0.45, cx = rng.uniform(-0.3, 0.3), cz = rng.uniform(-0.3, 0.3), top = -1.0 + 2 * h;
    panels.push_back({Vec3(cx - h, top, cz - h), Vec3(2 * h, 0, 0), Vec3(0, 0, 2 * h), 1, rand_color(), rand_color(), 4.0, 2.0});
    panels.push_back({Vec3(cx - h, -1.0, cz - h), Vec3(2 * h, 0, 0), Vec3(0, 2 * h, 0), 2, rand_color(), rand_color(), 4.0, 3.0});
    panels.push_back({Vec3(cx - h, -1.0, cz - h), Vec3(0, 0, 2 * h), Vec3(0, 2 * h, 0), 0, rand_color(), rand_color(), 3.0, 2.5});
    panels.push_back({Vec3(cx + h, -1.0, cz - h), Vec3(0, 0, 2 * h), Vec3(0, 2 * h, 0), 0, rand_color(), rand_color(), 3.0, 1.0});

    const double total_area = std::accumulate(panels.begin(), panels.end(), 0.0,
                                              [](double s, const Panel &p) { return s + p.area(); });
    GaussianSetd set;
    set.background_color = Vec3(0.55, 0.6, 0.7);
    int remaining = spec.num_gaussians;
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const Panel &p = panels[pi];
        int n = pi + 1 == panels.size() ? remaining
                                        : std::min(remaining, int(std::lround(spec.num_gaussians * p.area() / total_area)));
        remaining -= n;
        if (n <= 0) continue;
        // jittered grid with aspect matching the panel
        const double ratio = p.u.norm() / p.v.norm();
        const int nu = std::max(1, int(std::lround(std::sqrt(n * ratio))));
        const int nv = std::max(1, (n + nu - 1) / nu);
        const double spacing = std::sqrt(p.area() / n);
        for (int k = 0; k < n; ++k) {
            const int iu = k % nu, iv = (k / nu) % nv;
            const double a = std::clamp((iu + rng.uniform(0.25, 0.75)) / nu, 0.0, 1.0);
            const double b = std::clamp((iv + rng.uniform(0.25, 0.75)) / nv, 0.0, 1.0);
            Gaussian g;
            g.mean = p.origin + a * p.u + b * p.v;
            g.log_scale.setConstant(std::log(0.6 * spacing));
            g.log_scale(p.normal_axis) = std::log(0.01);
            g.rotation = Eigen::Quaterniond::Identity();
            g.opacity_logit = logit(0.9);
            g.sh.row(0) = p.color_at(a, b).transpose();
            set.primitives.push_back(g);
        }
    }
    return set;
}

Camerad arc_camera(const SceneSpec &spec, double theta_deg) {
    const double theta = theta_deg * std::numbers::pi / 180.0;
    const double elevation = 0.35 + 0.08 * std::sin(2.0 * theta);
    const double r = spec.camera_distance;
    const Vec3 eye(r * std::sin(theta) * std::cos(elevation), r * std::sin(elevation),
                   -r * std::cos(theta) * std::cos(elevation));
    const double f = 0.5 * spec.width / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
    return look_at<double>(eye, Vec3(0, -0.2, 0), Vec3(0, 1, 0), f, f, 0.5 * spec.width, 0.5 * spec.height,
                           spec.width, spec.height);
}

} // namespace

std::pair<GaussianSetd, ViewSet> make_synthetic_scene(const SceneSpec &spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, 0x5ce7e));
    GaussianSetd scene = spec.scene_kind == SceneKind::blob_field ? make_blob_field(spec, rng)
                                                                  : make_textured_room(spec, rng);

    ViewSet views;
    auto add_view = [&](double theta, ViewRole role) {
        ViewRecord v;
        v.camera = arc_camera(spec, theta);
        v.image = render(scene, v.camera).image;
        v.role = role;
        views.views.push_back(std::move(v));
    };

    const int n_in = spec.num_input_views;
    for (int i = 0; i < n_in; ++i) {
        const double t = n_in == 1 ? 0.0 : -spec.input_arc_deg + 2.0 * spec.input_arc_deg * i / (n_in - 1);
        add_view(t, ViewRole::input);
    }
    // Remaining views continue the arc on alternating sides; the outermost are
    // targets, the ones between the inputs and the targets are test views.
    const int n_other = spec.num_target_views + spec.num_test_views;
    const int per_side = (n_other + 1) / 2;
    std::vector<double> others;
    for (int j = 0; j < n_other; ++j) {
        const double step = (spec.extrapolation_arc_deg - spec.input_arc_deg) / per_side;
        const double mag = spec.input_arc_deg + step * (j / 2 + 1);
        others.push_back(j % 2 == 0 ? mag : -mag);
    }
    std::stable_sort(others.begin(), others.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    for (int j = 0; j < n_other; ++j)
        add_view(others[j], j < spec.num_test_views ? ViewRole::test : ViewRole::target);
    return {std::move(scene), std::move(views)};
}

SceneBounds estimate_scene_bounds(const ViewSet &views) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Vec3 b = Vec3::Zero();
    const auto inputs = views.indices(ViewRole::input);
    if (inputs.empty()) throw ContractViolation("estimate_scene_bounds: no input views");
    for (int i : inputs) {
        const auto &cam = views.views[i].camera;
        const Vec3 o = cam.center();
        const Vec3 d = cam.rotation_w2c.row(2).transpose();
        const Eigen::Matrix3d p = Eigen::Matrix3d::Identity() - d * d.transpose();
        a += p;
        b += p * o;
    }
    SceneBounds out;
    // parallel axes (a single view) leave a singular system; fall back to a point ahead of the camera
    Eigen::LDLT<Eigen::Matrix3d> ldlt(a);
    double mean_dist = 0;
    if (inputs.size() >= 2 && ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-8) {
        out.center = ldlt.solve(b);
    } else {
        const auto &cam = views.views[inputs.front()].camera;
        out.center = cam.center() + 3.0 * cam.rotation_w2c.row(2).transpose();
    }
    for (int i : inputs) mean_dist += (views.views[i].camera.center() - out.center).norm();
    mean_dist /= double(inputs.size());
    out.radius = 0.4 * mean_dist;
    return out;
}

std::vector<int> nearest_input_views(const ViewSet &views, const Camerad &cam, int count) {
    std::vector<int> idx = views.indices(ViewRole::input);
    const Vec3 c = cam.center();
    std::vector<std::pair<double, int>> dist;
    for (int i : idx) dist.emplace_back((views.views[i].camera.center() - c).norm(), i);
    std::sort(dist.begin(), dist.end());
    std::vector<int> out;
    for (int k = 0; k < std::min<int>(count, int(dist.size())); ++k) out.push_back(dist[k].second);
    return out;
}

} // namespace had
