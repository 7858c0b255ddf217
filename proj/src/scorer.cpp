// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/scorer.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "had/parallel.hpp"
#include "had/rasterizer.hpp"

namespace had {

std::vector<ReferenceView> make_references(const ViewSet &views, const GaussianSetd &model) {
    std::vector<ReferenceView> refs;
    for (int i : views.indices(ViewRole::input)) {
        ReferenceView r;
        r.view = views.views[i];
        r.depth = render(model, r.view.camera).depth;
        r.index = i;
        refs.push_back(std::move(r));
    }
    return refs;
}

std::vector<ReferenceView> nearest_references(std::span<const ReferenceView> refs, const Camerad &cam, int count) {
    std::vector<std::pair<double, int>> dist;
    for (int i = 0; i < int(refs.size()); ++i)
        dist.emplace_back((refs[i].view.camera.center() - cam.center()).norm(), i);
    std::sort(dist.begin(), dist.end());
    std::vector<ReferenceView> out;
    for (int k = 0; k < std::min<int>(count, int(dist.size())); ++k) out.push_back(refs[dist[k].second]);
    return out;
}

double default_depth_tolerance(const ViewSet &views) {
    return 0.02 * 2.0 * estimate_scene_bounds(views).radius;
}

namespace {

Eigen::Array<double, 1, 3> bilinear(const ImageBuffer &img, double sx, double sy) {
    sx = std::clamp(sx, 0.0, double(img.width - 1));
    sy = std::clamp(sy, 0.0, double(img.height - 1));
    const int x0 = std::min(int(sx), img.width - 1), y0 = std::min(int(sy), img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
    const double fx = sx - x0, fy = sy - y0;
    return (1 - fy) * ((1 - fx) * img.pixel(img.index(x0, y0)) + fx * img.pixel(img.index(x1, y0))) +
           fy * ((1 - fx) * img.pixel(img.index(x0, y1)) + fx * img.pixel(img.index(x1, y1)));
}

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

ConsistencyFeatures extract_features(const ImageBuffer &aug, const Camerad &novel_cam, const DepthBuffer &novel_depth,
                                     std::span<const ReferenceView> refs, const ImageBuffer &splat_render,
                                     double depth_tolerance) {
    if (refs.empty()) throw ContractViolation("extract_features: no reference views");
    require_same_shape(aug, novel_depth, "extract_features depth");
    require_same_shape(aug, splat_render, "extract_features splat render");
    if (aug.width != novel_cam.width || aug.height != novel_cam.height)
        throw ContractViolation("extract_features: image does not match the novel camera");
    const int w = aug.width, h = aug.height;
    ConsistencyFeatures f(w, h);
    Eigen::Array<bool, Eigen::Dynamic, 1> observed = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(f.size(), false);

    parallel_for(h, [&](int y) {
        std::vector<double> residuals;
        for (int x = 0; x < w; ++x) {
            const auto i = aug.index(x, y);
            residuals.clear();
            int occluded = 0;
            const double z = novel_depth.data(i);
            if (z > 0) {
                const Eigen::Vector3d world = novel_cam.to_world(novel_cam.unproject(x + 0.5, y + 0.5, z));
                for (const auto &ref : refs) {
                    const auto &cam = ref.view.camera;
                    const Eigen::Vector3d t = cam.to_camera(world);
                    if (!(t.z() > kNearPlane)) {
                        ++occluded;
                        continue;
                    }
                    const Eigen::Vector2d uv = cam.project_camera(t);
                    if (!(uv.x() >= 0 && uv.x() < cam.width && uv.y() >= 0 && uv.y() < cam.height)) {
                        ++occluded;
                        continue;
                    }
                    const double ref_depth = ref.depth(int(uv.x()), int(uv.y()));
                    if (t.z() > ref_depth + depth_tolerance) {
                        ++occluded;
                        continue;
                    }
                    const Eigen::Array<double, 1, 3> sample = bilinear(ref.view.image, uv.x() - 0.5, uv.y() - 0.5);
                    residuals.push_back(std::min(1.0, (aug.pixel(i) - sample).abs().mean()));
                }
            } else {
                occluded = int(refs.size());
            }
            if (!residuals.empty()) {
                f.data(i, 0) = *std::min_element(residuals.begin(), residuals.end());
                f.data(i, 1) = median_of(residuals);
                observed(i) = true;
            }
            f.data(i, 2) = double(occluded) / double(refs.size());

            const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
            const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
            double grad = 0;
            for (int c = 0; c < 3; ++c) {
                const double gx = 0.5 * (aug(xr, y, c) - aug(xl, y, c));
                const double gy = 0.5 * (aug(x, yd, c) - aug(x, yu, c));
                grad += std::sqrt(gx * gx + gy * gy);
            }
            f.data(i, 3) = std::min(1.0, grad / 3.0);
            f.data(i, 4) = (aug.pixel(i) - splat_render.pixel(i)).abs().mean();
        }
    });

    // Unobservable pixels get the image's median observed residual.
    std::vector<double> seen_min, seen_med;
    for (Eigen::Index i = 0; i < f.size(); ++i)
        if (observed(i)) {
            seen_min.push_back(f.data(i, 0));
            seen_med.push_back(f.data(i, 1));
        }
    const double neutral_min = seen_min.empty() ? 0.0 : median_of(seen_min);
    const double neutral_med = seen_med.empty() ? 0.0 : median_of(seen_med);
    for (Eigen::Index i = 0; i < f.size(); ++i)
        if (!observed(i)) {
            f.data(i, 0) = neutral_min;
            f.data(i, 1) = neutral_med;
        }
    return f;
}

int ScorerModel::enabled_count() const {
    return int(std::count(feature_mask.begin(), feature_mask.end(), true));
}

void ScorerModel::validate() const {
    if (enabled_count() == 0) throw ConfigError("scorer model: no feature enabled");
    if (!weights.allFinite() || !std::isfinite(bias)) throw NumericalError("scorer model: non-finite parameters");
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void *data, std::size_t n) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

ScorerModel fit_scorer(std::span<const FeatureSample> samples, double ridge, const FeatureMask &mask) {
    if (samples.empty()) throw ContractViolation("fit_scorer: no training samples");
    if (!(ridge >= 0)) throw ConfigError("fit_scorer: ridge must be nonnegative");
    ScorerModel model;
    model.feature_mask = mask;
    model.ridge = ridge;
    const int d = model.enabled_count();
    if (d == 0) throw ConfigError("fit_scorer: no feature enabled");

    std::vector<int> cols;
    for (int k = 0; k < kNumFeatures; ++k)
        if (mask[k]) cols.push_back(k);

    // Normal equations over [enabled features, 1].
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(d + 1, d + 1);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(d + 1);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    Eigen::VectorXd row(d + 1);
    for (const auto &s : samples) {
        require_same_shape(s.features, s.target, "fit_scorer sample");
        hash = fnv1a(hash, s.features.data.data(), sizeof(double) * std::size_t(s.features.data.size()));
        hash = fnv1a(hash, s.target.data.data(), sizeof(double) * std::size_t(s.target.data.size()));
        for (Eigen::Index i = 0; i < s.features.size(); ++i) {
            for (int j = 0; j < d; ++j) row(j) = s.features.data(i, cols[j]);
            row(d) = 1.0;
            ata.selfadjointView<Eigen::Lower>().rankUpdate(row);
            atb += s.target.data(i) * row;
        }
    }
    Eigen::MatrixXd normal = ata.selfadjointView<Eigen::Lower>();
    normal.diagonal().head(d).array() += ridge;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff()))
        throw NumericalError("fit_scorer: normal matrix is singular; use a ridge > 0");
    const Eigen::VectorXd sol = ldlt.solve(atb);
    for (int j = 0; j < d; ++j) model.weights(cols[j]) = sol(j);
    model.bias = sol(d);
    model.dataset_hash = hash;
    model.validate();
    return model;
}

std::vector<FeatureSample> triplet_features(std::span<const ScorerTriplet> triplets,
                                            std::span<const ReferenceView> refs, double depth_tolerance) {
    std::vector<FeatureSample> samples;
    samples.reserve(triplets.size());
    for (const auto &t : triplets) {
        const auto near = nearest_references(refs, t.camera, 3);
        samples.push_back({extract_features(t.augmented, t.camera, t.splat_depth, near, t.splat_render,
                                            depth_tolerance),
                           t.gt_score});
    }
    return samples;
}

ScorerModel train_scorer(std::span<const ScorerTriplet> triplets, std::span<const ReferenceView> refs,
                         double depth_tolerance, double ridge, const FeatureMask &mask) {
    if (triplets.empty()) throw ContractViolation("train_scorer: no triplets");
    const auto samples = triplet_features(triplets, refs, depth_tolerance);
    return fit_scorer(samples, ridge, mask);
}

ScoreMap predict_score(const ScorerModel &model, const ConsistencyFeatures &features) {
    ScoreMap out(features.width, features.height, model.bias);
    for (int k = 0; k < kNumFeatures; ++k)
        if (model.feature_mask[k]) out.data += model.weights(k) * features.data.col(k);
    out.data = out.data.cwiseMax(0.0);
    return out;
}

BinaryMask score_to_mask(const ScoreMap &score, double threshold, ThresholdMode mode) {
    if (mode == ThresholdMode::absolute) {
        if (!(threshold >= 0)) throw ConfigError("score_to_mask: absolute threshold must be >= 0");
    } else if (!(threshold >= 0 && threshold <= 1)) {
        throw ConfigError("score_to_mask: quantile threshold must lie in [0, 1]");
    }
    double cut = threshold;
    if (mode == ThresholdMode::quantile) {
        std::vector<double> v(score.data.data(), score.data.data() + score.data.size());
        std::sort(v.begin(), v.end());
        // linear interpolation between order statistics
        const double pos = threshold * double(v.size() - 1);
        const auto lo = std::size_t(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        cut = v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
    }
    BinaryMask mask(score.width, score.height);
    mask.data = score.data > cut;
    return mask;
}

} // namespace had
