// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "had/augmentor.hpp"
#include "had/raster.hpp"
#include "had/scene.hpp"

namespace had {

inline constexpr int kNumFeatures = 5;

/// Per-pixel multi-view consistency features, in channel order:
///   0 min photometric residual over non-occluded reference views
///   1 median photometric residual over non-occluded reference views
///   2 fraction of reference views where the pixel is occluded or off-image
///   3 local gradient magnitude of the augmented image
///   4 channel-mean |augmented - splat render|
using ConsistencyFeatures = Raster<double, kNumFeatures>;
using FeatureMask = std::array<bool, kNumFeatures>;

inline constexpr FeatureMask kAllFeatures{true, true, true, true, true};

/// Input view plus the depth the current splat model renders for it.
struct ReferenceView {
    ViewRecord view;
    DepthBuffer depth;
    int index = -1; // position in the owning ViewSet
};

/// Renders depth for every input view of `views` from `model`.
std::vector<ReferenceView> make_references(const ViewSet &views, const GaussianSetd &model);

/// References among `refs` nearest to `cam` by camera-center distance.
std::vector<ReferenceView> nearest_references(std::span<const ReferenceView> refs, const Camerad &cam, int count);

/// 2% of the scene diameter estimated from the input camera rig.
double default_depth_tolerance(const ViewSet &views);

ConsistencyFeatures extract_features(const ImageBuffer &aug, const Camerad &novel_cam, const DepthBuffer &novel_depth,
                                     std::span<const ReferenceView> refs, const ImageBuffer &splat_render,
                                     double depth_tolerance);

/// Linear score regressor over the consistency features.
struct ScorerModel {
    Eigen::Matrix<double, kNumFeatures, 1> weights = Eigen::Matrix<double, kNumFeatures, 1>::Zero();
    double bias = 0;
    FeatureMask feature_mask = kAllFeatures;
    double ridge = 1e-6;
    std::uint64_t dataset_hash = 0;

    int enabled_count() const;
    void validate() const;
};

struct FeatureSample {
    ConsistencyFeatures features;
    ScoreMap target;
};

/// Closed-form ridge regression (bias unpenalized) over every pixel of every sample.
ScorerModel fit_scorer(std::span<const FeatureSample> samples, double ridge, const FeatureMask &mask);

/// Feature samples for scorer training: each triplet scored against its three
/// nearest references.
std::vector<FeatureSample> triplet_features(std::span<const ScorerTriplet> triplets,
                                            std::span<const ReferenceView> refs, double depth_tolerance);

ScorerModel train_scorer(std::span<const ScorerTriplet> triplets, std::span<const ReferenceView> refs,
                         double depth_tolerance, double ridge = 1e-6, const FeatureMask &mask = kAllFeatures);

/// Affine map of the enabled features, clamped below at zero.
ScoreMap predict_score(const ScorerModel &model, const ConsistencyFeatures &features);

enum class ThresholdMode { absolute, quantile };

struct MaskConfig {
    ThresholdMode mode = ThresholdMode::absolute;
    double threshold = 0.9;
};

/// Mask threshold used unless configured otherwise: absolute 0.9.
constexpr MaskConfig default_mask_config() { return {ThresholdMode::absolute, 0.9}; }

/// true where the score exceeds the threshold (absolute) or the per-image
/// threshold-quantile of the scores (quantile).
BinaryMask score_to_mask(const ScoreMap &score, double threshold, ThresholdMode mode);
inline BinaryMask score_to_mask(const ScoreMap &score, const MaskConfig &cfg) {
    return score_to_mask(score, cfg.threshold, cfg.mode);
}

} // namespace had
