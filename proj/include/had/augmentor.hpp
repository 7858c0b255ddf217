// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "had/scene.hpp"

namespace had {

/// Controls of the simulated augmentation prior.
struct AugmentorConfig {
    /// Target fraction of pixels covered by alien patches.
    double hallucination_rate = 0.15;
    int patch_size_min = 8;
    int patch_size_max = 20;
    int num_patches_min = 1;
    int num_patches_max = 12;
    /// Peak amplitude of the smooth color drift field.
    double color_drift_amplitude = 0.02;
    /// Fraction of the splat render (and its artifacts) left in the output.
    double residual_blend = 0.1;
    std::uint64_t seed = 0;
    /// Score with the per-channel max instead of the channel mean.
    bool score_channel_max = false;

    void validate() const;
};

/// Output of one simulated prior call for a novel camera.
struct AugmentedView {
    ImageBuffer image;
    Camerad camera;
    int ref_view_index = -1;
    ScoreMap gt_score;
    ImageBuffer rendered_input;
};

/// Aligned (ground truth, augmented, splat render) images of one pose.
struct ScorerTriplet {
    ImageBuffer gt_image;
    ImageBuffer augmented;
    ImageBuffer splat_render;
    /// Depth of the splat render; the consistency features back-project through it.
    DepthBuffer splat_depth;
    Camerad camera;
    ScoreMap gt_score;
};

/// Per-pixel hallucination score: channel mean (or max) of |aug - gt|.
ScoreMap gt_hallucination_score(const ImageBuffer &aug, const ImageBuffer &gt, bool channel_max = false);

/// Simulates the augmentation prior at one novel pose: the ground-truth render
/// stands in for perfect artifact removal, a `residual_blend` share of the
/// splat render is kept, then feathered alien patches copied from the
/// reference image and a smooth color drift are applied. Corruption placement
/// depends only on (cfg.seed, view_key, ref_view_index).
AugmentedView simulate_prior(const ImageBuffer &splat_render, const ImageBuffer &gt_render, const ViewRecord &ref,
                             int ref_view_index, const Camerad &camera, const AugmentorConfig &cfg,
                             std::uint64_t view_key);

/// One triplet per non-input view: I_3DGS from `trained_set`, I_GT from
/// `scene`, the augmented image conditioned on the nearest input view.
std::vector<ScorerTriplet> curate_triplets(const GaussianSetd &scene, const ViewSet &views,
                                           const GaussianSetd &trained_set, const AugmentorConfig &cfg);

} // namespace had
