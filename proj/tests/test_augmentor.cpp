// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "had/augmentor.hpp"
#include "had/rasterizer.hpp"
#include "had/scene.hpp"
#include "test_support.hpp"

namespace had {
namespace {

using testing::random_image;

struct Fixture {
    GaussianSetd gt;
    ViewSet views;
    ImageBuffer gt_render;
    ViewRecord ref;
    Camerad cam;
};

Fixture scene_fixture(std::uint64_t seed, SceneKind kind = SceneKind::blob_field) {
    SceneSpec spec;
    spec.scene_kind = kind;
    spec.seed = seed;
    auto [gt, views] = make_synthetic_scene(spec);
    Fixture f{gt, views, {}, {}, {}};
    const int target = views.indices(ViewRole::target).front();
    f.cam = views.views[target].camera;
    f.gt_render = views.views[target].image;
    f.ref = views.views[nearest_input_views(views, f.cam, 1).front()];
    return f;
}

BinaryMask corrupted(const ScoreMap &s) {
    BinaryMask m(s.width, s.height);
    m.data = s.data > 0;
    return m;
}

TEST(GtHallucinationScore, Cases) {
    Rng rng(1);
    const auto gt = random_image(rng, 8, 6);
    EXPECT_TRUE((gt_hallucination_score(gt, gt).data == 0).all());

    auto aug = gt;
    aug(3, 2, 0) += 0.3;
    const auto s = gt_hallucination_score(aug, gt);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) EXPECT_NEAR(s(x, y), (x == 3 && y == 2) ? 0.1 : 0.0, 1e-15);
    EXPECT_NEAR(gt_hallucination_score(aug, gt, true)(3, 2), 0.3, 1e-15);
}

TEST(GtHallucinationScore, MatchesScalarLoop) {
    Rng rng(2);
    const auto a = random_image(rng, 9, 7), b = random_image(rng, 9, 7);
    const auto s = gt_hallucination_score(a, b);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) {
            double e = 0;
            for (int c = 0; c < 3; ++c) e += std::abs(a(x, y, c) - b(x, y, c));
            EXPECT_NEAR(s(x, y), e / 3, 1e-15);
        }
    EXPECT_THROW(gt_hallucination_score(a, ImageBuffer(9, 8)), ContractViolation);
}

TEST(SimulatePrior, NoCorruptionReturnsGroundTruth) {
    const auto f = scene_fixture(3);
    AugmentorConfig cfg;
    cfg.hallucination_rate = 0;
    cfg.residual_blend = 0;
    cfg.color_drift_amplitude = 0;
    cfg.num_patches_min = 0;
    Rng rng(3);
    const auto splat = random_image(rng, f.gt_render.width, f.gt_render.height);
    const auto out = simulate_prior(splat, f.gt_render, f.ref, 0, f.cam, cfg, 17);
    EXPECT_TRUE(out.image == f.gt_render);
    EXPECT_TRUE((out.gt_score.data == 0).all());
    EXPECT_TRUE(out.rendered_input == splat);
    EXPECT_EQ(out.ref_view_index, 0);
}

TEST(SimulatePrior, Deterministic) {
    const auto f = scene_fixture(4);
    AugmentorConfig cfg;
    cfg.seed = 99;
    const auto a = simulate_prior(f.gt_render, f.gt_render, f.ref, 2, f.cam, cfg, 5);
    const auto b = simulate_prior(f.gt_render, f.gt_render, f.ref, 2, f.cam, cfg, 5);
    EXPECT_TRUE(a.image == b.image);
    EXPECT_TRUE(a.gt_score == b.gt_score);
}

TEST(SimulatePrior, CorruptedFractionAtDefaultRate) {
    for (auto kind : {SceneKind::blob_field, SceneKind::textured_room}) {
        const auto f = scene_fixture(5, kind);
        AugmentorConfig cfg;
        ASSERT_EQ(cfg.hallucination_rate, 0.15);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            cfg.seed = seed;
            const auto out = simulate_prior(f.gt_render, f.gt_render, f.ref, 0, f.cam, cfg, 7);
            const double frac = (out.gt_score.data > 0.02).cast<double>().mean();
            EXPECT_GE(frac, 0.05) << "seed " << seed;
            EXPECT_LE(frac, 0.30) << "seed " << seed;
        }
    }
}

TEST(SimulatePrior, CleanOutsidePatches) {
    // Constant images make every patch pixel differ from the ground truth, so
    // the nonzero score region is exactly the union of pasted patches.
    const int w = 48, h = 40;
    AugmentorConfig cfg;
    cfg.residual_blend = 0;
    cfg.color_drift_amplitude = 0;
    const ImageBuffer gt(w, h, 0.2);
    const ViewRecord ref{testing::test_camera(w, h), ImageBuffer(w, h, 0.7), ViewRole::input};
    for (std::uint64_t key = 0; key < 10; ++key) {
        const auto out = simulate_prior(gt, gt, ref, 1, ref.camera, cfg, key);
        const auto m = corrupted(out.gt_score);
        const Eigen::Index n = m.data.count();
        EXPECT_GT(n, 0);
        // Acceptance stops once the target is reached, so one extra patch at most.
        EXPECT_LE(double(n), cfg.hallucination_rate * w * h + double(cfg.patch_size_max * cfg.patch_size_max));
        // Every corrupted pixel lies in a run of at least patch_size_min pixels horizontally.
        for (int y = 0; y < h; ++y) {
            int run = 0;
            for (int x = 0; x <= w; ++x) {
                if (x < w && m(x, y)) {
                    ++run;
                    continue;
                }
                if (run > 0) EXPECT_GE(run, cfg.patch_size_min);
                run = 0;
            }
        }
    }
}

TEST(SimulatePrior, MeanScoreGrowsWithRate) {
    const auto f = scene_fixture(6, SceneKind::textured_room);
    AugmentorConfig cfg;
    cfg.seed = 3;
    cfg.num_patches_max = 30;
    for (std::uint64_t key = 0; key < 5; ++key) {
        double prev = -1;
        for (double rate = 0; rate <= 0.5 + 1e-9; rate += 0.05) {
            cfg.hallucination_rate = rate;
            const double m = simulate_prior(f.gt_render, f.gt_render, f.ref, 0, f.cam, cfg, key).gt_score.data.mean();
            EXPECT_GE(m, prev) << "rate " << rate;
            prev = m;
        }
    }
}

TEST(SimulatePrior, ReferenceIndexChangesCorruption) {
    const int w = 32, h = 32;
    AugmentorConfig cfg;
    cfg.residual_blend = 0;
    cfg.color_drift_amplitude = 0;
    const ImageBuffer gt(w, h, 0.2);
    const ViewRecord ref{testing::test_camera(w, h), ImageBuffer(w, h, 0.7), ViewRole::input};
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        std::vector<BinaryMask> masks;
        for (int k = 0; k < 3; ++k) masks.push_back(corrupted(simulate_prior(gt, gt, ref, k, ref.camera, cfg, trial).gt_score));
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) EXPECT_FALSE(masks[a] == masks[b]) << "trial " << trial;
    }
}

TEST(SimulatePrior, ContractErrors) {
    const auto f = scene_fixture(7);
    AugmentorConfig cfg;
    EXPECT_THROW(simulate_prior(ImageBuffer(8, 8), f.gt_render, f.ref, 0, f.cam, cfg, 0), ContractViolation);
    cfg.hallucination_rate = 1.5;
    EXPECT_THROW(simulate_prior(f.gt_render, f.gt_render, f.ref, 0, f.cam, cfg, 0), ConfigError);
    cfg = {};
    cfg.patch_size_min = 10;
    cfg.patch_size_max = 4;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(CurateTriplets, OnePerNonInputView) {
    SceneSpec spec;
    spec.num_target_views = 10;
    spec.num_test_views = 10;
    spec.width = spec.height = 32;
    spec.num_gaussians = 80;
    spec.seed = 8;
    const auto [gt, views] = make_synthetic_scene(spec);
    GaussianSetd trained = gt;
    for (auto &g : trained.primitives) g.mean += Eigen::Vector3d(0.02, -0.01, 0.0);
    AugmentorConfig cfg;
    const auto triplets = curate_triplets(gt, views, trained, cfg);
    ASSERT_EQ(triplets.size(), 20u);
    for (const auto &t : triplets) {
        EXPECT_TRUE(t.gt_score == gt_hallucination_score(t.augmented, t.gt_image));
        EXPECT_TRUE(t.gt_image == render(gt, t.camera).image);
        EXPECT_TRUE(t.splat_render == render(trained, t.camera).image);
        EXPECT_TRUE(t.splat_depth.same_shape(t.gt_image));
    }
    const auto again = curate_triplets(gt, views, trained, cfg);
    for (std::size_t i = 0; i < triplets.size(); ++i) EXPECT_TRUE(triplets[i].augmented == again[i].augmented);
}

} // namespace
} // namespace had
