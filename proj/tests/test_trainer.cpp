// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "had/trainer.hpp"
#include "test_support.hpp"

namespace had {
namespace {

struct Scene {
    GaussianSetd gt;
    ViewSet views;
};

Scene small_scene(std::uint64_t seed, int size = 32, SceneKind kind = SceneKind::blob_field) {
    SceneSpec spec;
    spec.scene_kind = kind;
    spec.seed = seed;
    spec.width = spec.height = size;
    spec.num_gaussians = 120;
    auto [gt, views] = make_synthetic_scene(spec);
    return {gt, views};
}

TrainConfig quick_config(PipelineMode mode, int iters = 40) {
    TrainConfig c;
    c.total_iters = iters;
    c.num_gaussians = 60;
    c.aug_interval = 10;
    c.novel_views_per_round = 2;
    c.pipeline_mode = mode;
    c.score_source = ScoreSource::oracle;
    c.mask = {ThresholdMode::absolute, 0.1};
    c.seed = 4;
    return c;
}

/// Kolmogorov-Smirnov p-value of `xs` against Uniform(0, 1), asymptotic series.
double ks_uniform_p(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = double(xs.size());
    double d = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        d = std::max({d, (double(i) + 1) / n - xs[i], xs[i] - double(i) / n});
    const double sn = std::sqrt(n);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0;
    for (int k = 1; k <= 100; ++k) p += 2 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

TEST(TrainConfig, DefaultsReadBack) {
    const TrainConfig c;
    EXPECT_EQ(c.lr_mean, 8e-5);
    EXPECT_EQ(c.lr_opacity, 5e-2);
    EXPECT_EQ(c.lr_rotation, 1e-3);
    EXPECT_EQ(c.lr_sh0, 5e-4);
    EXPECT_EQ(c.lr_shN, 2.5e-5);
    EXPECT_EQ(c.lambda_input, 1.0);
    EXPECT_EQ(c.lambda_novel, 1.0);
    EXPECT_EQ(c.k_versions, 3);
    EXPECT_FALSE(c.two_phase);
    EXPECT_EQ(c.mask.mode, ThresholdMode::absolute);
    EXPECT_EQ(c.mask.threshold, 0.9);
    EXPECT_EQ(c.input_weights.l1, 0.8);
    EXPECT_EQ(c.input_weights.dssim, 0.2);
    EXPECT_EQ(c.novel_views_per_round, 4);
    EXPECT_EQ(c.effective_aug_interval(), c.total_iters / 10);
}

TEST(TrainConfig, ValidationErrors) {
    auto bad = [](auto edit) {
        TrainConfig c;
        edit(c);
        return c;
    };
    EXPECT_THROW(bad([](TrainConfig &c) { c.lr_mean = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](TrainConfig &c) { c.k_versions = 0; }).validate(), ConfigError);
    EXPECT_THROW(bad([](TrainConfig &c) { c.total_iters = -1; }).validate(), ConfigError);
    EXPECT_THROW(bad([](TrainConfig &c) { c.mask = {ThresholdMode::quantile, 1.2}; }).validate(), ConfigError);
    EXPECT_THROW(bad([](TrainConfig &c) { c.sh_degree = 2; }).validate(), ConfigError);
    EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(TrainConfig, ProgressiveSchedule) {
    TrainConfig c;
    c.total_iters = 1000;
    EXPECT_EQ(c.u_max(0), 0.0);
    EXPECT_NEAR(c.u_max(350), 0.5, 1e-15);
    EXPECT_EQ(c.u_max(700), 1.0);
    EXPECT_EQ(c.u_max(999), 1.0);
}

TEST(InitGaussians, CountContainmentAndDeterminism) {
    const auto s = small_scene(1);
    const auto a = init_gaussians(s.views, 100, 7);
    const auto b = init_gaussians(s.views, 100, 7);
    ASSERT_EQ(a.size(), 100u);
    EXPECT_TRUE(a == b);
    const auto bounds = estimate_scene_bounds(s.views);
    for (const auto &g : a.primitives) {
        EXPECT_LE((g.mean - bounds.center).cwiseAbs().maxCoeff(), bounds.radius);
        EXPECT_NEAR(g.opacity(), 0.1, 1e-12);
        EXPECT_EQ(g.log_scale(0), g.log_scale(1));
        EXPECT_EQ(g.log_scale(1), g.log_scale(2));
    }
    EXPECT_FALSE(a == init_gaussians(s.views, 100, 8));
    EXPECT_THROW(init_gaussians(s.views, 0, 7), ConfigError);
}

TEST(InitGaussians, ScaleFactorShrinksIsotropically) {
    const auto s = small_scene(2);
    const auto a = init_gaussians(s.views, 50, 3, 0, 1.0);
    const auto b = init_gaussians(s.views, 50, 3, 0, 0.5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.primitives[i].mean, b.primitives[i].mean);
        EXPECT_NEAR(b.primitives[i].log_scale(0), std::max(a.primitives[i].log_scale(0) + std::log(0.5), std::log(1e-4)),
                    1e-12);
    }
}

TEST(InitGaussians, BeatsBackgroundOnlyRender) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = small_scene(100 + seed, 32, seed % 2 ? SceneKind::textured_room : SceneKind::blob_field);
        auto init = init_gaussians(s.views, 200, seed);
        init.background_color = s.gt.background_color;
        GaussianSetd empty;
        empty.background_color = s.gt.background_color;
        double init_psnr = 0, bg_psnr = 0;
        const auto inputs = s.views.indices(ViewRole::input);
        for (int vi : inputs) {
            const auto &v = s.views.views[vi];
            init_psnr += psnr(render(init, v.camera).image, v.image);
            bg_psnr += psnr(render(empty, v.camera).image, v.image);
        }
        EXPECT_GT(init_psnr, bg_psnr) << "seed " << seed;
    }
}

TEST(SampleNovelPose, IterationZeroReturnsNearestInput) {
    const auto s = small_scene(3);
    TrainConfig c;
    c.total_iters = 100;
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto p = sample_novel_pose(s.views, 0, c, rng);
        EXPECT_EQ(p.u, 0.0);
        EXPECT_EQ(s.views.views[p.target_index].role, ViewRole::target);
        EXPECT_EQ(p.input_index, nearest_input_views(s.views, s.views.views[p.target_index].camera, 1).front());
        EXPECT_TRUE(p.camera == s.views.views[p.input_index].camera);
    }
}

TEST(SampleNovelPose, LateIterationsReachTargets) {
    const auto s = small_scene(4);
    TrainConfig c;
    c.total_iters = 100;
    Rng rng(2);
    double hi = 0;
    for (int t = 0; t < 2000; ++t) hi = std::max(hi, sample_novel_pose(s.views, 70, c, rng).u);
    EXPECT_GT(hi, 0.99);
    EXPECT_LE(hi, 1.0);
}

TEST(SampleNovelPose, MidTrainingUniformOnHalfRange) {
    const auto s = small_scene(5);
    TrainConfig c;
    c.total_iters = 1000;
    Rng rng(3);
    std::vector<double> us;
    for (int t = 0; t < 1000; ++t) {
        const double u = sample_novel_pose(s.views, 350, c, rng).u;
        ASSERT_LE(u, 0.5);
        us.push_back(u / 0.5);
    }
    EXPECT_GT(ks_uniform_p(us), 0.01);
}

TEST(AugmentationRound, SplatOnlyProducesNothing) {
    const auto s = small_scene(6);
    Trainer tr(s.views, s.gt, quick_config(PipelineMode::splat_only));
    EXPECT_TRUE(tr.augmentation_round().empty());
}

TEST(AugmentationRound, SingleVersionIsFusionIdentity) {
    const auto s = small_scene(7);
    auto cfg = quick_config(PipelineMode::had);
    cfg.k_versions = 3; // ignored outside had_ms
    Trainer tr(s.views, s.gt, cfg);
    tr.set_iteration(20);
    const auto &pool = tr.augmentation_round();
    ASSERT_EQ(pool.size(), 2u);
    for (const auto &nv : pool) {
        const auto gt = render(s.gt, nv.view.camera).image;
        const auto splat = render(tr.model(), nv.view.camera).image;
        ASSERT_GE(nv.view.ref_view_index, 0);
        const std::uint64_t key = mix_seed(mix_seed(cfg.seed, 0), std::uint64_t(nv.slot));
        const auto single = simulate_prior(splat, gt, s.views.views[nv.view.ref_view_index], nv.view.ref_view_index,
                                           nv.view.camera, cfg.augmentor, key);
        EXPECT_TRUE(nv.view.image == single.image);
        EXPECT_TRUE(nv.score == single.gt_score);
        EXPECT_TRUE(nv.mask == score_to_mask(single.gt_score, cfg.mask));
    }
}

TEST(AugmentationRound, OracleFusionDominatesVersions) {
    const auto s = small_scene(8, 32, SceneKind::textured_room);
    auto cfg = quick_config(PipelineMode::had_ms);
    cfg.novel_views_per_round = 4;
    Trainer tr(s.views, s.gt, cfg);
    tr.set_iteration(30);
    tr.augmentation_round();
    tr.augmentation_round();
    const auto report = tr.run();
    ASSERT_FALSE(report.augmentation_log.empty());
    for (const auto &e : report.augmentation_log) {
        ASSERT_EQ(e.version_gt_mae.size(), 3u);
        ASSERT_EQ(e.ref_indices.size(), 3u);
        for (double v : e.version_gt_mae) EXPECT_LE(e.fused_gt_mae, v + 1e-15);
    }
}

TEST(AugmentationRound, StaleViewsAreReplaced) {
    const auto s = small_scene(9);
    Trainer tr(s.views, s.gt, quick_config(PipelineMode::aug_no_mask));
    tr.set_iteration(10);
    const auto first = tr.augmentation_round();
    const auto &second = tr.augmentation_round();
    ASSERT_EQ(second.size(), first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        EXPECT_EQ(second[i].slot, int(i));
        EXPECT_FALSE(second[i].mask.data.any());
    }
    EXPECT_FALSE(first[0].view.image == second[0].view.image);
}

TEST(Train, ZeroIterationsKeepsInitialization) {
    const auto s = small_scene(10);
    auto cfg = quick_config(PipelineMode::had, 0);
    const auto report = train(s.views, s.gt, cfg);
    auto init = init_gaussians(s.views, cfg.num_gaussians, mix_seed(cfg.seed, 0));
    init.background_color = s.gt.background_color;
    EXPECT_TRUE(report.final_set == init);
    EXPECT_TRUE(report.input_loss.empty());
}

TEST(Train, MaskAllTrueMatchesSplatOnlyBitForBit) {
    const auto s = small_scene(11);
    auto base = quick_config(PipelineMode::splat_only, 60);
    base.record_param_hashes = true;
    auto masked = base;
    masked.pipeline_mode = PipelineMode::had_ms;
    masked.mask_override = MaskOverride::all_true;
    const auto a = train(s.views, s.gt, base);
    const auto b = train(s.views, s.gt, masked);
    EXPECT_FALSE(b.augmentation_log.empty());
    EXPECT_EQ(a.param_hashes, b.param_hashes);
    EXPECT_TRUE(a.final_set == b.final_set);
}

TEST(Train, AugmentedViewsChangeTheTrajectory) {
    const auto s = small_scene(12);
    auto base = quick_config(PipelineMode::splat_only, 30);
    auto aug = base;
    aug.pipeline_mode = PipelineMode::aug_no_mask;
    EXPECT_FALSE(train(s.views, s.gt, base).final_set == train(s.views, s.gt, aug).final_set);
}

TEST(Train, DeterministicForFixedSeed) {
    const auto s = small_scene(13);
    const auto cfg = quick_config(PipelineMode::had_ms, 30);
    const auto a = train(s.views, s.gt, cfg), b = train(s.views, s.gt, cfg);
    EXPECT_TRUE(a.final_set == b.final_set);
    EXPECT_EQ(a.input_loss, b.input_loss);
    ASSERT_EQ(a.checkpoints.size(), b.checkpoints.size());
    EXPECT_EQ(a.checkpoints.back().test_psnr, b.checkpoints.back().test_psnr);
}

TEST(Train, MultiSamplingWithOneVersionEqualsHad) {
    const auto s = small_scene(14);
    auto had = quick_config(PipelineMode::had, 30);
    had.k_versions = 3; // ignored outside had_ms
    had.record_param_hashes = true;
    auto ms = had;
    ms.pipeline_mode = PipelineMode::had_ms;
    ms.k_versions = 1;
    EXPECT_EQ(train(s.views, s.gt, had).param_hashes, train(s.views, s.gt, ms).param_hashes);
}

TEST(Train, ParametersStayValid) {
    const auto s = small_scene(14);
    auto cfg = quick_config(PipelineMode::aug_no_mask, 50);
    cfg.eval_interval = 25;
    const auto r = train(s.views, s.gt, cfg);
    for (const auto &g : r.final_set.primitives) {
        EXPECT_NEAR(g.rotation.norm(), 1.0, 1e-12);
        EXPECT_TRUE(std::isfinite(g.opacity_logit));
        EXPECT_TRUE(g.mean.allFinite() && g.sh.allFinite());
    }
    ASSERT_EQ(r.checkpoints.size(), 2u);
    EXPECT_LT(r.checkpoints[0].iteration, r.checkpoints[1].iteration);
    EXPECT_EQ(r.input_loss.size(), 50u);
}

TEST(Train, LearnedScoresNeedAScorer) {
    const auto s = small_scene(15);
    auto cfg = quick_config(PipelineMode::had);
    cfg.score_source = ScoreSource::learned;
    EXPECT_THROW(Trainer(s.views, s.gt, cfg), ConfigError);
}

TEST(Train, TwoPhaseDelaysAugmentation) {
    const auto s = small_scene(16);
    auto cfg = quick_config(PipelineMode::aug_no_mask, 40);
    cfg.two_phase = true;
    cfg.two_phase_fraction = 0.5;
    const auto r = train(s.views, s.gt, cfg);
    ASSERT_FALSE(r.augmentation_log.empty());
    for (const auto &e : r.augmentation_log) EXPECT_GE(e.iteration, 20);
    for (int i = 0; i < 20; ++i) EXPECT_TRUE(std::isnan(r.novel_loss[i]));
}

TEST(Train, OverfitsASingleView) {
    SceneSpec spec;
    spec.seed = 17;
    const auto [gt, all] = make_synthetic_scene(spec);
    ViewSet one;
    one.views.push_back(all.views[all.indices(ViewRole::input)[4]]);
    TrainConfig cfg;
    cfg.total_iters = 2000;
    cfg.num_gaussians = 200;
    cfg.pipeline_mode = PipelineMode::splat_only;
    cfg.seed = 1;
    Trainer tr(one, gt, cfg);
    tr.run();
    const auto rows = evaluate(tr.model(), one, {ViewRole::input});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_GT(rows[0].psnr, 30.0);
}

TEST(Evaluate, GroundTruthHitsTheCap) {
    const auto s = small_scene(18);
    const auto rows = evaluate(s.gt, s.views, {ViewRole::input, ViewRole::test});
    EXPECT_EQ(int(rows.size()), s.views.count(ViewRole::input) + s.views.count(ViewRole::test));
    for (const auto &r : rows) {
        EXPECT_EQ(r.psnr, kPsnrCap);
        EXPECT_NEAR(r.ssim, 1.0, 1e-12);
    }
    EXPECT_THROW(evaluate(s.gt, s.views, {}), ContractViolation);
}

TEST(Evaluate, MatchesScalarRecomputation) {
    const auto s = small_scene(19);
    const auto model = init_gaussians(s.views, 80, 2);
    for (const auto &r : evaluate(model, s.views, {ViewRole::test})) {
        const auto &v = s.views.views[r.view_index];
        const auto img = render(model, v.camera).image;
        double se = 0;
        for (int y = 0; y < v.image.height; ++y)
            for (int x = 0; x < v.image.width; ++x)
                for (int c = 0; c < 3; ++c) se += std::pow(img(x, y, c) - v.image(x, y, c), 2);
        EXPECT_NEAR(r.psnr, 10 * std::log10(1.0 / (se / (3.0 * v.image.size()))), 1e-9);
        EXPECT_EQ(ssim(img, v.image), ssim(v.image, img));
    }
}

TEST(PipelineMode, StringRoundTrip) {
    for (auto m : {PipelineMode::splat_only, PipelineMode::aug_no_mask, PipelineMode::had, PipelineMode::had_ms})
        EXPECT_EQ(pipeline_mode_from_string(to_string(m)), m);
    EXPECT_THROW(pipeline_mode_from_string("full"), ConfigError);
}

} // namespace
} // namespace had
