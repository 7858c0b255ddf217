// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "had/augmentor.hpp"
#include "had/fusion.hpp"
#include "had/losses.hpp"
#include "had/rasterizer.hpp"
#include "had/rng.hpp"
#include "had/scene.hpp"
#include "had/scorer.hpp"

namespace had {

enum class PipelineMode { splat_only, aug_no_mask, had, had_ms };
enum class ScoreSource { learned, oracle };
/// Forces every novel-view mask to exclude everything (all_true) or nothing (all_false).
enum class MaskOverride { none, all_true, all_false };

std::string to_string(PipelineMode mode);
PipelineMode pipeline_mode_from_string(const std::string &s);

struct TrainConfig {
    double lambda_input = 1.0;
    double lambda_novel = 1.0;

    double lr_mean = 8e-5;
    double lr_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_rotation = 1e-3;
    double lr_sh0 = 5e-4;
    double lr_shN = 2.5e-5;
    /// Multiplies lr_mean, as the scene extent does in standard 3DGS.
    double spatial_lr_scale = 1.0;
    /// Global multiplier on every learning rate.
    double lr_multiplier = 1.0;

    int total_iters = 2000;
    /// Iterations between augmentation rounds; 0 selects total_iters / 10.
    int aug_interval = 0;
    int novel_views_per_round = 4;
    int k_versions = 3;
    /// Fraction of training after which novel poses may reach the target pose.
    double prog_fraction = 0.7;

    MaskConfig mask = default_mask_config();
    PipelineMode pipeline_mode = PipelineMode::had;
    FusionMethod fusion = FusionMethod::argmin;
    double fusion_temperature = 0.1;

    bool two_phase = false;
    /// Share of total_iters spent on input views only when two_phase is set.
    double two_phase_fraction = 0.5;

    LossWeights input_weights = input_loss_weights();
    LossWeights novel_weights = novel_loss_weights();
    MaskedSsim masked_ssim = MaskedSsim::zero_operands;
    ScoreSource score_source = ScoreSource::learned;
    MaskOverride mask_override = MaskOverride::none;

    int num_gaussians = 300;
    double init_scale_factor = 1.0; // multiplies the nearest-neighbor initial scale
    int sh_degree = 0;
    /// Test-view evaluation cadence; 0 evaluates only at the end.
    int eval_interval = 0;
    bool record_param_hashes = false;
    std::uint64_t seed = 0;

    AugmentorConfig augmentor;

    double u_max(int iter) const;
    int effective_aug_interval() const;
    /// Number of simulator versions generated per novel pose.
    int versions_per_pose() const;
    void validate() const;
};

struct NovelPose {
    Camerad camera;
    double u = 0;
    int target_index = -1;
    int input_index = -1;
};

GaussianSetd init_gaussians(const ViewSet &views, int n, std::uint64_t seed, int sh_degree = 0,
                            double scale_factor = 1.0);

NovelPose sample_novel_pose(const ViewSet &views, int iter, const TrainConfig &cfg, Rng &rng);

struct MetricRow {
    int view_index = -1;
    ViewRole role = ViewRole::test;
    double psnr = 0;
    double ssim = 0;
};

std::vector<MetricRow> evaluate(const GaussianSetd &set, const ViewSet &views, const std::vector<ViewRole> &roles);

struct NovelTrainingView {
    AugmentedView view;
    BinaryMask mask;
    ScoreMap score;
    int slot = 0;
};

struct AugmentationLogEntry {
    int round = 0;
    int iteration = 0;
    int slot = 0;
    double u = 0;
    int target_index = -1;
    int input_index = -1;
    std::vector<int> ref_indices;
    /// Fraction of pixels excluded by the mask.
    double mask_fraction = 0;
    double fused_gt_mae = 0;
    std::vector<double> version_gt_mae;
    /// Mean |predicted - true| score of the fused view; NaN when unscored.
    double score_mae = std::numeric_limits<double>::quiet_NaN();
};

struct Checkpoint {
    int iteration = 0;
    double test_psnr = 0;
    double test_ssim = 0;
};

struct TrainReport {
    std::vector<Checkpoint> checkpoints;
    GaussianSetd final_set;
    std::vector<double> input_loss;
    /// NaN where no novel view was trained on.
    std::vector<double> novel_loss;
    std::vector<AugmentationLogEntry> augmentation_log;
    /// Parameter hash after every step, when requested.
    std::vector<std::uint64_t> param_hashes;
    std::vector<MetricRow> final_metrics;
};

std::uint64_t parameter_hash(const GaussianSetd &set);

/// Adam state over a flattened parameter layout with per-group learning rates.
class AdamOptimizer {
public:
    static constexpr int kStride = 23;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamOptimizer(const TrainConfig &cfg);

    void step(GaussianSetd &set, const ParamGradients<double> &grad);
    long steps() const { return t_; }

private:
    Eigen::Matrix<double, kStride, 1> lr_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

class Trainer {
public:
    /// `scorer` is required for had and had_ms with learned scores.
    Trainer(const ViewSet &views, const GaussianSetd &gt_scene, TrainConfig cfg,
            std::optional<ScorerModel> scorer = std::nullopt);

    const GaussianSetd &model() const { return model_; }
    void set_model(GaussianSetd set);
    int iteration() const { return iter_; }
    void set_iteration(int iter) { iter_ = iter; }
    const TrainConfig &config() const { return cfg_; }
    const std::vector<NovelTrainingView> &pool() const { return pool_; }

    /// Generates augmented views for the current model and replaces the pool slots.
    const std::vector<NovelTrainingView> &augmentation_round();
    /// One optimization step.
    void step();
    TrainReport run();

    std::function<void(int round, const std::vector<NovelTrainingView> &)> round_observer;

private:
    bool is_round_iteration(int it) const;
    NovelTrainingView augment_pose(const NovelPose &pose, int slot, std::span<const ReferenceView> refs,
                                   AugmentationLogEntry &log);

    const ViewSet &views_;
    const GaussianSetd &gt_scene_;
    TrainConfig cfg_;
    std::optional<ScorerModel> scorer_;
    GaussianSetd model_;
    AdamOptimizer adam_;
    Rng train_rng_, novel_rng_;
    std::vector<int> input_indices_;
    std::vector<NovelTrainingView> pool_;
    double depth_tolerance_ = 0;
    int iter_ = 0;
    int round_ = 0;
    TrainReport report_;
};

TrainReport train(const ViewSet &views, const GaussianSetd &gt_scene, const TrainConfig &cfg,
                  std::optional<ScorerModel> scorer = std::nullopt);

} // namespace had
