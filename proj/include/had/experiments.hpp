// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "had/scorer.hpp"
#include "had/trainer.hpp"

namespace had {

/// One column of an ablation matrix: a method label and the settings it changes.
struct Arm {
    std::string method;
    PipelineMode mode = PipelineMode::had_ms;
    int k_versions = 3;
    FusionMethod fusion = FusionMethod::argmin;
    std::optional<MaskConfig> mask;

    TrainConfig apply(TrainConfig base) const;
};

struct ScorerFitSpec {
    std::vector<SceneSpec> scenes;
    /// Splat-only iterations used to produce realistic renders for curation.
    int pretrain_iters = 200;
    double ridge = 1e-6;
    FeatureMask feature_mask = kAllFeatures;
};

struct ExperimentPreset {
    std::string name;
    std::vector<SceneSpec> scenes;
    std::vector<std::uint64_t> seeds;
    TrainConfig base;
    std::vector<Arm> arms;
    ScorerFitSpec scorer;
    /// scorer_eval only: total number of curated triplets and how many train the scorer.
    int triplet_count = 116;
    int train_triplets = 84;

    void validate() const;
};

std::vector<std::string> preset_names();
ExperimentPreset make_preset(const std::string &name);

std::string scene_label(const SceneSpec &spec);

struct SceneTriplets {
    std::string scene;
    std::vector<ScorerTriplet> triplets;
    std::vector<ReferenceView> refs;
    double depth_tolerance = 0;
};

/// Pretrains a splat-only model on the scene and curates one triplet per non-input view.
SceneTriplets curate_scene_triplets(const SceneSpec &spec, const TrainConfig &base, int pretrain_iters);

ScorerModel fit_scorer_on(const std::vector<SceneTriplets> &data, double ridge, const FeatureMask &mask);
ScorerModel fit_preset_scorer(const ExperimentPreset &preset);

struct ResultRow {
    double psnr = 0;
    double ssim = 0;
    double score_mae = 0;
    std::string scene;
    std::string method;
    std::uint64_t seed = 0;
};

struct CellResult {
    ResultRow row;
    TrainReport report;
};

/// Runs every scene x seed x arm cell in fixed order.
std::vector<ResultRow> run_preset(const ExperimentPreset &preset,
                                  const std::function<void(const CellResult &)> &on_cell = {});

/// Held-out score MAE of the fitted scorer and of the constant training-mean predictor.
std::vector<ResultRow> run_scorer_eval(const ExperimentPreset &preset);

std::vector<ResultRow> run_any_preset(const ExperimentPreset &preset,
                                      const std::function<void(const CellResult &)> &on_cell = {});

struct MethodSummary {
    std::string method;
    int count = 0;
    double psnr_mean = 0, psnr_std = 0;
    double ssim_mean = 0, ssim_std = 0;
    double score_mae_mean = 0;
};

/// Per-method mean and sample standard deviation, in first-appearance order.
std::vector<MethodSummary> summarize(const std::vector<ResultRow> &rows);

inline constexpr const char *kResultsHeader = "psnr,ssim,score_mae,scene,method,seed";

void write_results_csv(std::ostream &os, const std::vector<ResultRow> &rows, const std::string &comment = "");
void write_summary_csv(std::ostream &os, const std::vector<MethodSummary> &summary);

} // namespace had
