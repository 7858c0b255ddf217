// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace had {

TrainConfig Arm::apply(TrainConfig base) const {
    base.pipeline_mode = mode;
    base.k_versions = k_versions;
    base.fusion = fusion;
    if (mask) base.mask = *mask;
    return base;
}

void ExperimentPreset::validate() const {
    if (seeds.empty()) throw ConfigError("preset " + name + ": seeds must be nonempty");
    if (scenes.empty()) throw ConfigError("preset " + name + ": no scenes");
    for (const auto &s : scenes) s.validate();
    for (const auto &s : scorer.scenes) s.validate();
    base.validate();
    if (name == "scorer_eval") {
        if (!(train_triplets > 0 && train_triplets < triplet_count))
            throw ConfigError("preset scorer_eval: need 0 < train_triplets < triplet_count");
    } else if (arms.empty()) {
        throw ConfigError("preset " + name + ": no arms");
    }
}

namespace {

SceneSpec desk_scene(SceneKind kind, std::uint64_t seed) {
    SceneSpec s;
    s.scene_kind = kind;
    s.seed = seed;
    return s;
}

std::vector<SceneSpec> eval_scenes() {
    std::vector<SceneSpec> out;
    for (std::uint64_t i = 0; i < 5; ++i)
        out.push_back(desk_scene(i % 2 == 0 ? SceneKind::blob_field : SceneKind::textured_room, 11 + i));
    return out;
}

std::vector<SceneSpec> scorer_scenes(int count, std::uint64_t first_seed) {
    std::vector<SceneSpec> out;
    for (int i = 0; i < count; ++i)
        out.push_back(desk_scene(i % 2 == 0 ? SceneKind::blob_field : SceneKind::textured_room, first_seed + i));
    return out;
}

TrainConfig desk_config() {
    TrainConfig c;
    c.total_iters = 500;
    c.num_gaussians = 300;
    c.init_scale_factor = 0.5;
    c.aug_interval = 50;
    c.novel_views_per_round = 4;
    c.mask = {ThresholdMode::absolute, 0.07};
    return c;
}

Arm arm(std::string method, PipelineMode mode, int k = 3, FusionMethod fusion = FusionMethod::argmin,
        std::optional<MaskConfig> mask = std::nullopt) {
    return {std::move(method), mode, k, fusion, mask};
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double mean_finite(const std::vector<double> &v) {
    double sum = 0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

std::vector<std::string> preset_names() {
    return {"ablate_components", "ablate_k", "ablate_fusion", "ablate_threshold", "scorer_eval"};
}

ExperimentPreset make_preset(const std::string &name) {
    ExperimentPreset p;
    p.name = name;
    p.scenes = eval_scenes();
    p.seeds = {1, 2, 3};
    p.base = desk_config();
    p.scorer.scenes = scorer_scenes(4, 901);
    if (name == "ablate_components") {
        p.arms = {arm("splat_only", PipelineMode::splat_only), arm("aug_no_mask", PipelineMode::aug_no_mask),
                  arm("had", PipelineMode::had, 1), arm("had_ms", PipelineMode::had_ms, 3)};
    } else if (name == "ablate_k") {
        p.arms = {arm("K1", PipelineMode::had_ms, 1), arm("K2", PipelineMode::had_ms, 2),
                  arm("K3", PipelineMode::had_ms, 3)};
    } else if (name == "ablate_fusion") {
        p.arms = {arm("argmin", PipelineMode::had_ms, 3, FusionMethod::argmin),
                  arm("weighted", PipelineMode::had_ms, 3, FusionMethod::weighted)};
    } else if (name == "ablate_threshold") {
        const std::pair<const char *, MaskConfig> sweep[] = {
            {"abs_0.5", {ThresholdMode::absolute, 0.5}},      {"abs_0.7", {ThresholdMode::absolute, 0.7}},
            {"abs_0.9", {ThresholdMode::absolute, 0.9}},      {"quantile_0.8", {ThresholdMode::quantile, 0.8}},
            {"quantile_0.9", {ThresholdMode::quantile, 0.9}}, {"quantile_0.95", {ThresholdMode::quantile, 0.95}}};
        for (const auto &[label, mask] : sweep)
            p.arms.push_back(arm(label, PipelineMode::had_ms, 3, FusionMethod::argmin, mask));
    } else if (name == "scorer_eval") {
        // 10 scenes x 12 non-input views, truncated to the first 116 triplets
        p.scorer.scenes = scorer_scenes(7, 901);
        p.scenes = scorer_scenes(3, 951);
        p.seeds = {0};
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return p;
}

std::string scene_label(const SceneSpec &spec) { return to_string(spec.scene_kind) + "_" + std::to_string(spec.seed); }

SceneTriplets curate_scene_triplets(const SceneSpec &spec, const TrainConfig &base, int pretrain_iters) {
    const auto [gt, views] = make_synthetic_scene(spec);
    TrainConfig cfg = base;
    cfg.pipeline_mode = PipelineMode::splat_only;
    cfg.total_iters = pretrain_iters;
    cfg.eval_interval = 0;
    cfg.record_param_hashes = false;
    const TrainReport report = train(views, gt, cfg);
    SceneTriplets out;
    out.scene = scene_label(spec);
    out.refs = make_references(views, report.final_set);
    out.depth_tolerance = default_depth_tolerance(views);
    out.triplets = curate_triplets(gt, views, report.final_set, cfg.augmentor);
    return out;
}

ScorerModel fit_scorer_on(const std::vector<SceneTriplets> &data, double ridge, const FeatureMask &mask) {
    std::vector<FeatureSample> samples;
    for (const auto &scene : data) {
        auto s = triplet_features(scene.triplets, scene.refs, scene.depth_tolerance);
        for (auto &x : s) samples.push_back(std::move(x));
    }
    return fit_scorer(samples, ridge, mask);
}

ScorerModel fit_preset_scorer(const ExperimentPreset &preset) {
    std::vector<SceneTriplets> data;
    for (const auto &spec : preset.scorer.scenes)
        data.push_back(curate_scene_triplets(spec, preset.base, preset.scorer.pretrain_iters));
    return fit_scorer_on(data, preset.scorer.ridge, preset.scorer.feature_mask);
}

std::vector<ResultRow> run_preset(const ExperimentPreset &preset, const std::function<void(const CellResult &)> &on_cell) {
    preset.validate();
    std::optional<ScorerModel> scorer;
    for (const auto &a : preset.arms) {
        const TrainConfig cfg = a.apply(preset.base);
        const bool learned = (cfg.pipeline_mode == PipelineMode::had || cfg.pipeline_mode == PipelineMode::had_ms) &&
                             cfg.score_source == ScoreSource::learned && cfg.mask_override == MaskOverride::none;
        if (learned && !scorer) scorer = fit_preset_scorer(preset);
    }

    std::vector<ResultRow> rows;
    for (const auto &spec : preset.scenes) {
        const auto [gt, views] = make_synthetic_scene(spec);
        for (const auto seed : preset.seeds)
            for (const auto &a : preset.arms) {
                TrainConfig cfg = a.apply(preset.base);
                cfg.seed = seed;
                CellResult cell;
                cell.report = train(views, gt, cfg, scorer);
                const Checkpoint &last = cell.report.checkpoints.back();
                std::vector<double> maes;
                for (const auto &e : cell.report.augmentation_log) maes.push_back(e.score_mae);
                cell.row = {last.test_psnr, last.test_ssim, mean_finite(maes), scene_label(spec), a.method, seed};
                rows.push_back(cell.row);
                if (on_cell) on_cell(cell);
            }
    }
    return rows;
}

std::vector<ResultRow> run_scorer_eval(const ExperimentPreset &preset) {
    preset.validate();
    std::vector<ResultRow> rows;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto seed : preset.seeds) {
        TrainConfig base = preset.base;
        base.augmentor.seed = seed;
        std::vector<SceneTriplets> all;
        for (const auto &spec : preset.scorer.scenes)
            all.push_back(curate_scene_triplets(spec, base, preset.scorer.pretrain_iters));
        for (const auto &spec : preset.scenes)
            all.push_back(curate_scene_triplets(spec, base, preset.scorer.pretrain_iters));

        // split the first triplet_count triplets, in scene order, into train and held-out parts
        std::vector<SceneTriplets> train_part, held_out;
        int taken = 0;
        for (auto &scene : all) {
            SceneTriplets tr{scene.scene, {}, scene.refs, scene.depth_tolerance};
            SceneTriplets ho{scene.scene, {}, scene.refs, scene.depth_tolerance};
            for (auto &t : scene.triplets) {
                if (taken >= preset.triplet_count) break;
                (taken < preset.train_triplets ? tr : ho).triplets.push_back(std::move(t));
                ++taken;
            }
            if (!tr.triplets.empty()) train_part.push_back(std::move(tr));
            if (!ho.triplets.empty()) held_out.push_back(std::move(ho));
        }
        if (taken < preset.triplet_count) throw ConfigError("scorer_eval: scenes provide too few triplets");

        const ScorerModel model = fit_scorer_on(train_part, preset.scorer.ridge, preset.scorer.feature_mask);
        double target_sum = 0, target_count = 0;
        for (const auto &scene : train_part)
            for (const auto &t : scene.triplets) {
                target_sum += t.gt_score.data.sum();
                target_count += double(t.gt_score.size());
            }
        const double constant = target_sum / target_count;

        for (const auto &scene : held_out) {
            const auto samples = triplet_features(scene.triplets, scene.refs, scene.depth_tolerance);
            double learned = 0, baseline = 0;
            for (const auto &s : samples) {
                learned += score_map_mae(predict_score(model, s.features), s.target);
                baseline += (s.target.data - constant).abs().mean();
            }
            learned /= double(samples.size());
            baseline /= double(samples.size());
            rows.push_back({nan, nan, learned, scene.scene, "learned", seed});
            rows.push_back({nan, nan, baseline, scene.scene, "constant_mean", seed});
        }
    }
    return rows;
}

std::vector<ResultRow> run_any_preset(const ExperimentPreset &preset,
                                      const std::function<void(const CellResult &)> &on_cell) {
    return preset.name == "scorer_eval" ? run_scorer_eval(preset) : run_preset(preset, on_cell);
}

std::vector<MethodSummary> summarize(const std::vector<ResultRow> &rows) {
    std::vector<MethodSummary> out;
    for (const auto &r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto &m) { return m.method == r.method; });
        if (it == out.end()) {
            out.push_back({});
            out.back().method = r.method;
        }
    }
    for (auto &m : out) {
        std::vector<double> psnr, ssim, mae;
        for (const auto &r : rows)
            if (r.method == m.method) {
                psnr.push_back(r.psnr);
                ssim.push_back(r.ssim);
                mae.push_back(r.score_mae);
            }
        auto stats = [](const std::vector<double> &v, double &mean, double &sd) {
            mean = 0;
            for (double x : v) mean += x;
            mean /= double(v.size());
            sd = 0;
            for (double x : v) sd += (x - mean) * (x - mean);
            sd = v.size() > 1 ? std::sqrt(sd / double(v.size() - 1)) : 0.0;
        };
        m.count = int(psnr.size());
        stats(psnr, m.psnr_mean, m.psnr_std);
        stats(ssim, m.ssim_mean, m.ssim_std);
        m.score_mae_mean = mean_finite(mae);
    }
    return out;
}

void write_results_csv(std::ostream &os, const std::vector<ResultRow> &rows, const std::string &comment) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << kResultsHeader << '\n';
    for (const auto &r : rows)
        os << fmt(r.psnr) << ',' << fmt(r.ssim) << ',' << fmt(r.score_mae) << ',' << r.scene << ',' << r.method << ','
           << r.seed << '\n';
}

void write_summary_csv(std::ostream &os, const std::vector<MethodSummary> &summary) {
    os << "method,n,psnr_mean,psnr_std,ssim_mean,ssim_std,score_mae_mean\n";
    for (const auto &m : summary)
        os << m.method << ',' << m.count << ',' << fmt(m.psnr_mean) << ',' << fmt(m.psnr_std) << ','
           << fmt(m.ssim_mean) << ',' << fmt(m.ssim_std) << ',' << fmt(m.score_mae_mean) << '\n';
}

} // namespace had
