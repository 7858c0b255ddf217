// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "had/rasterizer.hpp"

namespace had {

std::string to_string(PipelineMode mode) {
    switch (mode) {
    case PipelineMode::splat_only: return "splat_only";
    case PipelineMode::aug_no_mask: return "aug_no_mask";
    case PipelineMode::had: return "had";
    case PipelineMode::had_ms: return "had_ms";
    }
    return "unknown";
}

PipelineMode pipeline_mode_from_string(const std::string &s) {
    if (s == "splat_only") return PipelineMode::splat_only;
    if (s == "aug_no_mask") return PipelineMode::aug_no_mask;
    if (s == "had") return PipelineMode::had;
    if (s == "had_ms") return PipelineMode::had_ms;
    throw ConfigError("unknown pipeline mode: " + s);
}

double TrainConfig::u_max(int iter) const {
    const double horizon = prog_fraction * total_iters;
    if (!(horizon > 0)) return 1.0;
    return std::clamp(iter / horizon, 0.0, 1.0);
}

int TrainConfig::effective_aug_interval() const {
    return aug_interval > 0 ? aug_interval : std::max(1, total_iters / 10);
}

int TrainConfig::versions_per_pose() const { return pipeline_mode == PipelineMode::had_ms ? k_versions : 1; }

void TrainConfig::validate() const {
    for (double lr : {lr_mean, lr_scale, lr_opacity, lr_rotation, lr_sh0, lr_shN, spatial_lr_scale, lr_multiplier})
        if (!(lr > 0)) throw ConfigError("train config: learning rates and multipliers must be > 0");
    if (!(lambda_input >= 0 && lambda_novel >= 0)) throw ConfigError("train config: loss weights must be >= 0");
    if (total_iters < 0) throw ConfigError("train config: total_iters must be >= 0");
    if (aug_interval < 0) throw ConfigError("train config: aug_interval must be >= 0");
    if (novel_views_per_round < 1) throw ConfigError("train config: novel_views_per_round must be >= 1");
    if (k_versions < 1) throw ConfigError("train config: K_versions must be >= 1");
    if (!(prog_fraction > 0 && prog_fraction <= 1)) throw ConfigError("train config: prog_fraction outside (0, 1]");
    if (!(fusion_temperature > 0)) throw ConfigError("train config: fusion temperature must be > 0");
    if (!(two_phase_fraction >= 0 && two_phase_fraction < 1))
        throw ConfigError("train config: two_phase_fraction outside [0, 1)");
    if (num_gaussians < 1) throw ConfigError("train config: num_gaussians must be > 0");
    if (!(init_scale_factor > 0)) throw ConfigError("train config: init_scale_factor must be > 0");
    if (sh_degree < 0 || sh_degree > 1) throw ConfigError("train config: sh_degree must be 0 or 1");
    if (eval_interval < 0) throw ConfigError("train config: eval_interval must be >= 0");
    if (mask.mode == ThresholdMode::absolute ? !(mask.threshold >= 0) : !(mask.threshold >= 0 && mask.threshold <= 1))
        throw ConfigError("train config: invalid mask threshold");
    augmentor.validate();
}

namespace {

bool in_frustum(const Camerad &cam, const Eigen::Vector3d &p, Eigen::Vector2d &uv) {
    const Eigen::Vector3d t = cam.to_camera(p);
    if (!(t.z() > kNearPlane)) return false;
    uv = cam.project_camera(t);
    return uv.x() >= 0 && uv.x() < cam.width && uv.y() >= 0 && uv.y() < cam.height;
}

} // namespace

GaussianSetd init_gaussians(const ViewSet &views, int n, std::uint64_t seed, int sh_degree, double scale_factor) {
    if (n <= 0) throw ConfigError("init_gaussians: n must be > 0");
    if (!(scale_factor > 0)) throw ConfigError("init_gaussians: scale_factor must be > 0");
    views.validate();
    const auto inputs = views.indices(ViewRole::input);
    const SceneBounds bounds = estimate_scene_bounds(views);
    Rng rng(seed);

    GaussianSetd set;
    set.sh_degree = sh_degree;
    std::vector<Eigen::Vector3d> points;
    std::vector<Eigen::Vector3d> colors;
    const long max_attempts = 1000L * n + 100000L;
    for (long attempt = 0; attempt < max_attempts && int(points.size()) < n; ++attempt) {
        const Eigen::Vector3d p =
            bounds.center + bounds.radius * Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        bool inside = true;
        for (int vi : inputs) {
            const auto &view = views.views[vi];
            Eigen::Vector2d uv;
            if (!in_frustum(view.camera, p, uv)) {
                inside = false;
                break;
            }
            const int x = std::min(int(uv.x()), view.image.width - 1);
            const int y = std::min(int(uv.y()), view.image.height - 1);
            color += view.image.pixel(view.image.index(x, y)).matrix().transpose();
        }
        if (!inside) continue;
        points.push_back(p);
        colors.push_back(color / double(inputs.size()));
    }
    if (int(points.size()) < n) throw InitializationError("init_gaussians: input frusta do not intersect the scene bounds");

    for (int i = 0; i < n; ++i) {
        std::vector<double> d;
        d.reserve(points.size());
        for (int j = 0; j < n; ++j)
            if (j != i) d.push_back((points[i] - points[j]).norm());
        const int k = std::min<int>(3, int(d.size()));
        double scale = 0.1 * bounds.radius;
        if (k > 0) {
            std::partial_sort(d.begin(), d.begin() + k, d.end());
            scale = 0;
            for (int j = 0; j < k; ++j) scale += d[j];
            scale = std::max(scale_factor * scale / k, 1e-4);
        }
        Gaussian g;
        g.mean = points[i];
        g.log_scale.setConstant(std::log(scale));
        g.rotation = Eigen::Quaterniond::Identity();
        g.opacity_logit = logit(0.1);
        g.sh.setZero();
        g.sh.row(0) = colors[i].transpose();
        set.primitives.push_back(g);
    }
    return set;
}

NovelPose sample_novel_pose(const ViewSet &views, int iter, const TrainConfig &cfg, Rng &rng) {
    const auto targets = views.indices(ViewRole::target);
    if (targets.empty() || views.count(ViewRole::input) == 0)
        throw ContractViolation("sample_novel_pose: needs at least one input and one target view");
    NovelPose pose;
    pose.target_index = targets[rng.uniform_int(0, int(targets.size()) - 1)];
    const Camerad &target = views.views[pose.target_index].camera;
    pose.input_index = nearest_input_views(views, target, 1).front();
    pose.u = rng.uniform() * cfg.u_max(iter);
    pose.camera = interpolate_pose(views.views[pose.input_index].camera, target, pose.u);
    return pose;
}

std::vector<MetricRow> evaluate(const GaussianSetd &set, const ViewSet &views, const std::vector<ViewRole> &roles) {
    if (roles.empty()) throw ContractViolation("evaluate: no roles selected");
    std::vector<MetricRow> rows;
    for (int i = 0; i < int(views.views.size()); ++i) {
        const auto &view = views.views[i];
        if (std::find(roles.begin(), roles.end(), view.role) == roles.end()) continue;
        const auto out = render(set, view.camera);
        rows.push_back({i, view.role, psnr_capped(out.image, view.image), ssim(out.image, view.image)});
    }
    return rows;
}

std::uint64_t parameter_hash(const GaussianSetd &set) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const double *p, int count) {
        const auto *b = reinterpret_cast<const unsigned char *>(p);
        for (std::size_t i = 0; i < sizeof(double) * std::size_t(count); ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto &g : set.primitives) {
        mix(g.mean.data(), 3);
        mix(g.log_scale.data(), 3);
        mix(g.rotation.coeffs().data(), 4);
        mix(&g.opacity_logit, 1);
        mix(g.sh.data(), 12);
    }
    return h;
}

AdamOptimizer::AdamOptimizer(const TrainConfig &cfg) {
    const double m = cfg.lr_multiplier;
    lr_.segment<3>(0).setConstant(cfg.lr_mean * cfg.spatial_lr_scale * m);
    lr_.segment<3>(3).setConstant(cfg.lr_scale * m);
    lr_.segment<4>(6).setConstant(cfg.lr_rotation * m);
    lr_(10) = cfg.lr_opacity * m;
    lr_.segment<3>(11).setConstant(cfg.lr_sh0 * m);
    lr_.segment<9>(14).setConstant(cfg.lr_shN * m);
}

void AdamOptimizer::step(GaussianSetd &set, const ParamGradients<double> &grad) {
    const Eigen::Index n = Eigen::Index(set.size());
    if (Eigen::Index(grad.primitives.size()) != n) throw ContractViolation("adam: gradient does not match the set");
    if (m_.size() != n * kStride) {
        m_ = Eigen::VectorXd::Zero(n * kStride);
        v_ = Eigen::VectorXd::Zero(n * kStride);
        t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, double(t_));
    const double c2 = 1.0 - std::pow(beta2, double(t_));
    Eigen::Matrix<double, kStride, 1> g, p;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto &prim = set.primitives[std::size_t(i)];
        const auto &gg = grad.primitives[std::size_t(i)];
        g << gg.mean, gg.log_scale, gg.rotation, gg.opacity_logit, gg.sh.row(0).transpose(), gg.sh.row(1).transpose(),
            gg.sh.row(2).transpose(), gg.sh.row(3).transpose();
        p << prim.mean, prim.log_scale, prim.rotation.w(), prim.rotation.x(), prim.rotation.y(), prim.rotation.z(),
            prim.opacity_logit, prim.sh.row(0).transpose(), prim.sh.row(1).transpose(), prim.sh.row(2).transpose(),
            prim.sh.row(3).transpose();
        auto m = m_.segment<kStride>(i * kStride);
        auto v = v_.segment<kStride>(i * kStride);
        m = beta1 * m + (1 - beta1) * g;
        v = beta2 * v + (1 - beta2) * g.cwiseAbs2();
        p.array() -= lr_.array() * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);

        prim.mean = p.segment<3>(0);
        prim.log_scale = p.segment<3>(3);
        prim.rotation = Eigen::Quaterniond(p(6), p(7), p(8), p(9)).normalized();
        prim.opacity_logit = p(10);
        for (int r = 0; r < 4; ++r) prim.sh.row(r) = p.segment<3>(11 + 3 * r).transpose();
    }
}

Trainer::Trainer(const ViewSet &views, const GaussianSetd &gt_scene, TrainConfig cfg, std::optional<ScorerModel> scorer)
    : views_(views), gt_scene_(gt_scene), cfg_(std::move(cfg)), scorer_(std::move(scorer)), adam_(cfg_),
      train_rng_(mix_seed(cfg_.seed, 1)), novel_rng_(mix_seed(cfg_.seed, 2)) {
    cfg_.validate();
    views_.validate();
    const bool needs_scorer = (cfg_.pipeline_mode == PipelineMode::had || cfg_.pipeline_mode == PipelineMode::had_ms) &&
                              cfg_.score_source == ScoreSource::learned && cfg_.mask_override == MaskOverride::none;
    if (needs_scorer && !scorer_) throw ConfigError("trainer: pipeline mode needs a fitted scorer model");
    if (scorer_) scorer_->validate();
    input_indices_ = views_.indices(ViewRole::input);
    model_ = init_gaussians(views_, cfg_.num_gaussians, mix_seed(cfg_.seed, 0), cfg_.sh_degree, cfg_.init_scale_factor);
    model_.background_color = gt_scene_.background_color;
    depth_tolerance_ = default_depth_tolerance(views_);
}

void Trainer::set_model(GaussianSetd set) {
    model_ = std::move(set);
    adam_ = AdamOptimizer(cfg_);
}

bool Trainer::is_round_iteration(int it) const {
    if (cfg_.pipeline_mode == PipelineMode::splat_only) return false;
    const int interval = cfg_.effective_aug_interval();
    const int start = cfg_.two_phase ? int(std::floor(cfg_.two_phase_fraction * cfg_.total_iters)) : interval;
    return it >= start && (it - start) % interval == 0;
}

NovelTrainingView Trainer::augment_pose(const NovelPose &pose, int slot, std::span<const ReferenceView> refs,
                                        AugmentationLogEntry &log) {
    const Camerad &cam = pose.camera;
    const auto splat = render(model_, cam);
    const ImageBuffer gt = render(gt_scene_, cam).image;
    const auto version_refs = nearest_references(refs, cam, cfg_.versions_per_pose());
    const auto feature_refs = nearest_references(refs, cam, 3);
    const std::uint64_t view_key = mix_seed(mix_seed(cfg_.seed, std::uint64_t(round_)), std::uint64_t(slot));
    const bool scored = cfg_.pipeline_mode != PipelineMode::aug_no_mask;

    VersionStack stack;
    for (const auto &ref : version_refs) {
        auto aug = simulate_prior(splat.image, gt, ref.view, ref.index, cam, cfg_.augmentor, view_key);
        ScoreMap score(cam.width, cam.height);
        if (scored && cfg_.score_source == ScoreSource::oracle) {
            score = aug.gt_score;
        } else if (scored && scorer_) {
            score = predict_score(*scorer_, extract_features(aug.image, cam, splat.depth, feature_refs, splat.image,
                                                             depth_tolerance_));
        }
        log.ref_indices.push_back(ref.index);
        log.version_gt_mae.push_back(aug.gt_score.data.mean());
        stack.images.push_back(std::move(aug.image));
        stack.scores.push_back(std::move(score));
        stack.ref_indices.push_back(ref.index);
    }

    FusedView fused;
    if (stack.size() == 1)
        fused = {stack.images.front(), stack.scores.front()};
    else if (cfg_.fusion == FusionMethod::argmin)
        fused = fuse_argmin(stack);
    else
        fused = fuse_weighted(stack, cfg_.fusion_temperature);

    NovelTrainingView nv;
    nv.slot = slot;
    nv.view.camera = cam;
    nv.view.ref_view_index = stack.ref_indices.front();
    nv.view.rendered_input = splat.image;
    nv.view.gt_score = gt_hallucination_score(fused.image, gt, cfg_.augmentor.score_channel_max);
    nv.view.image = std::move(fused.image);
    nv.score = std::move(fused.score);
    switch (cfg_.mask_override) {
    case MaskOverride::all_true: nv.mask = BinaryMask(cam.width, cam.height, true); break;
    case MaskOverride::all_false: nv.mask = BinaryMask(cam.width, cam.height, false); break;
    case MaskOverride::none:
        nv.mask = scored ? score_to_mask(nv.score, cfg_.mask) : BinaryMask(cam.width, cam.height, false);
        break;
    }
    log.mask_fraction = double(nv.mask.data.count()) / double(nv.mask.size());
    log.fused_gt_mae = nv.view.gt_score.data.mean();
    if (scored) log.score_mae = score_map_mae(nv.score, nv.view.gt_score);
    return nv;
}

const std::vector<NovelTrainingView> &Trainer::augmentation_round() {
    if (cfg_.pipeline_mode == PipelineMode::splat_only) {
        pool_.clear();
        return pool_;
    }
    const auto refs = make_references(views_, model_);
    std::vector<NovelTrainingView> fresh;
    for (int slot = 0; slot < cfg_.novel_views_per_round; ++slot) {
        const NovelPose pose = sample_novel_pose(views_, iter_, cfg_, novel_rng_);
        AugmentationLogEntry log;
        log.round = round_;
        log.iteration = iter_;
        log.slot = slot;
        log.u = pose.u;
        log.target_index = pose.target_index;
        log.input_index = pose.input_index;
        fresh.push_back(augment_pose(pose, slot, refs, log));
        report_.augmentation_log.push_back(std::move(log));
    }
    pool_ = std::move(fresh);
    if (round_observer) round_observer(round_, pool_);
    ++round_;
    return pool_;
}

void Trainer::step() {
    const int vi = input_indices_[std::size_t(train_rng_.uniform_int(0, int(input_indices_.size()) - 1))];
    const auto &view = views_.views[vi];
    RenderPass<double> pass(model_, view.camera);
    LossValue in_loss = input_view_loss(pass.output().image, view.image, cfg_.input_weights);
    in_loss.grad_image.data *= cfg_.lambda_input;
    ParamGradients<double> grads = pass.backward(in_loss.grad_image);

    double novel_value = std::numeric_limits<double>::quiet_NaN();
    bool has_novel = false;
    if (!pool_.empty()) {
        const auto &nv = pool_[std::size_t(novel_rng_.uniform_int(0, int(pool_.size()) - 1))];
        // Fully masked views contribute nothing, so they are not rendered at all.
        if (nv.mask.data.count() < nv.mask.size()) {
            RenderPass<double> npass(model_, nv.view.camera);
            LossValue nl = novel_view_loss(npass.output().image, nv.view.image, nv.mask, cfg_.novel_weights,
                                           cfg_.masked_ssim);
            novel_value = nl.value;
            has_novel = true;
            nl.grad_image.data *= cfg_.lambda_novel;
            const auto ng = npass.backward(nl.grad_image);
            for (std::size_t i = 0; i < grads.primitives.size(); ++i) {
                auto &a = grads.primitives[i];
                const auto &b = ng.primitives[i];
                a.mean += b.mean;
                a.log_scale += b.log_scale;
                a.rotation += b.rotation;
                a.opacity_logit += b.opacity_logit;
                a.sh += b.sh;
            }
        }
    }
    if (!std::isfinite(in_loss.value) || (has_novel && !std::isfinite(novel_value))) {
        std::ostringstream msg;
        msg << "training diverged at iteration " << iter_ << ": input loss " << in_loss.value << ", novel loss "
            << novel_value;
        throw DivergenceError(msg.str());
    }
    adam_.step(model_, grads);
    report_.input_loss.push_back(in_loss.value);
    report_.novel_loss.push_back(novel_value);
    if (cfg_.record_param_hashes) report_.param_hashes.push_back(parameter_hash(model_));
    ++iter_;
}

namespace {

Checkpoint summarize(int iteration, const std::vector<MetricRow> &rows) {
    Checkpoint c;
    c.iteration = iteration;
    for (const auto &r : rows) {
        c.test_psnr += r.psnr;
        c.test_ssim += r.ssim;
    }
    if (!rows.empty()) {
        c.test_psnr /= double(rows.size());
        c.test_ssim /= double(rows.size());
    }
    return c;
}

} // namespace

TrainReport Trainer::run() {
    while (iter_ < cfg_.total_iters) {
        if (is_round_iteration(iter_)) augmentation_round();
        step();
        if (cfg_.eval_interval > 0 && iter_ % cfg_.eval_interval == 0 && iter_ < cfg_.total_iters)
            report_.checkpoints.push_back(summarize(iter_, evaluate(model_, views_, {ViewRole::test})));
    }
    if (views_.count(ViewRole::test) > 0) {
        report_.final_metrics = evaluate(model_, views_, {ViewRole::test});
        report_.checkpoints.push_back(summarize(iter_, report_.final_metrics));
    }
    for (const auto &prim : model_.primitives)
        if (!prim.mean.allFinite() || !std::isfinite(prim.opacity_logit) || !prim.log_scale.allFinite())
            throw DivergenceError("training produced non-finite parameters");
    report_.final_set = model_;
    return report_;
}

TrainReport train(const ViewSet &views, const GaussianSetd &gt_scene, const TrainConfig &cfg,
                  std::optional<ScorerModel> scorer) {
    Trainer trainer(views, gt_scene, cfg, std::move(scorer));
    return trainer.run();
}

} // namespace had
