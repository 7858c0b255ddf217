// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0
//
// had_splat: synthetic scenes, training, augmentation, scoring, fusion and
// ablation presets from the command line.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "had/experiments.hpp"
#include "had/io.hpp"
#include "had/parallel.hpp"

namespace fs = std::filesystem;
using namespace had;
using io::json;

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int threads = 1;
    std::string image_format = "ppm";
};

void add_global_options(CLI::App &app, GlobalOptions &g) {
    app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for all randomness");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads (HAD_SPLAT_THREADS overrides)")->check(CLI::PositiveNumber);
    app.add_option("--image-format", g.image_format, "Image format for written images")
        ->check(CLI::IsMember({"ppm", "png"}));
}

void apply_threads(const GlobalOptions &g) {
    if (const char *env = std::getenv("HAD_SPLAT_THREADS"); env && *env) {
        set_thread_count(std::max(1, std::atoi(env)));
        return;
    }
    set_thread_count(g.threads);
}

json config_json(const GlobalOptions &g) { return g.config.empty() ? json::object() : io::load_json(g.config); }

/// A config file is either flat (training fields only) or split into "scene" and "train" sections.
json section(const json &j, const char *name) {
    if (j.contains("scene") || j.contains("train")) return j.value(name, json::object());
    return std::string(name) == "train" ? j : json::object();
}

TrainConfig train_config(const GlobalOptions &g, TrainConfig base = {}) {
    const json j = config_json(g);
    TrainConfig cfg = io::train_config_from_json(section(j, "train"), base);
    if (g.seed) cfg.seed = *g.seed;
    cfg.validate();
    return cfg;
}

std::optional<ScorerModel> load_scorer(const std::string &path) {
    if (path.empty()) return std::nullopt;
    return io::scorer_model_from_json(io::load_json(path));
}

void dump_pool(const fs::path &dir, const std::vector<NovelTrainingView> &pool, io::ImageFormat format) {
    fs::create_directories(dir);
    for (const auto &v : pool) {
        char name[32];
        std::snprintf(name, sizeof name, "slot_%02d", v.slot);
        const fs::path slot = dir / name;
        fs::create_directories(slot);
        io::write_image(slot / "augmented", v.view.image, format);
        io::write_image(slot / "splat", v.view.rendered_input, format);
        io::write_pfm(slot / "score.pfm", v.score);
        io::write_pfm(slot / "gt_score.pfm", v.view.gt_score);
        io::write_mask(slot / "mask.pgm", v.mask);
        io::save_json(slot / "camera.json", io::camera_to_json(v.view.camera, ViewRole::novel));
    }
}

json report_json(const TrainReport &r) {
    json j;
    j["checkpoints"] = json::array();
    for (const auto &c : r.checkpoints)
        j["checkpoints"].push_back({{"iteration", c.iteration}, {"test_psnr", c.test_psnr}, {"test_ssim", c.test_ssim}});
    j["rounds"] = json::array();
    for (const auto &e : r.augmentation_log)
        j["rounds"].push_back({{"round", e.round},
                               {"iteration", e.iteration},
                               {"slot", e.slot},
                               {"u", e.u},
                               {"mask_fraction", e.mask_fraction},
                               {"fused_gt_mae", e.fused_gt_mae},
                               {"score_mae", std::isfinite(e.score_mae) ? json(e.score_mae) : json(nullptr)}});
    return j;
}

void write_metrics(std::ostream &os, const std::vector<MetricRow> &rows) {
    os << "view,role,psnr,ssim\n";
    char buf[96];
    for (const auto &m : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", m.psnr, m.ssim);
        os << m.view_index << ',' << to_string(m.role) << ',' << buf << '\n';
    }
}

std::vector<ViewRole> parse_roles(const std::string &s) {
    std::vector<ViewRole> roles;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) roles.push_back(view_role_from_string(item));
    return roles;
}

GaussianSetd model_or_gt(const std::string &checkpoint, const io::LoadedScene &scene) {
    return checkpoint.empty() ? scene.gt : io::load_gaussians(checkpoint);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Hallucination-aware augmentation for Gaussian splatting"};
    app.require_subcommand(1);
    GlobalOptions g;

    auto *scene_cmd = app.add_subcommand("scene", "Generate and save a synthetic scene");
    std::string kind = "blob_field";
    scene_cmd->add_option("--kind", kind, "blob_field or textured_room")
        ->check(CLI::IsMember({"blob_field", "textured_room"}));
    add_global_options(*scene_cmd, g);

    auto *train_cmd = app.add_subcommand("train", "Train on a scene directory");
    std::string scene_dir, scorer_path, checkpoint;
    train_cmd->add_option("scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--scorer", scorer_path, "Scorer model JSON")->check(CLI::ExistingFile);
    bool dump_rounds = false;
    train_cmd->add_flag("--dump-rounds", dump_rounds, "Write every augmentation round under out/round_NNN");
    add_global_options(*train_cmd, g);

    auto *augment_cmd = app.add_subcommand("augment", "Run one augmentation round offline");
    int at_iteration = 0;
    augment_cmd->add_option("scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
    augment_cmd->add_option("--checkpoint", checkpoint, "Gaussian checkpoint stem (default: ground truth)");
    augment_cmd->add_option("--scorer", scorer_path, "Scorer model JSON")->check(CLI::ExistingFile);
    augment_cmd->add_option("--iteration", at_iteration, "Training iteration that sets the pose schedule")
        ->check(CLI::NonNegativeNumber);
    add_global_options(*augment_cmd, g);

    auto *score_cmd = app.add_subcommand("score", "Score a triplet directory of augmented views");
    std::string input_dir;
    score_cmd->add_option("views", input_dir, "Triplet directory")->required()->check(CLI::ExistingDirectory);
    score_cmd->add_option("--scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
    score_cmd->add_option("--scorer", scorer_path, "Scorer model JSON")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--checkpoint", checkpoint, "Model for reference depths (default: ground truth)");
    add_global_options(*score_cmd, g);

    auto *fuse_cmd = app.add_subcommand("fuse", "Fuse a version stack");
    std::string method = "argmin";
    double temperature = 0.1;
    fuse_cmd->add_option("stack", input_dir, "Version stack directory")->required()->check(CLI::ExistingDirectory);
    fuse_cmd->add_option("--method", method, "argmin or weighted")->check(CLI::IsMember({"argmin", "weighted"}));
    fuse_cmd->add_option("--temperature", temperature, "Softmax temperature for weighted fusion")
        ->check(CLI::PositiveNumber);
    add_global_options(*fuse_cmd, g);

    auto *eval_cmd = app.add_subcommand("eval", "PSNR and SSIM of a model over scene views");
    std::string roles = "test";
    eval_cmd->add_option("scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--checkpoint", checkpoint, "Gaussian checkpoint stem (default: ground truth)");
    eval_cmd->add_option("--roles", roles, "Comma-separated view roles");
    add_global_options(*eval_cmd, g);

    auto *ablate_cmd = app.add_subcommand("ablate", "Run a preset ablation matrix");
    std::string preset_name;
    ablate_cmd->add_option("preset", preset_name, "Preset name")->required()->check(CLI::IsMember(preset_names()));
    add_global_options(*ablate_cmd, g);

    auto *triplets_cmd = app.add_subcommand("triplets", "Curate scorer training triplets");
    triplets_cmd->add_option("scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
    triplets_cmd->add_option("--checkpoint", checkpoint, "Trained model stem; otherwise a splat-only pretrain runs");
    int pretrain_iters = 200;
    triplets_cmd->add_option("--pretrain-iters", pretrain_iters, "Splat-only iterations when no checkpoint is given")
        ->check(CLI::NonNegativeNumber);
    add_global_options(*triplets_cmd, g);

    auto *fit_cmd = app.add_subcommand("fit-scorer", "Fit and save a scorer model");
    double ridge = 1e-6;
    fit_cmd->add_option("triplets", input_dir, "Triplet directory")->required()->check(CLI::ExistingDirectory);
    fit_cmd->add_option("--scene", scene_dir, "Scene directory")->required()->check(CLI::ExistingDirectory);
    fit_cmd->add_option("--checkpoint", checkpoint, "Model for reference depths (default: ground truth)");
    fit_cmd->add_option("--ridge", ridge, "Ridge penalty")->check(CLI::NonNegativeNumber);
    add_global_options(*fit_cmd, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        apply_threads(g);
        const auto format = io::image_format_from_string(g.image_format);
        const fs::path out = g.out;

        if (scene_cmd->parsed()) {
            const json j = config_json(g);
            SceneSpec spec = io::scene_spec_from_json(section(j, "scene"));
            if (scene_cmd->count("--kind")) spec.scene_kind = scene_kind_from_string(kind);
            if (g.seed) spec.seed = *g.seed;
            const auto [gt, views] = make_synthetic_scene(spec);
            io::save_scene(out, spec, gt, views, format);
            std::cout << "wrote " << views.views.size() << " views to " << out.string() << '\n';
        } else if (train_cmd->parsed()) {
            const auto scene = io::load_scene(scene_dir);
            const auto cfg = train_config(g);
            fs::create_directories(out);
            Trainer trainer(scene.views, scene.gt, cfg, load_scorer(scorer_path));
            if (dump_rounds)
                trainer.round_observer = [&](int round, const std::vector<NovelTrainingView> &pool) {
                    char name[32];
                    std::snprintf(name, sizeof name, "round_%03d", round);
                    dump_pool(out / name, pool, format);
                };
            const auto report = trainer.run();
            io::save_gaussians(out / "model", report.final_set);
            io::save_json(out / "config.json", io::to_json(cfg));
            io::save_json(out / "report.json", report_json(report));
            std::ostringstream metrics;
            write_metrics(metrics, report.final_metrics);
            io::write_file(out / "metrics.csv", metrics.str());
            for (const auto &m : report.final_metrics)
                io::write_image(out / ("render_" + std::to_string(m.view_index)),
                                render(report.final_set, scene.views.views[m.view_index].camera).image, format);
            const auto &last = report.checkpoints.back();
            std::printf("iteration %d test PSNR %.4f SSIM %.4f\n", last.iteration, last.test_psnr, last.test_ssim);
        } else if (augment_cmd->parsed()) {
            const auto scene = io::load_scene(scene_dir);
            const auto cfg = train_config(g);
            Trainer trainer(scene.views, scene.gt, cfg, load_scorer(scorer_path));
            trainer.set_model(model_or_gt(checkpoint, scene));
            trainer.set_iteration(at_iteration);
            dump_pool(out / "round_000", trainer.augmentation_round(), format);
            std::cout << "wrote " << trainer.pool().size() << " augmented views to " << out.string() << '\n';
        } else if (score_cmd->parsed()) {
            const auto scene = io::load_scene(scene_dir);
            const auto model = load_scorer(scorer_path).value();
            const auto cfg = train_config(g);
            const auto refs = make_references(scene.views, model_or_gt(checkpoint, scene));
            const double tolerance = default_depth_tolerance(scene.views);
            const auto triplets = io::load_triplets(input_dir);
            const auto samples = triplet_features(triplets, refs, tolerance);
            fs::create_directories(out);
            for (std::size_t i = 0; i < samples.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "view_%04zu", i);
                fs::create_directories(out / name);
                const auto score = predict_score(model, samples[i].features);
                io::write_pfm(out / name / "score.pfm", score);
                io::write_mask(out / name / "mask.pgm", score_to_mask(score, cfg.mask));
                std::printf("%s score MAE %.6f\n", name, score_map_mae(score, samples[i].target));
            }
        } else if (fuse_cmd->parsed()) {
            const auto stack = io::load_version_stack(input_dir);
            const auto fused = fusion_method_from_string(method) == FusionMethod::argmin
                                   ? fuse_argmin(stack)
                                   : fuse_weighted(stack, temperature);
            fs::create_directories(out);
            const auto path = io::write_image(out / "fused", fused.image, format);
            io::write_pfm(out / "fused_score.pfm", fused.score);
            std::cout << "fused " << stack.size() << " versions into " << path.string() << '\n';
        } else if (eval_cmd->parsed()) {
            const auto scene = io::load_scene(scene_dir);
            const auto rows = evaluate(model_or_gt(checkpoint, scene), scene.views, parse_roles(roles));
            std::ostringstream os;
            write_metrics(os, rows);
            fs::create_directories(out);
            io::write_file(out / "metrics.csv", os.str());
            std::cout << os.str();
        } else if (ablate_cmd->parsed()) {
            auto preset = make_preset(preset_name);
            preset.base = train_config(g, preset.base);
            if (g.seed) preset.seeds = {*g.seed};
            preset.validate();
            fs::create_directories(out);
            const auto rows = run_any_preset(preset, [](const CellResult &c) {
                std::printf("%s %s seed %llu PSNR %.4f SSIM %.4f\n", c.row.scene.c_str(), c.row.method.c_str(),
                            static_cast<unsigned long long>(c.row.seed), c.row.psnr, c.row.ssim);
                std::fflush(stdout);
            });
            io::write_results(out / (preset_name + ".csv"), rows);
            std::ostringstream summary;
            write_summary_csv(summary, summarize(rows));
            io::write_file(out / (preset_name + "_summary.csv"), summary.str());
            std::cout << summary.str();
        } else if (triplets_cmd->parsed()) {
            const auto scene = io::load_scene(scene_dir);
            auto cfg = train_config(g);
            GaussianSetd trained;
            if (!checkpoint.empty()) {
                trained = io::load_gaussians(checkpoint);
            } else {
                cfg.pipeline_mode = PipelineMode::splat_only;
                cfg.total_iters = pretrain_iters;
                trained = train(scene.views, scene.gt, cfg).final_set;
            }
            const auto triplets = curate_triplets(scene.gt, scene.views, trained, cfg.augmentor);
            io::save_triplets(out, triplets);
            io::save_gaussians(out / "splat_model", trained);
            std::cout << "wrote " << triplets.size() << " triplets to " << out.string() << '\n';
        } else if (fit_cmd->parsed()) {
            const auto scene = io::load_scene(scene_dir);
            const auto refs = make_references(scene.views, model_or_gt(checkpoint, scene));
            const auto triplets = io::load_triplets(input_dir);
            const auto model = train_scorer(triplets, refs, default_depth_tolerance(scene.views), ridge, kAllFeatures);
            fs::create_directories(out);
            io::save_json(out / "scorer.json", io::to_json(model));
            std::cout << "weights " << model.weights.transpose() << " bias " << model.bias << '\n';
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
