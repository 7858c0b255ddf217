// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "had/experiments.hpp"
#include "had/losses.hpp"
#include "had/parallel.hpp"
#include "had/rasterizer.hpp"

using namespace had;

namespace {

// Tolerances and budgets.
constexpr double kGradRelTol = 1e-3;
constexpr double kGradAbsFloor = 1e-6;
constexpr double kGradEps = 1e-4;
constexpr double kCompositeTol = 1e-12;
constexpr double kRecoveryWeightTol = 1e-6;
constexpr double kRecoveryMse = 1e-10;
constexpr double kLadderMargin = 0.15;
constexpr double kKStepAllowance = 0.05;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char *name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string format(const char *fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

Camerad small_camera(int w = 32, int h = 32) {
    return look_at<double>(Eigen::Vector3d(0.3, -0.2, -3.0), Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 1, 0), 0.9 * w,
                           0.9 * h, 0.5 * w, 0.5 * h, w, h);
}

GaussianSetd random_scene(Rng &rng, int max_n, int sh_degree) {
    GaussianSetd set;
    set.sh_degree = sh_degree;
    set.background_color = Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform());
    const int n = rng.uniform_int(1, max_n);
    for (int i = 0; i < n; ++i) {
        Gaussian g;
        g.mean = Eigen::Vector3d(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
        for (int k = 0; k < 3; ++k) g.log_scale(k) = std::log(rng.uniform(0.08, 0.35));
        g.rotation = Eigen::Quaterniond(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
        g.opacity_logit = logit(rng.uniform(0.2, 0.9));
        for (int c = 0; c < 3; ++c) g.sh(0, c) = rng.uniform(0.0, 1.0);
        if (sh_degree >= 1)
            for (int r = 1; r < 4; ++r)
                for (int c = 0; c < 3; ++c) g.sh(r, c) = rng.uniform(-0.3, 0.3);
        set.primitives.push_back(g);
    }
    return set;
}

ImageBuffer random_image(Rng &rng, int w, int h) {
    ImageBuffer img(w, h);
    for (auto &v : img.data.reshaped()) v = rng.uniform();
    return img;
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
    Rng rng(2024);
    const Camerad cam = small_camera();
    double worst = 0;
    long checked = 0;
    for (int scene = 0; scene < 20; ++scene) {
        auto set = random_scene(rng, 8, 1);
        const ImageBuffer target = random_image(rng, cam.width, cam.height);
        auto loss = [&] { return (render(set, cam).image.data - target.data).square().mean(); };
        const auto out = render(set, cam);
        ImageBuffer dl(cam.width, cam.height);
        dl.data = 2.0 * (out.image.data - target.data) / double(out.image.data.size());
        const auto grads = render_with_grad(set, cam, dl).second;

        for (std::size_t i = 0; i < set.size(); ++i) {
            auto &g = set.primitives[i];
            const auto &gg = grads.primitives[i];
            auto check = [&](double &p, double analytic) {
                const double orig = p;
                p = orig + kGradEps;
                const double lp = loss();
                p = orig - kGradEps;
                const double lm = loss();
                p = orig;
                const double numeric = (lp - lm) / (2 * kGradEps);
                const double err = std::abs(analytic - numeric) /
                                   std::max({std::abs(analytic), std::abs(numeric), kGradAbsFloor});
                worst = std::max(worst, err);
                ++checked;
            };
            for (int k = 0; k < 3; ++k) check(g.mean(k), gg.mean(k));
            for (int k = 0; k < 3; ++k) check(g.log_scale(k), gg.log_scale(k));
            check(g.rotation.w(), gg.rotation(0));
            check(g.rotation.x(), gg.rotation(1));
            check(g.rotation.y(), gg.rotation(2));
            check(g.rotation.z(), gg.rotation(3));
            check(g.opacity_logit, gg.opacity_logit);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 3; ++c) check(g.sh(r, c), gg.sh(r, c));
        }
    }
    return {worst < kGradRelTol, format("%ld gradients, worst relative error %.3g", checked, worst)};
}

/// Sorted alpha blend of one pixel, written independently of the renderer.
Eigen::Vector3d reference_pixel(const GaussianSetd &set, const Camerad &cam, int x, int y) {
    struct Layer {
        double depth;
        int index;
        double alpha;
        Eigen::Vector3d color;
    };
    std::vector<Layer> layers;
    for (int i = 0; i < int(set.size()); ++i) {
        const auto &g = set.primitives[i];
        const Eigen::Vector3d t = cam.to_camera(g.mean);
        if (t.z() <= kNearPlane) continue;
        const auto s = project_gaussian(g, cam, set.sh_degree);
        if (!s) continue;
        if (x < s->x0 || x > s->x1 || y < s->y0 || y > s->y1) continue;
        const Eigen::Vector2d d(x + 0.5 - s->mean2d.x(), y + 0.5 - s->mean2d.y());
        const double power = 0.5 * d.dot(s->cov2d.inverse() * d);
        if (power > kCutoffPower) continue;
        layers.push_back({t.z(), i, std::min(kAlphaMax, g.opacity() * std::exp(-power)), s->color});
    }
    std::sort(layers.begin(), layers.end(),
              [](const Layer &a, const Layer &b) { return a.depth != b.depth ? a.depth < b.depth : a.index < b.index; });
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double trans = 1;
    for (const auto &l : layers) {
        c += l.color * l.alpha * trans;
        trans *= 1 - l.alpha;
    }
    return c + set.background_color * trans;
}

Outcome compositing_oracle() {
    Rng rng(77);
    const Camerad cam = small_camera();
    double worst = 0;
    for (int p = 0; p < 100; ++p) {
        const auto set = random_scene(rng, 8, 1);
        const auto img = render(set, cam).image;
        const int x = rng.uniform_int(0, cam.width - 1), y = rng.uniform_int(0, cam.height - 1);
        const Eigen::Vector3d ref = reference_pixel(set, cam, x, y);
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(img(x, y, c) - ref(c)));
    }

    Camerad center_cam;
    center_cam.fx = center_cam.fy = 40;
    center_cam.cx = center_cam.cy = 16.5;
    center_cam.width = center_cam.height = 32;
    GaussianSetd one;
    one.background_color = Eigen::Vector3d(0.1, 0.2, 0.3);
    Gaussian g;
    g.mean = Eigen::Vector3d(0, 0, 3);
    g.log_scale.setConstant(std::log(0.2));
    g.opacity_logit = logit(0.7);
    g.sh.row(0) = Eigen::RowVector3d(0.9, 0.5, 0.1);
    one.primitives.push_back(g);
    const auto out = render(one, center_cam).image;
    const double delta = g.opacity();
    bool exact = true;
    for (int c = 0; c < 3; ++c)
        exact = exact && out(16, 16, c) == g.sh(0, c) * delta + one.background_color(c) * (1 - delta);
    return {worst <= kCompositeTol && exact,
            format("100 pixels, max deviation %.3g; center pixel %s", worst, exact ? "exact" : "differs")};
}

Outcome fusion_dominance() {
    int violations = 0, strict = 0, ties = 0;
    AugmentorConfig cfg;
    for (int c = 0; c < 50; ++c) {
        SceneSpec spec;
        spec.scene_kind = c % 2 ? SceneKind::textured_room : SceneKind::blob_field;
        spec.seed = 500 + std::uint64_t(c);
        spec.num_gaussians = 150;
        const auto [gt, views] = make_synthetic_scene(spec);
        const auto targets = views.indices(ViewRole::target);
        const auto &view = views.views[targets[c % targets.size()]];
        const auto nearest = nearest_input_views(views, view.camera, 3);
        cfg.seed = std::uint64_t(c);
        VersionStack stack;
        for (int r : nearest) {
            const auto aug = simulate_prior(view.image, view.image, views.views[r], r, view.camera, cfg, 1000 + c);
            stack.images.push_back(aug.image);
            stack.scores.push_back(aug.gt_score); // oracle scores
            stack.ref_indices.push_back(r);
        }
        const auto fused = fuse_argmin(stack);
        const double fused_mae = gt_hallucination_score(fused.image, view.image).data.mean();
        double min_mae = std::numeric_limits<double>::infinity();
        for (const auto &s : stack.scores) min_mae = std::min(min_mae, s.data.mean());
        bool dominated = false;
        for (int k = 0; k < stack.size(); ++k) {
            bool all = true;
            for (int j = 0; j < stack.size(); ++j) all = all && (stack.scores[k].data <= stack.scores[j].data).all();
            dominated = dominated || all;
        }
        if (fused_mae > min_mae) ++violations;
        else if (fused_mae < min_mae) ++strict;
        else {
            ++ties;
            if (!dominated) ++violations;
        }
    }
    return {violations == 0,
            format("50 cases: %d strictly better, %d ties with a dominating version, %d violations", strict, ties,
                   violations)};
}

Outcome scorer_recovery() {
    Rng rng(3);
    Eigen::Matrix<double, kNumFeatures, 1> w;
    w << 0.3, -0.2, 0.15, 0.05, 0.4;
    const double b = 0.27;
    std::vector<FeatureSample> samples;
    for (int s = 0; s < 4; ++s) {
        FeatureSample fs{ConsistencyFeatures(12, 12), ScoreMap(12, 12)};
        for (Eigen::Index i = 0; i < fs.features.size(); ++i) {
            for (int k = 0; k < kNumFeatures; ++k) fs.features.data(i, k) = rng.uniform();
            fs.target.data(i) = fs.features.data.row(i).matrix().dot(w) + b;
        }
        samples.push_back(std::move(fs));
    }
    const auto model = fit_scorer(samples, 1e-9, kAllFeatures);
    const double werr = std::max((model.weights - w).cwiseAbs().maxCoeff(), std::abs(model.bias - b));
    double se = 0, n = 0;
    for (const auto &s : samples) {
        se += (predict_score(model, s.features).data - s.target.data).square().sum();
        n += double(s.target.size());
    }
    const double mse = se / n;

    const auto rows = run_scorer_eval(make_preset("scorer_eval"));
    double learned = 0, baseline = 0;
    int scenes = 0;
    for (const auto &r : rows) {
        if (r.method == "learned") {
            learned += r.score_mae;
            ++scenes;
        } else {
            baseline += r.score_mae;
        }
    }
    learned /= scenes;
    baseline /= scenes;
    return {werr <= kRecoveryWeightTol && mse < kRecoveryMse && learned < baseline,
            format("weight error %.3g, training MSE %.3g; held-out MAE learned %.5f vs constant mean %.5f", werr, mse,
                   learned, baseline)};
}

// ---------------------------------------------------------------------------
// Training matrices. Each arm runs over the preset scenes and seeds, and the
// results are cached so criteria sharing an arm train it once.

struct MatrixCache {
    std::map<std::string, std::vector<ResultRow>> rows;
    std::optional<ScorerModel> scorer;

    const std::vector<ResultRow> &arm(const Arm &a) {
        if (auto it = rows.find(a.method); it != rows.end()) return it->second;
        ExperimentPreset p = make_preset("ablate_components");
        if (!scorer) scorer = fit_preset_scorer(p);
        std::vector<ResultRow> out;
        for (const auto &spec : p.scenes) {
            const auto [gt, views] = make_synthetic_scene(spec);
            for (const auto seed : p.seeds) {
                TrainConfig cfg = a.apply(p.base);
                cfg.seed = seed;
                const auto report = train(views, gt, cfg, scorer);
                out.push_back({report.checkpoints.back().test_psnr, report.checkpoints.back().test_ssim, 0,
                               scene_label(spec), a.method, seed});
            }
        }
        return rows[a.method] = std::move(out);
    }

    double mean_psnr(const Arm &a) {
        const auto &r = arm(a);
        double s = 0;
        for (const auto &x : r) s += x.psnr;
        return s / double(r.size());
    }
};

MatrixCache &matrix() {
    static MatrixCache cache;
    return cache;
}

const Arm kSplatOnly{"splat_only", PipelineMode::splat_only, 1, FusionMethod::argmin, std::nullopt};
const Arm kAugNoMask{"aug_no_mask", PipelineMode::aug_no_mask, 1, FusionMethod::argmin, std::nullopt};
const Arm kHad{"had", PipelineMode::had, 1, FusionMethod::argmin, std::nullopt};
const Arm kHadMsK2{"had_ms_k2", PipelineMode::had_ms, 2, FusionMethod::argmin, std::nullopt};
const Arm kHadMsK3{"had_ms_k3", PipelineMode::had_ms, 3, FusionMethod::argmin, std::nullopt};
const Arm kHadMsK3Weighted{"had_ms_k3_weighted", PipelineMode::had_ms, 3, FusionMethod::weighted, std::nullopt};

Outcome component_ladder() {
    auto &m = matrix();
    const double s = m.mean_psnr(kSplatOnly), a = m.mean_psnr(kAugNoMask), h = m.mean_psnr(kHad),
                 ms = m.mean_psnr(kHadMsK3);
    const bool pass = ms >= h && h > a && a > s && h - a >= kLadderMargin;
    const auto p = make_preset("ablate_components");
    return {pass, format("%zu scenes x %zu seeds: splat_only %.3f, aug_no_mask %.3f, had %.3f, had_ms %.3f; "
                         "had - aug_no_mask = %.3f dB",
                         p.scenes.size(), p.seeds.size(), s, a, h, ms, h - a)};
}

Outcome k_monotonicity() {
    // had_ms with K = 1 trains exactly like had.
    auto &m = matrix();
    const double k1 = m.mean_psnr(kHad), k2 = m.mean_psnr(kHadMsK2), k3 = m.mean_psnr(kHadMsK3);
    const bool pass = k2 >= k1 - kKStepAllowance && k3 >= k2 - kKStepAllowance;
    return {pass, format("K=1 %.3f, K=2 %.3f, K=3 %.3f", k1, k2, k3)};
}

Outcome fusion_ordering() {
    auto &m = matrix();
    const double am = m.mean_psnr(kHadMsK3), wt = m.mean_psnr(kHadMsK3Weighted);
    return {am >= wt, format("argmin %.3f, weighted %.3f", am, wt)};
}

Outcome mask_isolation() {
    SceneSpec spec;
    spec.seed = 11;
    const auto [gt, views] = make_synthetic_scene(spec);
    TrainConfig base = make_preset("ablate_components").base;
    base.total_iters = 200;
    base.record_param_hashes = true;
    base.seed = 5;
    base.score_source = ScoreSource::oracle;
    base.pipeline_mode = PipelineMode::splat_only;
    const auto reference = train(views, gt, base).param_hashes;

    std::vector<std::string> failed;
    std::size_t rounds = 0;
    for (auto mode : {PipelineMode::aug_no_mask, PipelineMode::had, PipelineMode::had_ms}) {
        TrainConfig cfg = base;
        cfg.pipeline_mode = mode;
        cfg.mask_override = MaskOverride::all_true;
        const auto report = train(views, gt, cfg);
        rounds += report.augmentation_log.size();
        if (report.param_hashes != reference) failed.push_back(to_string(mode));
    }
    std::string detail = format("%zu steps, %zu augmented views across 3 modes", reference.size(), rounds);
    for (const auto &f : failed) detail += "; " + f + " diverged";
    return {failed.empty() && rounds > 0, detail};
}

std::string csv_body(const std::vector<ResultRow> &rows) {
    std::ostringstream os;
    write_results_csv(os, rows, "timestamp line");
    std::string body, line;
    std::istringstream in(os.str());
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') body += line + '\n';
    return body;
}

Outcome determinism() {
    auto components = make_preset("ablate_components");
    components.scenes.resize(1);
    components.seeds = {1};
    const std::string a = csv_body(run_preset(components)), b = csv_body(run_preset(components));
    const auto eval = make_preset("scorer_eval");
    const std::string c = csv_body(run_scorer_eval(eval)), d = csv_body(run_scorer_eval(eval));
    const bool same_components = a == b, same_eval = c == d;
    return {same_components && same_eval,
            format("ablate_components (1 scene, 1 seed, 4 arms) %s; scorer_eval %s",
                   same_components ? "identical" : "differs", same_eval ? "identical" : "differs")};
}

Outcome loss_suite() {
    Rng rng(9);
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const char *what) {
        if (!ok) failures.push_back(what);
    };
    const auto x = random_image(rng, 24, 20), y = random_image(rng, 24, 20);
    expect(std::abs(ssim(x, x) - 1.0) < 1e-12, "ssim(x,x)=1");
    expect(std::abs(d_ssim_loss(x, x).value) < 1e-12, "dssim(x,x)=0");

    // PSNR closed forms: a uniform offset d gives 10 log10(1/d^2).
    ImageBuffer z(16, 16, 0.5), z2 = z;
    z2.data += 0.1;
    expect(std::abs(psnr(z, z2) - 20.0) < 1e-9, "psnr 0.1 offset = 20 dB");
    z2.data = z.data + 0.01;
    expect(std::abs(psnr(z, z2) - 40.0) < 1e-9, "psnr 0.01 offset = 40 dB");
    expect(std::isinf(psnr(z, z)), "psnr(x,x) infinite");
    expect(psnr_capped(z, z) == kPsnrCap, "psnr cap");

    // Masked locality: changing the target only at masked pixels changes neither value nor gradient.
    BinaryMask mask(24, 20);
    for (int yy = 5; yy < 12; ++yy)
        for (int xx = 3; xx < 15; ++xx) mask(xx, yy) = true;
    auto y2 = y;
    for (int yy = 5; yy < 12; ++yy)
        for (int xx = 3; xx < 15; ++xx)
            for (int c = 0; c < 3; ++c) y2(xx, yy, c) = rng.uniform();
    const auto l1 = novel_view_loss(x, y, mask), l2 = novel_view_loss(x, y2, mask);
    expect(l1.value == l2.value && (l1.grad_image.data == l2.grad_image.data).all(), "masked-loss locality");
    bool zero_grad = true;
    for (int yy = 5; yy < 12; ++yy)
        for (int xx = 3; xx < 15; ++xx)
            for (int c = 0; c < 3; ++c) zero_grad = zero_grad && l1.grad_image(xx, yy, c) == 0.0;
    expect(zero_grad, "zero gradient at masked pixels");

    const auto w = input_loss_weights();
    expect(w.l1 == 0.8 && w.dssim == 0.2, "input loss weights 0.8/0.2");
    const double combined = input_view_loss(x, y).value;
    expect(std::abs(combined - (0.8 * l1_loss(x, y).value + 0.2 * d_ssim_loss(x, y).value)) < 1e-12,
           "input loss combination");
    const auto m = default_mask_config();
    expect(m.mode == ThresholdMode::absolute && m.threshold == 0.9, "threshold default 0.9");
    expect(TrainConfig{}.mask.threshold == 0.9, "train config threshold 0.9");

    std::string detail = failures.empty() ? "all checks hold" : "failed:";
    for (const auto &f : failures) detail += " " + f + ";";
    return {failures.empty(), detail};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> selected;
    int threads = 1;
    app.add_option("--criterion", selected, "Criterion number(s) to run (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);

    const std::vector<Criterion> criteria = {
        {1, "rasterizer gradient oracle", 120, gradient_oracle},
        {2, "compositing oracle", 10, compositing_oracle},
        {3, "fusion dominance", 30, fusion_dominance},
        {4, "scorer recovery", 60, scorer_recovery},
        {5, "component ladder", 1800, component_ladder},
        {6, "K-versions monotonicity", 1200, k_monotonicity},
        {7, "fusion-strategy ordering", 1200, fusion_ordering},
        {8, "mask isolation", 120, mask_isolation},
        {9, "determinism", 0, determinism},
        {10, "loss/metric unit suite", 10, loss_suite},
    };

    bool all_pass = true;
    for (const auto &c : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Shared training matrices are charged to the first criterion that needs them.
        const bool in_time = c.budget_s <= 0 || secs <= c.budget_s;
        if (!in_time) o.detail += format("; over budget (%.0f s)", c.budget_s);
        const bool pass = o.pass && in_time;
        all_pass = all_pass && pass;
        std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs, o.detail.c_str());
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}
