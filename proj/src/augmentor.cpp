// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "had/rasterizer.hpp"
#include "had/rng.hpp"

namespace had {

void AugmentorConfig::validate() const {
    auto in_unit = [](double v) { return v >= 0 && v <= 1; };
    if (!in_unit(hallucination_rate)) throw ConfigError("augmentor: hallucination_rate outside [0, 1]");
    if (!in_unit(color_drift_amplitude)) throw ConfigError("augmentor: color_drift_amplitude outside [0, 1]");
    if (!in_unit(residual_blend)) throw ConfigError("augmentor: residual_blend outside [0, 1]");
    if (!(patch_size_min >= 2 && patch_size_max >= patch_size_min))
        throw ConfigError("augmentor: patch size range must satisfy 2 <= min <= max");
    if (!(num_patches_min >= 0 && num_patches_max >= num_patches_min && num_patches_max >= 1))
        throw ConfigError("augmentor: patch count range must satisfy 0 <= min <= max, max >= 1");
}

ScoreMap gt_hallucination_score(const ImageBuffer &aug, const ImageBuffer &gt, bool channel_max) {
    require_same_shape(aug, gt, "gt_hallucination_score");
    ScoreMap s(aug.width, aug.height);
    const auto diff = (aug.data - gt.data).abs().eval();
    if (channel_max)
        s.data = diff.rowwise().maxCoeff();
    else
        s.data = diff.rowwise().sum() / 3.0;
    return s;
}

namespace {

struct Patch {
    int size;
    int src_x, src_y;
    int dst_x, dst_y;
};

double feather(double dist, double width) {
    if (dist >= width) return 1.0;
    return 0.5 - 0.5 * std::cos(std::numbers::pi * dist / width);
}

bool overlaps(const Patch &a, const Patch &b) {
    return a.dst_x < b.dst_x + b.size && b.dst_x < a.dst_x + a.size && a.dst_y < b.dst_y + b.size &&
           b.dst_y < a.dst_y + a.size;
}

} // namespace

AugmentedView simulate_prior(const ImageBuffer &splat_render, const ImageBuffer &gt_render, const ViewRecord &ref,
                             int ref_view_index, const Camerad &camera, const AugmentorConfig &cfg,
                             std::uint64_t view_key) {
    cfg.validate();
    require_same_shape(splat_render, gt_render, "simulate_prior");
    require_same_shape(ref.image, gt_render, "simulate_prior reference");
    const int w = gt_render.width, h = gt_render.height;

    AugmentedView out;
    out.camera = camera;
    out.ref_view_index = ref_view_index;
    out.rendered_input = splat_render;
    out.image = gt_render;
    if (cfg.residual_blend > 0)
        out.image.data = (1.0 - cfg.residual_blend) * gt_render.data + cfg.residual_blend * splat_render.data;

    Rng rng(mix_seed(mix_seed(cfg.seed, view_key), std::uint64_t(ref_view_index + 1)));

    // Candidate patches are always drawn in full so that a larger rate only
    // extends the accepted prefix.
    std::vector<Patch> candidates;
    for (int k = 0; k < cfg.num_patches_max; ++k) {
        Patch p;
        p.size = std::min({rng.uniform_int(cfg.patch_size_min, cfg.patch_size_max), w, h});
        p.src_x = rng.uniform_int(0, w - p.size);
        p.src_y = rng.uniform_int(0, h - p.size);
        p.dst_x = rng.uniform_int(0, w - p.size);
        p.dst_y = rng.uniform_int(0, h - p.size);
        candidates.push_back(p);
    }
    std::vector<Patch> accepted;
    if (cfg.hallucination_rate > 0) {
        const double target = cfg.hallucination_rate * w * h;
        double covered = 0;
        for (const auto &p : candidates) {
            const bool need_more = covered < target || int(accepted.size()) < cfg.num_patches_min;
            if (!need_more) break;
            if (std::any_of(accepted.begin(), accepted.end(), [&](const Patch &q) { return overlaps(p, q); }))
                continue;
            accepted.push_back(p);
            covered += double(p.size) * p.size;
        }
    }
    for (const auto &p : accepted) {
        const double fw = std::max(1.0, p.size / 4.0);
        for (int j = 0; j < p.size; ++j)
            for (int i = 0; i < p.size; ++i) {
                const double dx = std::min(i + 0.5, p.size - i - 0.5);
                const double dy = std::min(j + 0.5, p.size - j - 0.5);
                const double wgt = feather(dx, fw) * feather(dy, fw);
                const auto di = out.image.index(p.dst_x + i, p.dst_y + j);
                const auto si = ref.image.index(p.src_x + i, p.src_y + j);
                out.image.pixel(di) = (1.0 - wgt) * out.image.pixel(di) + wgt * ref.image.pixel(si);
            }
    }

    if (cfg.color_drift_amplitude > 0) {
        // two low-frequency cosines per channel, |drift| <= amplitude
        for (int c = 0; c < 3; ++c) {
            double amp[2], fx[2], fy[2], phase[2];
            for (int k = 0; k < 2; ++k) {
                amp[k] = rng.uniform(-1, 1);
                fx[k] = rng.uniform(-1.2, 1.2);
                fy[k] = rng.uniform(-1.2, 1.2);
                phase[k] = rng.uniform(0, 2 * std::numbers::pi);
            }
            const double norm = std::abs(amp[0]) + std::abs(amp[1]) + 1e-12;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double d = 0;
                    for (int k = 0; k < 2; ++k)
                        d += amp[k] * std::cos(2 * std::numbers::pi * (fx[k] * x / w + fy[k] * y / h) + phase[k]);
                    out.image(x, y, c) += cfg.color_drift_amplitude * d / norm;
                }
        }
    }
    out.image.data = out.image.data.cwiseMax(0.0).cwiseMin(1.0);
    out.gt_score = gt_hallucination_score(out.image, gt_render, cfg.score_channel_max);
    return out;
}

std::vector<ScorerTriplet> curate_triplets(const GaussianSetd &scene, const ViewSet &views,
                                           const GaussianSetd &trained_set, const AugmentorConfig &cfg) {
    std::vector<ScorerTriplet> out;
    for (int vi = 0; vi < int(views.views.size()); ++vi) {
        const auto &view = views.views[vi];
        if (view.role == ViewRole::input) continue;
        ScorerTriplet t;
        t.camera = view.camera;
        auto splat = render(trained_set, view.camera);
        t.splat_render = std::move(splat.image);
        t.splat_depth = std::move(splat.depth);
        t.gt_image = render(scene, view.camera).image;
        const int ref = nearest_input_views(views, view.camera, 1).front();
        auto aug = simulate_prior(t.splat_render, t.gt_image, views.views[ref], ref, view.camera, cfg,
                                  std::uint64_t(vi));
        t.augmented = std::move(aug.image);
        t.gt_score = std::move(aug.gt_score);
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace had
