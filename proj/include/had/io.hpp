// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "had/augmentor.hpp"
#include "had/experiments.hpp"
#include "had/raster.hpp"
#include "had/scene.hpp"
#include "had/scorer.hpp"
#include "had/trainer.hpp"

namespace had::io {

namespace fs = std::filesystem;
using nlohmann::json;

enum class ImageFormat { ppm, png };

ImageFormat image_format_from_string(const std::string &s);
std::string extension(ImageFormat format);

/// Binary PPM (P6, maxval 255). Values are clamped to [0, 1] and rounded.
std::string encode_ppm(const ImageBuffer &img);
ImageBuffer decode_ppm(std::string_view bytes);

/// Single-channel little-endian PFM ("Pf", scale -1), rows stored bottom to top.
std::string encode_pfm(const ScoreMap &map);
ScoreMap decode_pfm(std::string_view bytes);

/// Binary PGM (P5) with 255 for excluded pixels.
std::string encode_mask_pgm(const BinaryMask &mask);

void write_ppm(const fs::path &path, const ImageBuffer &img);
ImageBuffer read_ppm(const fs::path &path);
void write_pfm(const fs::path &path, const ScoreMap &map);
ScoreMap read_pfm(const fs::path &path);
void write_png(const fs::path &path, const ImageBuffer &img);
ImageBuffer read_png(const fs::path &path);
void write_mask(const fs::path &path, const BinaryMask &mask);

/// Writes `stem` plus the format's extension; returns the full path.
fs::path write_image(const fs::path &stem, const ImageBuffer &img, ImageFormat format);
/// Dispatches on the file extension (.ppm or .png).
ImageBuffer read_image(const fs::path &path);

std::string read_file(const fs::path &path);
void write_file(const fs::path &path, std::string_view bytes);

json camera_to_json(const Camerad &cam, ViewRole role);
Camerad camera_from_json(const json &j, ViewRole *role = nullptr);

json to_json(const SceneSpec &spec);
SceneSpec scene_spec_from_json(const json &j);
json to_json(const AugmentorConfig &cfg);
AugmentorConfig augmentor_config_from_json(const json &j, AugmentorConfig base = {});
json to_json(const TrainConfig &cfg);
/// Fields missing from `j` keep the values of `base`; unknown fields are rejected.
TrainConfig train_config_from_json(const json &j, TrainConfig base = {});
json to_json(const ScorerModel &model);
ScorerModel scorer_model_from_json(const json &j);

json load_json(const fs::path &path);
void save_json(const fs::path &path, const json &j);

/// Checkpoint: `<stem>.json` (metadata) plus `<stem>.bin` (little-endian doubles,
/// 23 per primitive: mean, log_scale, rotation w x y z, opacity_logit, sh row-major).
void save_gaussians(const fs::path &stem, const GaussianSetd &set);
GaussianSetd load_gaussians(const fs::path &stem);

/// Scene directory: scene.json, gt_gaussians.{json,bin}, views/view_%04d.{ppm|png,json}.
void save_scene(const fs::path &dir, const SceneSpec &spec, const GaussianSetd &gt, const ViewSet &views,
                ImageFormat format = ImageFormat::ppm);
struct LoadedScene {
    SceneSpec spec;
    GaussianSetd gt;
    ViewSet views;
};
LoadedScene load_scene(const fs::path &dir);

/// Triplet directory: view_%04d/{gt.ppm, aug.ppm, splat.ppm, score.pfm, depth.pfm, camera.json}.
void save_triplets(const fs::path &dir, const std::vector<ScorerTriplet> &triplets);
std::vector<ScorerTriplet> load_triplets(const fs::path &dir);

/// Version stack directory: version_%02d/{image.ppm, score.pfm}.
void save_version_stack(const fs::path &dir, const VersionStack &stack);
VersionStack load_version_stack(const fs::path &dir);

void write_results(const fs::path &path, const std::vector<ResultRow> &rows);

} // namespace had::io
