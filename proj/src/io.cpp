// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

namespace had::io {

ImageFormat image_format_from_string(const std::string &s) {
    if (s == "ppm") return ImageFormat::ppm;
    if (s == "png") return ImageFormat::png;
    throw ConfigError("unknown image format: " + s);
}

std::string extension(ImageFormat format) { return format == ImageFormat::ppm ? ".ppm" : ".png"; }

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path &path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error("write failed: " + path.string());
}

namespace {

/// Netpbm-style header tokenizer with '#' comments.
class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : b_(bytes) {}

    std::string token(const char *field) {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < b_.size() && !std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
        if (pos_ == start) throw ParseError(std::string("missing ") + field, pos_);
        return std::string(b_.substr(start, pos_ - start));
    }

    long integer(const char *field) {
        const std::size_t at = next_token_offset();
        const std::string t = token(field);
        char *end = nullptr;
        const long v = std::strtol(t.c_str(), &end, 10);
        if (*end != '\0' || v <= 0) throw ParseError(std::string("invalid ") + field + " '" + t + "'", at);
        return v;
    }

    /// Consumes the single whitespace byte separating header and raster.
    void end_header(const char *field) {
        if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_])))
            throw ParseError(std::string("missing whitespace after ") + field, pos_);
        ++pos_;
    }

    std::size_t pos() const { return pos_; }

private:
    void skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
                ++pos_;
            } else {
                break;
            }
        }
    }
    std::size_t next_token_offset() {
        skip_space();
        return pos_;
    }

    std::string_view b_;
    std::size_t pos_ = 0;
};

std::uint8_t to_byte(double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

template <typename T>
void put_le(std::string &out, T v) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const char *p) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

} // namespace

std::string encode_ppm(const ImageBuffer &img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.reserve(out.size() + std::size_t(img.size()) * 3);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        for (int c = 0; c < 3; ++c) out.push_back(char(to_byte(img.data(i, c))));
    return out;
}

ImageBuffer decode_ppm(std::string_view bytes) {
    HeaderReader h(bytes);
    const std::string magic = h.token("magic number");
    if (magic != "P6") throw ParseError("not a binary PPM (magic '" + magic + "')", 0);
    const long w = h.integer("width");
    const long ht = h.integer("height");
    const long maxval = h.integer("maxval");
    if (maxval != 255) throw ParseError("unsupported maxval " + std::to_string(maxval), h.pos());
    h.end_header("maxval");
    const std::size_t need = std::size_t(w) * std::size_t(ht) * 3;
    if (bytes.size() - h.pos() < need)
        throw ParseError("truncated pixel data: expected " + std::to_string(need) + " bytes", bytes.size());
    ImageBuffer img(static_cast<int>(w), static_cast<int>(ht));
    const auto *p = reinterpret_cast<const unsigned char *>(bytes.data() + h.pos());
    for (Eigen::Index i = 0; i < img.size(); ++i)
        for (int c = 0; c < 3; ++c) img.data(i, c) = p[i * 3 + c] / 255.0;
    return img;
}

std::string encode_pfm(const ScoreMap &map) {
    std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n-1.0\n";
    for (int y = map.height - 1; y >= 0; --y)
        for (int x = 0; x < map.width; ++x) put_le(out, float(map(x, y)));
    return out;
}

ScoreMap decode_pfm(std::string_view bytes) {
    HeaderReader h(bytes);
    const std::string magic = h.token("magic number");
    if (magic != "Pf") throw ParseError("not a single-channel PFM (magic '" + magic + "')", 0);
    const long w = h.integer("width");
    const long ht = h.integer("height");
    const std::size_t scale_at = h.pos();
    const std::string scale_text = h.token("scale");
    char *end = nullptr;
    const double scale = std::strtod(scale_text.c_str(), &end);
    if (*end != '\0' || scale == 0) throw ParseError("invalid scale '" + scale_text + "'", scale_at);
    if (scale > 0) throw ParseError("big-endian PFM is not supported", scale_at);
    h.end_header("scale");
    const std::size_t need = std::size_t(w) * std::size_t(ht) * 4;
    if (bytes.size() - h.pos() < need)
        throw ParseError("truncated pixel data: expected " + std::to_string(need) + " bytes", bytes.size());
    ScoreMap map(static_cast<int>(w), static_cast<int>(ht));
    const char *p = bytes.data() + h.pos();
    for (int y = map.height - 1; y >= 0; --y)
        for (int x = 0; x < map.width; ++x, p += 4) map(x, y) = get_le<float>(p);
    return map;
}

std::string encode_mask_pgm(const BinaryMask &mask) {
    std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
    for (Eigen::Index i = 0; i < mask.size(); ++i) out.push_back(mask.data(i) ? char(255) : char(0));
    return out;
}

void write_ppm(const fs::path &path, const ImageBuffer &img) { write_file(path, encode_ppm(img)); }
ImageBuffer read_ppm(const fs::path &path) { return decode_ppm(read_file(path)); }
void write_pfm(const fs::path &path, const ScoreMap &map) { write_file(path, encode_pfm(map)); }
ScoreMap read_pfm(const fs::path &path) { return decode_pfm(read_file(path)); }
void write_mask(const fs::path &path, const BinaryMask &mask) { write_file(path, encode_mask_pgm(mask)); }

void write_png(const fs::path &path, const ImageBuffer &img) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(img.width);
    image.height = png_uint_32(img.height);
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(std::size_t(img.size()) * 3);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        for (int c = 0; c < 3; ++c) buf[std::size_t(i * 3 + c)] = to_byte(img.data(i, c));
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw Error("png write failed for " + path.string() + ": " + image.message);
}

ImageBuffer read_png(const fs::path &path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw ParseError("png read failed for " + path.string() + ": " + image.message, 0);
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
        throw ParseError("png decode failed for " + path.string() + ": " + image.message, 0);
    ImageBuffer img(int(image.width), int(image.height));
    for (Eigen::Index i = 0; i < img.size(); ++i)
        for (int c = 0; c < 3; ++c) img.data(i, c) = buf[std::size_t(i * 3 + c)] / 255.0;
    return img;
}

fs::path write_image(const fs::path &stem, const ImageBuffer &img, ImageFormat format) {
    fs::path path = stem;
    path += extension(format);
    if (format == ImageFormat::ppm)
        write_ppm(path, img);
    else
        write_png(path, img);
    return path;
}

ImageBuffer read_image(const fs::path &path) {
    const auto ext = path.extension().string();
    if (ext == ".ppm") return read_ppm(path);
    if (ext == ".png") return read_png(path);
    throw ConfigError("unsupported image extension: " + path.string());
}

json load_json(const fs::path &path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

void save_json(const fs::path &path, const json &j) { write_file(path, j.dump(2) + "\n"); }

json camera_to_json(const Camerad &cam, ViewRole role) {
    json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    std::vector<double> r, t;
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) r.push_back(cam.rotation_w2c(row, col));
    for (int k = 0; k < 3; ++k) t.push_back(cam.translation_w2c(k));
    j["R"] = r;
    j["t"] = t;
    j["role"] = to_string(role);
    return j;
}

Camerad camera_from_json(const json &j, ViewRole *role) {
    try {
        Camerad cam;
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto r = j.at("R").get<std::vector<double>>();
        const auto t = j.at("t").get<std::vector<double>>();
        if (r.size() != 9 || t.size() != 3) throw ConfigError("camera JSON: R needs 9 values and t needs 3");
        for (int row = 0; row < 3; ++row)
            for (int col = 0; col < 3; ++col) cam.rotation_w2c(row, col) = r[std::size_t(row * 3 + col)];
        for (int k = 0; k < 3; ++k) cam.translation_w2c(k) = t[std::size_t(k)];
        if (role) *role = j.contains("role") ? view_role_from_string(j.at("role").get<std::string>()) : ViewRole::novel;
        cam.validate();
        return cam;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("camera JSON: ") + e.what());
    }
}

namespace {

void reject_unknown(const json &j, std::initializer_list<const char *> known, const char *what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
    for (const auto &item : j.items())
        if (std::none_of(known.begin(), known.end(), [&](const char *k) { return item.key() == k; }))
            throw ConfigError(std::string(what) + ": unknown field '" + item.key() + "'");
}

template <typename T>
void read_opt(const json &j, const char *key, T &out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

std::string to_string(ThresholdMode m) { return m == ThresholdMode::absolute ? "absolute" : "quantile"; }

ThresholdMode threshold_mode_from_string(const std::string &s) {
    if (s == "absolute") return ThresholdMode::absolute;
    if (s == "quantile") return ThresholdMode::quantile;
    throw ConfigError("unknown threshold mode: " + s);
}

std::string to_string(MaskedSsim m) { return m == MaskedSsim::zero_operands ? "zero_operands" : "exclude_windows"; }

MaskedSsim masked_ssim_from_string(const std::string &s) {
    if (s == "zero_operands") return MaskedSsim::zero_operands;
    if (s == "exclude_windows") return MaskedSsim::exclude_windows;
    throw ConfigError("unknown masked SSIM mode: " + s);
}

std::string to_string(ScoreSource s) { return s == ScoreSource::learned ? "learned" : "oracle"; }

ScoreSource score_source_from_string(const std::string &s) {
    if (s == "learned") return ScoreSource::learned;
    if (s == "oracle") return ScoreSource::oracle;
    throw ConfigError("unknown score source: " + s);
}

std::string to_string(MaskOverride m) {
    switch (m) {
    case MaskOverride::none: return "none";
    case MaskOverride::all_true: return "all_true";
    case MaskOverride::all_false: return "all_false";
    }
    return "none";
}

MaskOverride mask_override_from_string(const std::string &s) {
    if (s == "none") return MaskOverride::none;
    if (s == "all_true") return MaskOverride::all_true;
    if (s == "all_false") return MaskOverride::all_false;
    throw ConfigError("unknown mask override: " + s);
}

} // namespace

json to_json(const SceneSpec &spec) {
    return {{"scene_kind", to_string(spec.scene_kind)},
            {"num_gaussians", spec.num_gaussians},
            {"num_input_views", spec.num_input_views},
            {"num_target_views", spec.num_target_views},
            {"num_test_views", spec.num_test_views},
            {"width", spec.width},
            {"height", spec.height},
            {"seed", spec.seed},
            {"input_arc_deg", spec.input_arc_deg},
            {"extrapolation_arc_deg", spec.extrapolation_arc_deg},
            {"camera_distance", spec.camera_distance},
            {"fov_deg", spec.fov_deg}};
}

SceneSpec scene_spec_from_json(const json &j) {
    reject_unknown(j,
                   {"scene_kind", "num_gaussians", "num_input_views", "num_target_views", "num_test_views", "width",
                    "height", "seed", "input_arc_deg", "extrapolation_arc_deg", "camera_distance", "fov_deg"},
                   "scene spec");
    SceneSpec s;
    std::string kind = to_string(s.scene_kind);
    read_opt(j, "scene_kind", kind);
    s.scene_kind = scene_kind_from_string(kind);
    read_opt(j, "num_gaussians", s.num_gaussians);
    read_opt(j, "num_input_views", s.num_input_views);
    read_opt(j, "num_target_views", s.num_target_views);
    read_opt(j, "num_test_views", s.num_test_views);
    read_opt(j, "width", s.width);
    read_opt(j, "height", s.height);
    read_opt(j, "seed", s.seed);
    read_opt(j, "input_arc_deg", s.input_arc_deg);
    read_opt(j, "extrapolation_arc_deg", s.extrapolation_arc_deg);
    read_opt(j, "camera_distance", s.camera_distance);
    read_opt(j, "fov_deg", s.fov_deg);
    s.validate();
    return s;
}

json to_json(const AugmentorConfig &cfg) {
    return {{"hallucination_rate", cfg.hallucination_rate},
            {"patch_size_min", cfg.patch_size_min},
            {"patch_size_max", cfg.patch_size_max},
            {"num_patches_min", cfg.num_patches_min},
            {"num_patches_max", cfg.num_patches_max},
            {"color_drift_amplitude", cfg.color_drift_amplitude},
            {"residual_blend", cfg.residual_blend},
            {"seed", cfg.seed},
            {"score_channel_max", cfg.score_channel_max}};
}

AugmentorConfig augmentor_config_from_json(const json &j, AugmentorConfig c) {
    reject_unknown(j,
                   {"hallucination_rate", "patch_size_min", "patch_size_max", "num_patches_min", "num_patches_max",
                    "color_drift_amplitude", "residual_blend", "seed", "score_channel_max"},
                   "augmentor config");
    read_opt(j, "hallucination_rate", c.hallucination_rate);
    read_opt(j, "patch_size_min", c.patch_size_min);
    read_opt(j, "patch_size_max", c.patch_size_max);
    read_opt(j, "num_patches_min", c.num_patches_min);
    read_opt(j, "num_patches_max", c.num_patches_max);
    read_opt(j, "color_drift_amplitude", c.color_drift_amplitude);
    read_opt(j, "residual_blend", c.residual_blend);
    read_opt(j, "seed", c.seed);
    read_opt(j, "score_channel_max", c.score_channel_max);
    c.validate();
    return c;
}

json to_json(const TrainConfig &c) {
    return {{"lambda_input", c.lambda_input},
            {"lambda_novel", c.lambda_novel},
            {"lr_mean", c.lr_mean},
            {"lr_scale", c.lr_scale},
            {"lr_opacity", c.lr_opacity},
            {"lr_rotation", c.lr_rotation},
            {"lr_sh0", c.lr_sh0},
            {"lr_shN", c.lr_shN},
            {"spatial_lr_scale", c.spatial_lr_scale},
            {"lr_multiplier", c.lr_multiplier},
            {"total_iters", c.total_iters},
            {"aug_interval", c.aug_interval},
            {"novel_views_per_round", c.novel_views_per_round},
            {"k_versions", c.k_versions},
            {"prog_fraction", c.prog_fraction},
            {"mask_mode", to_string(c.mask.mode)},
            {"mask_threshold", c.mask.threshold},
            {"pipeline_mode", to_string(c.pipeline_mode)},
            {"fusion", to_string(c.fusion)},
            {"fusion_temperature", c.fusion_temperature},
            {"two_phase", c.two_phase},
            {"two_phase_fraction", c.two_phase_fraction},
            {"input_loss_weights", {c.input_weights.l1, c.input_weights.dssim}},
            {"novel_loss_weights", {c.novel_weights.l1, c.novel_weights.dssim}},
            {"masked_ssim", to_string(c.masked_ssim)},
            {"score_source", to_string(c.score_source)},
            {"mask_override", to_string(c.mask_override)},
            {"num_gaussians", c.num_gaussians},
            {"init_scale_factor", c.init_scale_factor},
            {"sh_degree", c.sh_degree},
            {"eval_interval", c.eval_interval},
            {"seed", c.seed},
            {"augmentor", to_json(c.augmentor)}};
}

TrainConfig train_config_from_json(const json &j, TrainConfig c) {
    reject_unknown(j,
                   {"lambda_input", "lambda_novel", "lr_mean", "lr_scale", "lr_opacity", "lr_rotation", "lr_sh0",
                    "lr_shN", "spatial_lr_scale", "lr_multiplier", "total_iters", "aug_interval",
                    "novel_views_per_round", "k_versions", "prog_fraction", "mask_mode", "mask_threshold",
                    "pipeline_mode", "fusion", "fusion_temperature", "two_phase", "two_phase_fraction",
                    "input_loss_weights", "novel_loss_weights", "masked_ssim", "score_source", "mask_override",
                    "num_gaussians", "init_scale_factor", "sh_degree", "eval_interval", "seed", "augmentor"},
                   "train config");
    read_opt(j, "lambda_input", c.lambda_input);
    read_opt(j, "lambda_novel", c.lambda_novel);
    read_opt(j, "lr_mean", c.lr_mean);
    read_opt(j, "lr_scale", c.lr_scale);
    read_opt(j, "lr_opacity", c.lr_opacity);
    read_opt(j, "lr_rotation", c.lr_rotation);
    read_opt(j, "lr_sh0", c.lr_sh0);
    read_opt(j, "lr_shN", c.lr_shN);
    read_opt(j, "spatial_lr_scale", c.spatial_lr_scale);
    read_opt(j, "lr_multiplier", c.lr_multiplier);
    read_opt(j, "total_iters", c.total_iters);
    read_opt(j, "aug_interval", c.aug_interval);
    read_opt(j, "novel_views_per_round", c.novel_views_per_round);
    read_opt(j, "k_versions", c.k_versions);
    read_opt(j, "prog_fraction", c.prog_fraction);
    std::string s;
    if (j.contains("mask_mode")) c.mask.mode = threshold_mode_from_string(j.at("mask_mode").get<std::string>());
    read_opt(j, "mask_threshold", c.mask.threshold);
    if (j.contains("pipeline_mode")) c.pipeline_mode = pipeline_mode_from_string(j.at("pipeline_mode").get<std::string>());
    if (j.contains("fusion")) c.fusion = fusion_method_from_string(j.at("fusion").get<std::string>());
    read_opt(j, "fusion_temperature", c.fusion_temperature);
    read_opt(j, "two_phase", c.two_phase);
    read_opt(j, "two_phase_fraction", c.two_phase_fraction);
    auto read_weights = [&](const char *key, LossWeights &w) {
        if (!j.contains(key)) return;
        std::vector<double> v;
        read_opt(j, key, v);
        if (v.size() != 2) throw ConfigError(std::string("field '") + key + "' needs [l1, dssim]");
        w = {v[0], v[1]};
    };
    read_weights("input_loss_weights", c.input_weights);
    read_weights("novel_loss_weights", c.novel_weights);
    if (j.contains("masked_ssim")) c.masked_ssim = masked_ssim_from_string(j.at("masked_ssim").get<std::string>());
    if (j.contains("score_source")) c.score_source = score_source_from_string(j.at("score_source").get<std::string>());
    if (j.contains("mask_override"))
        c.mask_override = mask_override_from_string(j.at("mask_override").get<std::string>());
    read_opt(j, "num_gaussians", c.num_gaussians);
    read_opt(j, "init_scale_factor", c.init_scale_factor);
    read_opt(j, "sh_degree", c.sh_degree);
    read_opt(j, "eval_interval", c.eval_interval);
    read_opt(j, "seed", c.seed);
    if (j.contains("augmentor")) c.augmentor = augmentor_config_from_json(j.at("augmentor"), c.augmentor);
    c.validate();
    return c;
}

json to_json(const ScorerModel &m) {
    std::vector<double> w(m.weights.data(), m.weights.data() + kNumFeatures);
    std::vector<bool> mask(m.feature_mask.begin(), m.feature_mask.end());
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(m.dataset_hash));
    return {{"weights", w}, {"bias", m.bias}, {"feature_mask", mask}, {"ridge", m.ridge}, {"dataset_hash", hash}};
}

ScorerModel scorer_model_from_json(const json &j) {
    reject_unknown(j, {"weights", "bias", "feature_mask", "ridge", "dataset_hash"}, "scorer model");
    ScorerModel m;
    try {
        const auto w = j.at("weights").get<std::vector<double>>();
        const auto mask = j.at("feature_mask").get<std::vector<bool>>();
        if (w.size() != kNumFeatures || mask.size() != kNumFeatures)
            throw ConfigError("scorer model: weights and feature_mask need 5 entries");
        for (int k = 0; k < kNumFeatures; ++k) {
            m.weights(k) = w[std::size_t(k)];
            m.feature_mask[std::size_t(k)] = mask[std::size_t(k)];
        }
        m.bias = j.at("bias").get<double>();
        m.ridge = j.at("ridge").get<double>();
        if (j.contains("dataset_hash"))
            m.dataset_hash = std::stoull(j.at("dataset_hash").get<std::string>(), nullptr, 16);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("scorer model: ") + e.what());
    }
    m.validate();
    return m;
}

void save_gaussians(const fs::path &stem, const GaussianSetd &set) {
    fs::path meta = stem, blob = stem;
    meta += ".json";
    blob += ".bin";
    json j = {{"count", set.size()},
              {"sh_degree", set.sh_degree},
              {"background_color", {set.background_color.x(), set.background_color.y(), set.background_color.z()}},
              {"stride", 23},
              {"layout", "mean[3] log_scale[3] rotation_wxyz[4] opacity_logit sh[4x3] row-major"},
              {"blob", blob.filename().string()}};
    save_json(meta, j);
    std::string bytes;
    bytes.reserve(set.size() * 23 * 8);
    for (const auto &g : set.primitives) {
        for (int k = 0; k < 3; ++k) put_le(bytes, g.mean(k));
        for (int k = 0; k < 3; ++k) put_le(bytes, g.log_scale(k));
        put_le(bytes, g.rotation.w());
        put_le(bytes, g.rotation.x());
        put_le(bytes, g.rotation.y());
        put_le(bytes, g.rotation.z());
        put_le(bytes, g.opacity_logit);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 3; ++c) put_le(bytes, g.sh(r, c));
    }
    write_file(blob, bytes);
}

GaussianSetd load_gaussians(const fs::path &stem) {
    fs::path meta = stem;
    meta += ".json";
    const json j = load_json(meta);
    GaussianSetd set;
    std::size_t count = 0;
    try {
        count = j.at("count").get<std::size_t>();
        set.sh_degree = j.at("sh_degree").get<int>();
        const auto bg = j.at("background_color").get<std::vector<double>>();
        if (bg.size() != 3) throw ConfigError("checkpoint: background_color needs 3 values");
        set.background_color = Eigen::Vector3d(bg[0], bg[1], bg[2]);
        if (j.at("stride").get<int>() != 23) throw ConfigError("checkpoint: unsupported stride");
    } catch (const json::exception &e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
    const std::string bytes = read_file(stem.parent_path() / j.at("blob").get<std::string>());
    if (bytes.size() != count * 23 * 8)
        throw ParseError("checkpoint blob has " + std::to_string(bytes.size()) + " bytes, expected " +
                             std::to_string(count * 23 * 8),
                         std::min(bytes.size(), count * 23 * 8));
    const char *p = bytes.data();
    auto next = [&] {
        const double v = get_le<double>(p);
        p += 8;
        return v;
    };
    for (std::size_t i = 0; i < count; ++i) {
        Gaussian g;
        for (int k = 0; k < 3; ++k) g.mean(k) = next();
        for (int k = 0; k < 3; ++k) g.log_scale(k) = next();
        const double w = next(), x = next(), y = next(), z = next();
        g.rotation = Eigen::Quaterniond(w, x, y, z);
        g.opacity_logit = next();
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 3; ++c) g.sh(r, c) = next();
        set.primitives.push_back(g);
    }
    return set;
}

namespace {

std::string indexed(const char *prefix, int i, int width = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
    return buf;
}

} // namespace

void save_scene(const fs::path &dir, const SceneSpec &spec, const GaussianSetd &gt, const ViewSet &views,
                ImageFormat format) {
    fs::create_directories(dir / "views");
    save_json(dir / "scene.json", to_json(spec));
    save_gaussians(dir / "gt_gaussians", gt);
    for (int i = 0; i < int(views.views.size()); ++i) {
        const auto &v = views.views[i];
        const fs::path stem = dir / "views" / indexed("view_", i);
        json cam = camera_to_json(v.camera, v.role);
        cam["image"] = write_image(stem, v.image, format).filename().string();
        fs::path meta = stem;
        meta += ".json";
        save_json(meta, cam);
    }
}

LoadedScene load_scene(const fs::path &dir) {
    LoadedScene s;
    s.spec = scene_spec_from_json(load_json(dir / "scene.json"));
    s.gt = load_gaussians(dir / "gt_gaussians");
    for (int i = 0;; ++i) {
        fs::path meta = dir / "views" / indexed("view_", i);
        meta += ".json";
        if (!fs::exists(meta)) break;
        json j = load_json(meta);
        const std::string image = j.at("image").get<std::string>();
        j.erase("image");
        ViewRecord v;
        v.camera = camera_from_json(j, &v.role);
        v.image = read_image(dir / "views" / image);
        s.views.views.push_back(std::move(v));
    }
    s.views.validate();
    return s;
}

void save_triplets(const fs::path &dir, const std::vector<ScorerTriplet> &triplets) {
    for (int i = 0; i < int(triplets.size()); ++i) {
        const auto &t = triplets[i];
        const fs::path sub = dir / indexed("view_", i);
        fs::create_directories(sub);
        write_ppm(sub / "gt.ppm", t.gt_image);
        write_ppm(sub / "aug.ppm", t.augmented);
        write_ppm(sub / "splat.ppm", t.splat_render);
        write_pfm(sub / "score.pfm", t.gt_score);
        write_pfm(sub / "depth.pfm", t.splat_depth);
        save_json(sub / "camera.json", camera_to_json(t.camera, ViewRole::novel));
    }
}

std::vector<ScorerTriplet> load_triplets(const fs::path &dir) {
    std::vector<ScorerTriplet> out;
    for (int i = 0;; ++i) {
        const fs::path sub = dir / indexed("view_", i);
        if (!fs::exists(sub)) break;
        ScorerTriplet t;
        t.gt_image = read_ppm(sub / "gt.ppm");
        t.augmented = read_ppm(sub / "aug.ppm");
        t.splat_render = read_ppm(sub / "splat.ppm");
        t.gt_score = read_pfm(sub / "score.pfm");
        t.splat_depth = read_pfm(sub / "depth.pfm");
        t.camera = camera_from_json(load_json(sub / "camera.json"));
        out.push_back(std::move(t));
    }
    return out;
}

void save_version_stack(const fs::path &dir, const VersionStack &stack) {
    stack.validate();
    for (int k = 0; k < stack.size(); ++k) {
        const fs::path sub = dir / indexed("version_", k, 2);
        fs::create_directories(sub);
        write_ppm(sub / "image.ppm", stack.images[std::size_t(k)]);
        write_pfm(sub / "score.pfm", stack.scores[std::size_t(k)]);
    }
}

VersionStack load_version_stack(const fs::path &dir) {
    VersionStack stack;
    for (int k = 0;; ++k) {
        const fs::path sub = dir / indexed("version_", k, 2);
        if (!fs::exists(sub)) break;
        stack.images.push_back(read_ppm(sub / "image.ppm"));
        stack.scores.push_back(read_pfm(sub / "score.pfm"));
        stack.ref_indices.push_back(k);
    }
    if (stack.size() == 0) throw ContractViolation("no version_NN directories under " + dir.string());
    stack.validate();
    return stack;
}

void write_results(const fs::path &path, const std::vector<ResultRow> &rows) {
    std::ostringstream os;
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    write_results_csv(os, rows, std::string("generated ") + stamp);
    write_file(path, os.str());
}

} // namespace had::io
