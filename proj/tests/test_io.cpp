// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "had/io.hpp"
#include "test_support.hpp"

namespace had {
namespace {

namespace fs = std::filesystem;
using testing::random_image;

class TempDir {
public:
    TempDir() {
        const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("had_io_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path &path() const { return path_; }

private:
    fs::path path_;
};

/// Score map whose values are exactly representable as float.
ScoreMap float_score(Rng &rng, int w, int h) {
    ScoreMap s(w, h);
    for (auto &v : s.data) v = double(float(rng.uniform()));
    return s;
}

TEST(Pfm, RoundTripIsBitExact) {
    TempDir dir;
    Rng rng(1);
    const auto s = float_score(rng, 13, 7);
    io::write_pfm(dir.path() / "s.pfm", s);
    const auto back = io::read_pfm(dir.path() / "s.pfm");
    EXPECT_TRUE(back == s);
}

TEST(Pfm, HeaderLayout) {
    ScoreMap s(2, 2);
    s(0, 0) = 1;
    s(1, 1) = 2;
    const std::string bytes = io::encode_pfm(s);
    EXPECT_EQ(bytes.substr(0, 12), "Pf\n2 2\n-1.0\n");
    EXPECT_EQ(bytes.size(), 12u + 16u);
    // Bottom row first: (0, 1), (1, 1), then (0, 0), (1, 0).
    float v[4];
    std::memcpy(v, bytes.data() + 12, 16);
    EXPECT_EQ(v[1], 2.0f);
    EXPECT_EQ(v[2], 1.0f);
}

TEST(Pfm, MalformedInputs) {
    EXPECT_THROW(io::decode_pfm("PF\n2 2\n-1.0\n"), ParseError);
    EXPECT_THROW(io::decode_pfm("Pf\n2 2\n1.0\n"), ParseError);
    EXPECT_THROW(io::decode_pfm("Pf\n2 2\n-1.0\n1234"), ParseError);
}

TEST(Ppm, RoundTripWithinQuantization) {
    TempDir dir;
    Rng rng(2);
    const auto img = random_image(rng, 17, 11);
    io::write_ppm(dir.path() / "a.ppm", img);
    const auto back = io::read_ppm(dir.path() / "a.ppm");
    ASSERT_TRUE(back.same_shape(img));
    EXPECT_LE((back.data - img.data).abs().maxCoeff(), 1.0 / 255.0);
}

TEST(Ppm, EncodeIsStable) {
    Rng rng(3);
    const auto img = random_image(rng, 5, 4);
    const std::string once = io::encode_ppm(img);
    EXPECT_EQ(io::encode_ppm(io::decode_ppm(once)), once);
    EXPECT_EQ(once.substr(0, 11), "P6\n5 4\n255\n");
}

TEST(Ppm, TruncatedHeaderNamesTheMissingField) {
    auto message = [](std::string_view bytes) {
        try {
            io::decode_ppm(bytes);
        } catch (const ParseError &e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("P6\n4 ").find("missing height"), std::string::npos);
    EXPECT_NE(message("P6\n4 3\n").find("missing maxval"), std::string::npos);
    EXPECT_NE(message("P6\n").find("missing width"), std::string::npos);
    EXPECT_NE(message("").find("missing magic number"), std::string::npos);
    try {
        io::decode_ppm("P6\n4 ");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_EQ(e.offset(), 5u);
    }
}

TEST(Ppm, RejectsOtherFormats) {
    EXPECT_THROW(io::decode_ppm("P3\n1 1\n255\n0 0 0"), ParseError);
    EXPECT_THROW(io::decode_ppm("P6\n1 1\n65535\n\0\0\0\0\0\0"), ParseError);
    EXPECT_THROW(io::decode_ppm("P6\n2 2\n255\nabc"), ParseError);
}

TEST(Png, RoundTripWithinQuantization) {
    TempDir dir;
    Rng rng(4);
    const auto img = random_image(rng, 9, 6);
    const auto path = io::write_image(dir.path() / "img", img, io::ImageFormat::png);
    EXPECT_EQ(path.extension(), ".png");
    const auto back = io::read_image(path);
    EXPECT_LE((back.data - img.data).abs().maxCoeff(), 1.0 / 255.0);
    EXPECT_TRUE(back == io::decode_ppm(io::encode_ppm(img)));
}

TEST(Json, TrainConfigRoundTrip) {
    TrainConfig c;
    c.total_iters = 123;
    c.pipeline_mode = PipelineMode::had_ms;
    c.fusion = FusionMethod::weighted;
    c.mask = {ThresholdMode::quantile, 0.95};
    c.masked_ssim = MaskedSsim::exclude_windows;
    c.init_scale_factor = 0.5;
    c.augmentor.hallucination_rate = 0.2;
    c.seed = 77;
    const auto back = io::train_config_from_json(io::to_json(c));
    EXPECT_EQ(io::to_json(back), io::to_json(c));
    EXPECT_EQ(back.total_iters, 123);
    EXPECT_EQ(back.mask.mode, ThresholdMode::quantile);
    EXPECT_EQ(back.augmentor.hallucination_rate, 0.2);
}

TEST(Json, MissingFieldsKeepDefaultsAndUnknownFieldsFail) {
    const auto c = io::train_config_from_json(io::json{{"total_iters", 10}});
    EXPECT_EQ(c.total_iters, 10);
    EXPECT_EQ(c.lr_mean, 8e-5);
    EXPECT_EQ(c.mask.threshold, 0.9);
    EXPECT_THROW(io::train_config_from_json(io::json{{"totl_iters", 10}}), ConfigError);
}

TEST(Json, ScorerModelAndCamera) {
    ScorerModel m;
    m.weights << 0.1, -0.2, 0.3, 0.0, 0.5;
    m.bias = 0.01;
    m.feature_mask[3] = false;
    m.dataset_hash = 0xfedcba9876543210ULL;
    const auto back = io::scorer_model_from_json(io::to_json(m));
    EXPECT_EQ(back.weights, m.weights);
    EXPECT_EQ(back.bias, m.bias);
    EXPECT_EQ(back.feature_mask, m.feature_mask);
    EXPECT_EQ(back.dataset_hash, m.dataset_hash);

    const auto cam = testing::test_camera(20, 10);
    ViewRole role;
    const auto j = io::camera_to_json(cam, ViewRole::target);
    EXPECT_EQ(j.at("R").size(), 9u);
    EXPECT_EQ(j.at("t").size(), 3u);
    EXPECT_TRUE(io::camera_from_json(j, &role) == cam);
    EXPECT_EQ(role, ViewRole::target);
}

TEST(Json, LoadReportsByteOffset) {
    TempDir dir;
    io::write_file(dir.path() / "bad.json", "{\"a\": 1,,}");
    try {
        io::load_json(dir.path() / "bad.json");
        FAIL();
    } catch (const ParseError &e) {
        EXPECT_GT(e.offset(), 0u);
    }
}

TEST(Persistence, GaussiansRoundTrip) {
    TempDir dir;
    Rng rng(5);
    const auto set = testing::random_scene(rng, 8, 1);
    io::save_gaussians(dir.path() / "ckpt", set);
    EXPECT_TRUE(fs::exists(dir.path() / "ckpt.json"));
    EXPECT_EQ(fs::file_size(dir.path() / "ckpt.bin"), set.size() * 23 * sizeof(double));
    EXPECT_TRUE(io::load_gaussians(dir.path() / "ckpt") == set);
}

TEST(Persistence, SceneRoundTrip) {
    TempDir dir;
    SceneSpec spec;
    spec.width = spec.height = 16;
    spec.num_gaussians = 30;
    spec.seed = 6;
    const auto [gt, views] = make_synthetic_scene(spec);
    io::save_scene(dir.path(), spec, gt, views);
    const auto loaded = io::load_scene(dir.path());
    EXPECT_TRUE(loaded.gt == gt);
    EXPECT_EQ(io::to_json(loaded.spec), io::to_json(spec));
    ASSERT_EQ(loaded.views.views.size(), views.views.size());
    for (std::size_t i = 0; i < views.views.size(); ++i) {
        EXPECT_TRUE(loaded.views.views[i].camera == views.views[i].camera);
        EXPECT_EQ(loaded.views.views[i].role, views.views[i].role);
        EXPECT_LE((loaded.views.views[i].image.data - views.views[i].image.data).abs().maxCoeff(), 1.0 / 255.0);
    }
}

TEST(Persistence, VersionStackRoundTrip) {
    TempDir dir;
    Rng rng(7);
    VersionStack st;
    for (int k = 0; k < 2; ++k) {
        st.images.push_back(io::decode_ppm(io::encode_ppm(random_image(rng, 6, 5))));
        st.scores.push_back(float_score(rng, 6, 5));
        st.ref_indices.push_back(k);
    }
    io::save_version_stack(dir.path(), st);
    EXPECT_TRUE(fs::exists(dir.path() / "version_00" / "image.ppm"));
    const auto back = io::load_version_stack(dir.path());
    ASSERT_EQ(back.size(), 2);
    for (int k = 0; k < 2; ++k) {
        EXPECT_TRUE(back.images[k] == st.images[k]);
        EXPECT_TRUE(back.scores[k] == st.scores[k]);
    }
}

TEST(Results, CsvLayout) {
    TempDir dir;
    std::vector<ResultRow> rows{{20.5, 0.75, std::numeric_limits<double>::quiet_NaN(), "blob_field_1", "splat_only", 3},
                                {21.25, 0.8, 0.0125, "blob_field_1", "had", 3}};
    io::write_results(dir.path() / "r.csv", rows);
    std::ifstream in(dir.path() / "r.csv");
    std::string first, header, line1, line2;
    std::getline(in, first);
    std::getline(in, header);
    std::getline(in, line1);
    std::getline(in, line2);
    EXPECT_EQ(first.front(), '#');
    EXPECT_EQ(header, "psnr,ssim,score_mae,scene,method,seed");
    EXPECT_EQ(line1, "20.500000,0.750000,nan,blob_field_1,splat_only,3");
    EXPECT_EQ(line2, "21.250000,0.800000,0.012500,blob_field_1,had,3");
}

} // namespace
} // namespace had
