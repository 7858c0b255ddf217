// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "had/losses.hpp"
#include "had/rng.hpp"
#include "test_support.hpp"

namespace had {
namespace {

using testing::random_image;
using testing::rel_error;

ImageBuffer constant_image(int w, int h, double v) { return ImageBuffer(w, h, v); }

/// Direct 11x11 windowed SSIM with zero padding, one channel at a time.
double ssim_oracle(const ImageBuffer &a, const ImageBuffer &b) {
    const int w = a.width, h = a.height, r = kSsimWindow / 2;
    std::vector<double> g(kSsimWindow);
    double gs = 0;
    for (int i = 0; i < kSsimWindow; ++i) {
        g[i] = std::exp(-double((i - r) * (i - r)) / (2 * kSsimSigma * kSsimSigma));
        gs += g[i];
    }
    for (auto &v : g) v /= gs;
    double total = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                        const double wt = g[dx + r] * g[dy + r];
                        const double va = a(xx, yy, c), vb = b(xx, yy, c);
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                const double num = (2 * ma * mb + kSsimC1) * (2 * (sab - ma * mb) + kSsimC2);
                const double den = (ma * ma + mb * mb + kSsimC1) * ((saa - ma * ma) + (sbb - mb * mb) + kSsimC2);
                total += num / den;
            }
    return total / (3.0 * w * h);
}

/// Worst relative error between the analytic gradient of `loss` and central
/// differences with step 1e-4 over every channel of every pixel of `a`.
double worst_fd_error(ImageBuffer a, const std::function<LossValue(const ImageBuffer &)> &loss) {
    const ImageBuffer grad = loss(a).grad_image;
    constexpr double eps = 1e-4;
    double worst = 0;
    for (Eigen::Index i = 0; i < a.data.size(); ++i) {
        double &v = a.data.data()[i];
        const double keep = v;
        v = keep + eps;
        const double up = loss(a).value;
        v = keep - eps;
        const double down = loss(a).value;
        v = keep;
        worst = std::max(worst, rel_error(grad.data.data()[i], (up - down) / (2 * eps)));
    }
    return worst;
}

/// Random image whose entries differ from `b` by at least 0.02, away from the L1 kinks.
ImageBuffer offset_image(Rng &rng, const ImageBuffer &b) {
    ImageBuffer a = b;
    for (Eigen::Index i = 0; i < a.data.size(); ++i)
        a.data.data()[i] += (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.02, 0.3);
    return a;
}

BinaryMask random_mask(Rng &rng, int w, int h, double p) {
    BinaryMask m(w, h);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data(i) = rng.uniform() < p;
    return m;
}

TEST(L1Loss, IdenticalImagesGiveZero) {
    Rng rng(1);
    const auto a = random_image(rng, 16, 16);
    const auto l = l1_loss(a, a);
    EXPECT_EQ(l.value, 0.0);
}

TEST(L1Loss, ConstantOffset) {
    const auto a = constant_image(16, 16, 0.4);
    const auto b = constant_image(16, 16, 0.5);
    EXPECT_NEAR(l1_loss(a, b).value, 0.1, 1e-15);
}

TEST(L1Loss, FullyMaskedIsZeroWithZeroGradient) {
    Rng rng(2);
    const auto a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
    const auto l = l1_loss(a, b, BinaryMask(16, 16, true));
    EXPECT_EQ(l.value, 0.0);
    EXPECT_TRUE((l.grad_image.data == 0).all());
}

TEST(L1Loss, GradientMatchesFiniteDifferences) {
    Rng rng(3);
    const auto b = random_image(rng, 16, 16);
    const auto mask = random_mask(rng, 16, 16, 0.3);
    EXPECT_LT(worst_fd_error(offset_image(rng, b), [&](const ImageBuffer &a) { return l1_loss(a, b); }), 1e-3);
    EXPECT_LT(worst_fd_error(offset_image(rng, b), [&](const ImageBuffer &a) { return l1_loss(a, b, mask); }),
              1e-3);
}

TEST(L1Loss, DimensionMismatchThrows) {
    EXPECT_THROW(l1_loss(ImageBuffer(4, 4), ImageBuffer(4, 5)), ContractViolation);
}

TEST(Ssim, SelfSimilarityIsOne) {
    Rng rng(4);
    const auto a = random_image(rng, 24, 20);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(d_ssim_loss(a, a).value, 0.0, 1e-12);
}

TEST(Ssim, MatchesDirectWindowedEvaluation) {
    Rng rng(5);
    const auto a = random_image(rng, 19, 17), b = random_image(rng, 19, 17);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-12);
}

TEST(Ssim, IsSymmetric) {
    Rng rng(6);
    const auto a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
}

TEST(DSsim, InvertedContentIsDissimilar) {
    ImageBuffer a(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) a(x, y, c) = 0.5 + 0.4 * std::sin(0.7 * x + 0.3 * c) * std::cos(0.5 * y);
    ImageBuffer inv = a;
    inv.data = 1.0 - a.data;
    const double v = d_ssim_loss(a, inv).value;
    EXPECT_GT(v, 0.4);
    EXPECT_NEAR(v, 0.5 * (1.0 - ssim_oracle(a, inv)), 1e-12);
}

TEST(DSsim, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    const auto b = random_image(rng, 16, 16);
    EXPECT_LT(worst_fd_error(offset_image(rng, b), [&](const ImageBuffer &a) { return d_ssim_loss(a, b); }),
              1e-3);
}

TEST(DSsim, MaskedGradientsMatchFiniteDifferences) {
    Rng rng(8);
    const auto b = random_image(rng, 16, 16);
    const auto mask = random_mask(rng, 16, 16, 0.25);
    for (auto mode : {MaskedSsim::zero_operands, MaskedSsim::exclude_windows}) {
        const double worst = worst_fd_error(
            offset_image(rng, b), [&](const ImageBuffer &a) { return d_ssim_loss(a, b, mask, mode); });
        EXPECT_LT(worst, 1e-3);
    }
}

TEST(DSsim, SmallImageThrows) {
    EXPECT_THROW(d_ssim_loss(ImageBuffer(10, 10), ImageBuffer(10, 10)), ContractViolation);
}

TEST(InputViewLoss, WeightsReadBack) {
    const auto w = input_loss_weights();
    EXPECT_EQ(w.l1, 0.8);
    EXPECT_EQ(w.dssim, 0.2);
}

TEST(InputViewLoss, ZeroOnIdenticalImages) {
    Rng rng(9);
    const auto a = random_image(rng, 16, 16);
    EXPECT_NEAR(input_view_loss(a, a).value, 0.0, 1e-12);
}

TEST(InputViewLoss, L1ComponentOfConstantOffset) {
    const auto a = constant_image(16, 16, 0.3), b = constant_image(16, 16, 0.4);
    const double total = input_view_loss(a, b).value;
    const double ssim_part = 0.2 * d_ssim_loss(a, b).value;
    EXPECT_NEAR(total - ssim_part, 0.08, 1e-15);
}

TEST(InputViewLoss, GradientMatchesFiniteDifferences) {
    Rng rng(10);
    const auto b = random_image(rng, 16, 16);
    EXPECT_LT(worst_fd_error(offset_image(rng, b), [&](const ImageBuffer &a) { return input_view_loss(a, b); }),
              1e-3);
}

TEST(NovelViewLoss, FullyMaskedIsZero) {
    Rng rng(11);
    const auto a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
    const auto l = novel_view_loss(a, b, BinaryMask(16, 16, true));
    EXPECT_EQ(l.value, 0.0);
    EXPECT_TRUE((l.grad_image.data == 0).all());
}

TEST(NovelViewLoss, UnmaskedIdenticalIsZero) {
    Rng rng(12);
    const auto a = random_image(rng, 16, 16);
    EXPECT_NEAR(novel_view_loss(a, a, BinaryMask(16, 16, false)).value, 0.0, 1e-12);
}

TEST(NovelViewLoss, MaskedPatchMatchesCleanComplement) {
    Rng rng(13);
    const auto rendered = random_image(rng, 24, 24);
    auto clean = rendered;
    for (Eigen::Index i = 0; i < clean.data.size(); ++i) clean.data.data()[i] += 0.05 * (rng.uniform() - 0.5);
    BinaryMask mask(24, 24, false);
    auto aug = clean;
    for (int y = 5; y < 12; ++y)
        for (int x = 8; x < 17; ++x) {
            mask(x, y) = true;
            for (int c = 0; c < 3; ++c) aug(x, y, c) = rng.uniform();
        }
    const auto with_patch = novel_view_loss(rendered, aug, mask);
    const auto without = novel_view_loss(rendered, clean, mask);
    EXPECT_EQ(with_patch.value, without.value);

    // L1 term against a scalar loop over the unmasked complement.
    double sum = 0;
    int n = 0;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            if (mask(x, y)) continue;
            for (int c = 0; c < 3; ++c) sum += std::abs(rendered(x, y, c) - clean(x, y, c));
            n += 3;
        }
    EXPECT_NEAR(l1_loss(rendered, aug, mask).value, sum / n, 1e-15);
}

TEST(NovelViewLoss, GradientVanishesAtMaskedPixels) {
    Rng rng(14);
    const auto a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
    const auto mask = random_mask(rng, 16, 16, 0.4);
    const auto l = novel_view_loss(a, b, mask);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        if (mask.data(i)) EXPECT_TRUE((l.grad_image.pixel(i) == 0).all());
}

TEST(NovelViewLoss, L1IsBlindToMaskedPixels) {
    Rng rng(15);
    const auto a = random_image(rng, 16, 16);
    auto b = random_image(rng, 16, 16);
    const auto mask = random_mask(rng, 16, 16, 0.3);
    const auto before = l1_loss(a, b, mask);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        if (mask.data(i)) b.pixel(i).setConstant(rng.uniform());
    const auto after = l1_loss(a, b, mask);
    EXPECT_EQ(before.value, after.value);
    EXPECT_TRUE(before.grad_image == after.grad_image);
}

TEST(NovelViewLoss, GradientMatchesFiniteDifferences) {
    Rng rng(16);
    const auto b = random_image(rng, 16, 16);
    const auto mask = random_mask(rng, 16, 16, 0.2);
    EXPECT_LT(worst_fd_error(offset_image(rng, b),
                             [&](const ImageBuffer &a) { return novel_view_loss(a, b, mask); }),
              1e-3);
}

TEST(Psnr, ClosedFormValue) {
    const auto a = constant_image(8, 8, 0.2), b = constant_image(8, 8, 0.3);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-12);
}

TEST(Psnr, IdenticalImagesHitTheCap) {
    Rng rng(17);
    const auto a = random_image(rng, 8, 8);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
    EXPECT_EQ(psnr_capped(a, a), kPsnrCap);
    EXPECT_EQ(kPsnrCap, 99.0);
}

TEST(Psnr, MatchesScalarLoopAndIsSymmetric) {
    Rng rng(18);
    const auto a = random_image(rng, 13, 9), b = random_image(rng, 13, 9);
    double se = 0;
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 13; ++x)
            for (int c = 0; c < 3; ++c) se += (a(x, y, c) - b(x, y, c)) * (a(x, y, c) - b(x, y, c));
    const double expected = 10.0 * std::log10(1.0 / (se / (13 * 9 * 3)));
    EXPECT_NEAR(psnr(a, b), expected, 1e-9);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(ScoreMapMae, Cases) {
    ScoreMap gt(8, 8);
    Rng rng(19);
    for (Eigen::Index i = 0; i < gt.size(); ++i) gt.data(i) = rng.uniform();
    EXPECT_EQ(score_map_mae(gt, gt), 0.0);
    ScoreMap shifted = gt;
    shifted.data += 0.05;
    EXPECT_NEAR(score_map_mae(shifted, gt), 0.05, 1e-15);
    EXPECT_THROW(score_map_mae(ScoreMap(8, 8), ScoreMap(8, 7)), ContractViolation);
}

TEST(Losses, NonnegativeOnRandomPairs) {
    Rng rng(20);
    for (int t = 0; t < 5; ++t) {
        const auto a = random_image(rng, 16, 16), b = random_image(rng, 16, 16);
        const auto mask = random_mask(rng, 16, 16, 0.3);
        EXPECT_GE(l1_loss(a, b).value, 0.0);
        EXPECT_GE(d_ssim_loss(a, b).value, 0.0);
        EXPECT_GE(input_view_loss(a, b).value, 0.0);
        EXPECT_GE(novel_view_loss(a, b, mask).value, 0.0);
    }
}

} // namespace
} // namespace had
