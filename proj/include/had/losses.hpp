// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "had/raster.hpp"

namespace had {

/// Scalar loss and its gradient with respect to the first (rendered) image.
struct LossValue {
    double value = 0;
    ImageBuffer grad_image;
};

/// How masked pixels enter D-SSIM.
enum class MaskedSsim {
    /// Both operands are zeroed at masked pixels before SSIM is evaluated.
    zero_operands,
    /// Operands are zeroed and, in addition, the SSIM map is averaged only over
    /// unmasked window centers.
    exclude_windows,
};

struct LossWeights {
    double l1 = 0.8;
    double dssim = 0.2;
};

/// Weights of the input-view objective: 0.8 L1 + 0.2 D-SSIM.
constexpr LossWeights input_loss_weights() { return {0.8, 0.2}; }
/// Weights of the novel-view objective as written (unweighted sum).
constexpr LossWeights novel_loss_weights() { return {1.0, 1.0}; }

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// PSNR written for identical images.
inline constexpr double kPsnrCap = 99.0;

LossValue l1_loss(const ImageBuffer &a, const ImageBuffer &b);
/// Mean |a - b| over channels of unmasked pixels; 0 when every pixel is masked.
LossValue l1_loss(const ImageBuffer &a, const ImageBuffer &b, const BinaryMask &mask);

LossValue d_ssim_loss(const ImageBuffer &a, const ImageBuffer &b);
LossValue d_ssim_loss(const ImageBuffer &a, const ImageBuffer &b, const BinaryMask &mask,
                      MaskedSsim mode = MaskedSsim::zero_operands);

LossValue input_view_loss(const ImageBuffer &rendered, const ImageBuffer &gt,
                          LossWeights weights = input_loss_weights());
LossValue novel_view_loss(const ImageBuffer &rendered, const ImageBuffer &aug, const BinaryMask &mask,
                          LossWeights weights = novel_loss_weights(),
                          MaskedSsim mode = MaskedSsim::zero_operands);

/// Mean SSIM over pixels and channels, 11x11 Gaussian window, zero padding.
double ssim(const ImageBuffer &a, const ImageBuffer &b);
/// 10 log10(1 / MSE) over all channels; +infinity for identical images.
double psnr(const ImageBuffer &a, const ImageBuffer &b);
/// psnr() limited to kPsnrCap, the value reported in metric tables.
double psnr_capped(const ImageBuffer &a, const ImageBuffer &b);
double score_map_mae(const ScoreMap &predicted, const ScoreMap &gt);

} // namespace had
