// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/losses.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace had {

namespace {

using Plane = Eigen::ArrayXd;

const std::array<double, kSsimWindow> &gauss_taps() {
    static const auto taps = [] {
        std::array<double, kSsimWindow> t{};
        double sum = 0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - kSsimWindow / 2;
            t[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
            sum += t[i];
        }
        for (auto &v : t) v /= sum;
        return t;
    }();
    return taps;
}

/// Separable Gaussian blur, zero padding, same-size output. The kernel is
/// symmetric, so this is also its own adjoint.
Plane blur(const Plane &in, int w, int h) {
    const auto &taps = gauss_taps();
    constexpr int r = kSsimWindow / 2;
    Plane tmp = Plane::Zero(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < w) s += taps[k + r] * in[y * w + xx];
            }
            tmp[y * w + x] = s;
        }
    Plane out = Plane::Zero(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < h) s += taps[k + r] * tmp[yy * w + x];
            }
            out[y * w + x] = s;
        }
    return out;
}

void check_pair(const ImageBuffer &a, const ImageBuffer &b, const char *what) {
    require_same_shape(a, b, what);
}

/// SSIM for one channel. `weight` holds dLoss/dSSIM at every window center;
/// returns dLoss/da for the channel through `grad`.
Plane ssim_channel(const Plane &a, const Plane &b, int w, int h, const Plane *weight, Plane *grad) {
    const Plane mu_a = blur(a, w, h), mu_b = blur(b, w, h);
    const Plane e_aa = blur(a * a, w, h), e_bb = blur(b * b, w, h), e_ab = blur(a * b, w, h);
    const Plane a1 = 2 * mu_a * mu_b + kSsimC1;
    const Plane a2 = 2 * (e_ab - mu_a * mu_b) + kSsimC2;
    const Plane b1 = mu_a * mu_a + mu_b * mu_b + kSsimC1;
    const Plane b2 = (e_aa - mu_a * mu_a) + (e_bb - mu_b * mu_b) + kSsimC2;
    const Plane s = (a1 * a2) / (b1 * b2);
    if (weight && grad) {
        const Plane denom = b1 * b2;
        const Plane d_mu = (2 * mu_b * a2 - 2 * mu_b * a1) / denom - s * (2 * mu_a / b1 - 2 * mu_a / b2);
        const Plane d_eaa = -s / b2;
        const Plane d_eab = 2 * a1 / denom;
        *grad = blur(*weight * d_mu, w, h) + 2 * a * blur(*weight * d_eaa, w, h) + b * blur(*weight * d_eab, w, h);
    }
    return s;
}

/// D-SSIM over all channels. `centers` selects window centers entering the mean
/// (nullptr = all); `a`, `b` are already masked by the caller.
LossValue dssim_impl(const ImageBuffer &a, const ImageBuffer &b, const Eigen::Array<bool, Eigen::Dynamic, 1> *centers) {
    if (a.width < kSsimWindow || a.height < kSsimWindow)
        throw ContractViolation("d_ssim_loss: image smaller than the 11x11 SSIM window");
    const int w = a.width, h = a.height;
    const Eigen::Index n = a.size();
    Plane weight = Plane::Constant(n, 1.0);
    if (centers) weight = centers->cast<double>();
    const double count = weight.sum() * 3;
    LossValue out{0, ImageBuffer(w, h)};
    if (count == 0) return out;
    const Plane dl_ds = weight * (-0.5 / count);
    double ssim_sum = 0;
    for (int c = 0; c < 3; ++c) {
        Plane grad;
        const Plane s = ssim_channel(a.data.col(c), b.data.col(c), w, h, &dl_ds, &grad);
        ssim_sum += (s * weight).sum();
        out.grad_image.data.col(c) = grad;
    }
    out.value = 0.5 * (1.0 - ssim_sum / count);
    return out;
}

ImageBuffer apply_keep(const ImageBuffer &img, const BinaryMask &mask) {
    ImageBuffer out = img;
    for (Eigen::Index i = 0; i < img.size(); ++i)
        if (mask.data(i)) out.pixel(i).setZero();
    return out;
}

LossValue combine(const LossValue &l1, const LossValue &ds, LossWeights wts) {
    LossValue out;
    out.value = wts.l1 * l1.value + wts.dssim * ds.value;
    out.grad_image = l1.grad_image;
    out.grad_image.data = wts.l1 * l1.grad_image.data + wts.dssim * ds.grad_image.data;
    return out;
}

} // namespace

LossValue l1_loss(const ImageBuffer &a, const ImageBuffer &b) {
    return l1_loss(a, b, BinaryMask(a.width, a.height, false));
}

LossValue l1_loss(const ImageBuffer &a, const ImageBuffer &b, const BinaryMask &mask) {
    check_pair(a, b, "l1_loss");
    require_same_shape(a, mask, "l1_loss mask");
    LossValue out{0, ImageBuffer(a.width, a.height)};
    const Eigen::Index included = a.size() - mask.data.count();
    if (included == 0) return out;
    const double norm = 1.0 / (3.0 * double(included));
    double sum = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (mask.data(i)) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = a.data(i, c) - b.data(i, c);
            sum += std::abs(d);
            out.grad_image.data(i, c) = d > 0 ? norm : (d < 0 ? -norm : 0.0);
        }
    }
    out.value = sum * norm;
    return out;
}

LossValue d_ssim_loss(const ImageBuffer &a, const ImageBuffer &b) {
    check_pair(a, b, "d_ssim_loss");
    return dssim_impl(a, b, nullptr);
}

LossValue d_ssim_loss(const ImageBuffer &a, const ImageBuffer &b, const BinaryMask &mask, MaskedSsim mode) {
    check_pair(a, b, "d_ssim_loss");
    require_same_shape(a, mask, "d_ssim_loss mask");
    if (mask.data.count() == mask.size()) {
        if (a.width < kSsimWindow || a.height < kSsimWindow)
            throw ContractViolation("d_ssim_loss: image smaller than the 11x11 SSIM window");
        return {0, ImageBuffer(a.width, a.height)};
    }
    const ImageBuffer am = apply_keep(a, mask), bm = apply_keep(b, mask);
    LossValue out;
    if (mode == MaskedSsim::exclude_windows) {
        const Eigen::Array<bool, Eigen::Dynamic, 1> centers = !mask.data;
        out = dssim_impl(am, bm, &centers);
    } else {
        out = dssim_impl(am, bm, nullptr);
    }
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (mask.data(i)) out.grad_image.pixel(i).setZero();
    return out;
}

LossValue input_view_loss(const ImageBuffer &rendered, const ImageBuffer &gt, LossWeights weights) {
    return combine(l1_loss(rendered, gt), d_ssim_loss(rendered, gt), weights);
}

LossValue novel_view_loss(const ImageBuffer &rendered, const ImageBuffer &aug, const BinaryMask &mask,
                          LossWeights weights, MaskedSsim mode) {
    return combine(l1_loss(rendered, aug, mask), d_ssim_loss(rendered, aug, mask, mode), weights);
}

double ssim(const ImageBuffer &a, const ImageBuffer &b) {
    check_pair(a, b, "ssim");
    double sum = 0;
    for (int c = 0; c < 3; ++c) sum += ssim_channel(a.data.col(c), b.data.col(c), a.width, a.height, nullptr, nullptr).sum();
    return sum / (3.0 * double(a.size()));
}

double psnr(const ImageBuffer &a, const ImageBuffer &b) {
    check_pair(a, b, "psnr");
    const double mse = (a.data - b.data).square().mean();
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double psnr_capped(const ImageBuffer &a, const ImageBuffer &b) { return std::min(psnr(a, b), kPsnrCap); }

double score_map_mae(const ScoreMap &predicted, const ScoreMap &gt) {
    require_same_shape(predicted, gt, "score_map_mae");
    return (predicted.data - gt.data).abs().mean();
}

} // namespace had
