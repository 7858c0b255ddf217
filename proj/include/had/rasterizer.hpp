// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "had/camera.hpp"
#include "had/gaussian.hpp"
#include "had/parallel.hpp"
#include "had/raster.hpp"

namespace had {

/// Splats whose camera-frame depth is at or below this are culled.
inline constexpr double kNearPlane = 0.01;
/// Screen-space dilation added to the projected covariance diagonal (px^2).
inline constexpr double kCovDilation = 0.3;
inline constexpr double kAlphaMax = 0.999;
/// A splat contributes to a pixel only while 0.5 * d^T cov2d^-1 d <= this,
/// i.e. inside its 7-sigma ellipse. The cut changes alpha by at most
/// exp(-24.5) ~ 2e-11, which keeps finite differences of the renderer smooth.
inline constexpr double kCutoffPower = 24.5;
inline constexpr int kTileSize = 16;
/// Composition stops once transmittance falls below this; the skipped tail
/// changes a pixel by less than 1e-13.
inline constexpr double kMinTransmittance = 1e-13;

/// Per-view projection of one Gaussian.
template <typename Scalar>
struct Splat2D {
    using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

    Vec2 mean2d;
    Mat2 cov2d;
    Scalar depth;
    Vec3 color;

    Mat2 conic;     // cov2d^-1
    Scalar opacity; // sigmoid(opacity_logit)
    int x0, x1, y0, y1; // inclusive pixel bounds of the cutoff ellipse, clipped to the image
    int index = -1;     // primitive index in the source set
};

template <typename Scalar>
struct RenderOutput {
    Raster<Scalar, 3> image;
    Raster<Scalar, 1> depth;
    Raster<Scalar, 1> alpha;
};

/// Gradient block for one primitive. `rotation` is ordered (w, x, y, z) and
/// lies in the tangent space of the unit quaternion sphere.
template <typename Scalar>
struct GaussianGradient {
    Eigen::Matrix<Scalar, 3, 1> mean = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Eigen::Matrix<Scalar, 3, 1> log_scale = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Eigen::Matrix<Scalar, 4, 1> rotation = Eigen::Matrix<Scalar, 4, 1>::Zero();
    Scalar opacity_logit = 0;
    Eigen::Matrix<Scalar, 4, 3> sh = Eigen::Matrix<Scalar, 4, 3>::Zero();

    bool is_zero() const {
        return mean.isZero(0) && log_scale.isZero(0) && rotation.isZero(0) && opacity_logit == 0 && sh.isZero(0);
    }
};

template <typename Scalar>
struct ParamGradients {
    std::vector<GaussianGradient<Scalar>> primitives;
};

namespace detail {

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 3> projection_jacobian(const Camera<Scalar> &cam, const Eigen::Matrix<Scalar, 3, 1> &t) {
    const Scalar z = t.z(), z2 = z * z;
    Eigen::Matrix<Scalar, 2, 3> j;
    j << cam.fx / z, 0, -cam.fx * t.x() / z2,
         0, cam.fy / z, -cam.fy * t.y() / z2;
    return j;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> view_direction(const GaussianPrimitive<Scalar> &g, const Camera<Scalar> &cam) {
    return (g.mean - cam.center()).normalized();
}

} // namespace detail

/// Projects `g` into `cam`. Returns nullopt when the Gaussian is at or behind
/// the near plane or its cutoff ellipse misses the image.
template <typename Scalar>
std::optional<Splat2D<Scalar>> project_gaussian(const GaussianPrimitive<Scalar> &g, const Camera<Scalar> &cam,
                                                int sh_degree = 0) {
    using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
    const Eigen::Matrix<Scalar, 3, 1> t = cam.to_camera(g.mean);
    if (!(t.z() > Scalar(kNearPlane))) return std::nullopt;

    const Eigen::Matrix<Scalar, 2, 3> jw = detail::projection_jacobian(cam, t) * cam.rotation_w2c;
    Splat2D<Scalar> s;
    s.cov2d = jw * g.covariance() * jw.transpose();
    s.cov2d(0, 0) += Scalar(kCovDilation);
    s.cov2d(1, 1) += Scalar(kCovDilation);
    s.cov2d(0, 1) = s.cov2d(1, 0) = Scalar(0.5) * (s.cov2d(0, 1) + s.cov2d(1, 0));
    s.mean2d = cam.project_camera(t);
    s.depth = t.z();

    const Scalar rx = std::sqrt(Scalar(2 * kCutoffPower) * s.cov2d(0, 0));
    const Scalar ry = std::sqrt(Scalar(2 * kCutoffPower) * s.cov2d(1, 1));
    // pixel x covers center x + 0.5
    const Scalar fx0 = std::ceil(s.mean2d.x() - rx - Scalar(0.5));
    const Scalar fx1 = std::floor(s.mean2d.x() + rx - Scalar(0.5));
    const Scalar fy0 = std::ceil(s.mean2d.y() - ry - Scalar(0.5));
    const Scalar fy1 = std::floor(s.mean2d.y() + ry - Scalar(0.5));
    if (!(fx1 >= 0 && fy1 >= 0 && fx0 <= cam.width - 1 && fy0 <= cam.height - 1)) return std::nullopt;
    s.x0 = int(std::max<Scalar>(fx0, 0));
    s.x1 = int(std::min<Scalar>(fx1, cam.width - 1));
    s.y0 = int(std::max<Scalar>(fy0, 0));
    s.y1 = int(std::min<Scalar>(fy1, cam.height - 1));
    if (s.x0 > s.x1 || s.y0 > s.y1) return std::nullopt;

    const Scalar det = s.cov2d.determinant();
    Mat2 conic;
    conic << s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, -s.cov2d(1, 0) / det, s.cov2d(0, 0) / det;
    s.conic = conic;
    s.opacity = g.opacity();
    s.color = g.color(detail::view_direction(g, cam), sh_degree);
    return s;
}

namespace detail {

/// Visible splats in global front-to-back order, binned into screen tiles.
template <typename Scalar>
struct Frame {
    std::vector<Splat2D<Scalar>> splats;
    std::vector<std::vector<int>> tiles;
    int tiles_x = 0;
    int tiles_y = 0;
};

template <typename Scalar>
Frame<Scalar> build_frame(const GaussianSet<Scalar> &set, const Camera<Scalar> &cam) {
    Frame<Scalar> f;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (auto s = project_gaussian(set.primitives[i], cam, set.sh_degree)) {
            s->index = int(i);
            f.splats.push_back(*s);
        }
    }
    std::sort(f.splats.begin(), f.splats.end(), [](const auto &a, const auto &b) {
        return a.depth != b.depth ? a.depth < b.depth : a.index < b.index;
    });
    f.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    f.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    f.tiles.assign(std::size_t(f.tiles_x) * f.tiles_y, {});
    for (int k = 0; k < int(f.splats.size()); ++k) {
        const auto &s = f.splats[k];
        for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty)
            for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx)
                f.tiles[std::size_t(ty) * f.tiles_x + tx].push_back(k);
    }
    return f;
}

template <typename Scalar>
struct PixelResult {
    Eigen::Matrix<Scalar, 3, 1> color;
    Scalar depth;
    Scalar alpha;
};

/// Front-to-back alpha composition at one pixel. `visit(k, gauss)` is called
/// for every contributing splat in blend order.
template <typename Scalar, typename Visit>
PixelResult<Scalar> composite_pixel(const Frame<Scalar> &f, int px, int py,
                                    const Eigen::Matrix<Scalar, 3, 1> &background, Visit &&visit) {
    const Eigen::Matrix<Scalar, 2, 1> p(Scalar(px) + Scalar(0.5), Scalar(py) + Scalar(0.5));
    Eigen::Matrix<Scalar, 3, 1> color = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Scalar depth = 0, transmittance = 1;
    Scalar r = 0, g = 0, b = 0;
    for (int k : f.tiles[std::size_t(py / kTileSize) * f.tiles_x + px / kTileSize]) {
        const auto &s = f.splats[k];
        if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1) continue;
        const Scalar dx = p.x() - s.mean2d.x(), dy = p.y() - s.mean2d.y();
        const Scalar power =
            Scalar(0.5) * (s.conic(0, 0) * dx * dx + s.conic(1, 1) * dy * dy) + s.conic(0, 1) * dx * dy;
        if (power > Scalar(kCutoffPower)) continue;
        const Scalar gauss = std::exp(-power);
        const Scalar raw = s.opacity * gauss;
        const Scalar alpha = raw > Scalar(kAlphaMax) ? Scalar(kAlphaMax) : raw;
        const Scalar w = alpha * transmittance;
        r += w * s.color.x();
        g += w * s.color.y();
        b += w * s.color.z();
        depth += w * s.depth;
        visit(k, gauss);
        transmittance *= Scalar(1) - alpha;
        if (transmittance < Scalar(kMinTransmittance)) break;
    }
    color << r, g, b;
    const Scalar acc = Scalar(1) - transmittance;
    return {color + transmittance * background, acc > Scalar(1e-6) ? depth / acc : Scalar(0), acc};
}

/// Per-splat screen-space gradient accumulator.
template <typename Scalar>
struct SplatGrad {
    Eigen::Matrix<Scalar, 2, 1> mean2d = Eigen::Matrix<Scalar, 2, 1>::Zero();
    Eigen::Matrix<Scalar, 2, 2> conic = Eigen::Matrix<Scalar, 2, 2>::Zero();
    Scalar opacity = 0;
    Eigen::Matrix<Scalar, 3, 1> color = Eigen::Matrix<Scalar, 3, 1>::Zero();
};

/// Chain rule from screen-space splat gradients to the primitive parameters.
template <typename Scalar>
GaussianGradient<Scalar> backprop_splat(const GaussianPrimitive<Scalar> &g, const Camera<Scalar> &cam,
                                        int sh_degree, const Splat2D<Scalar> &s, const SplatGrad<Scalar> &sg) {
    using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
    using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
    using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
    GaussianGradient<Scalar> out;

    // conic = cov2d^-1
    const Mat2 d_cov2d = -s.conic * sg.conic * s.conic;

    const Vec3 t = cam.to_camera(g.mean);
    const Mat3 &w = cam.rotation_w2c;
    const Eigen::Matrix<Scalar, 2, 3> j = projection_jacobian(cam, t);
    const Eigen::Matrix<Scalar, 2, 3> jw = j * w;
    const Mat3 rot = rotation_from_quaternion(g.rotation);
    const Vec3 scale = g.scale();
    const Mat3 m = rot * scale.asDiagonal();
    const Mat3 sigma = m * m.transpose();

    const Mat3 d_sigma = jw.transpose() * d_cov2d * jw;
    const Eigen::Matrix<Scalar, 2, 3> d_jw = Scalar(2) * d_cov2d * jw * sigma;
    const Eigen::Matrix<Scalar, 2, 3> d_j = d_jw * w.transpose();

    const Scalar x = t.x(), y = t.y(), z = t.z();
    const Scalar z2 = z * z, z3 = z2 * z;
    Vec3 d_t;
    d_t.x() = sg.mean2d.x() * cam.fx / z - d_j(0, 2) * cam.fx / z2;
    d_t.y() = sg.mean2d.y() * cam.fy / z - d_j(1, 2) * cam.fy / z2;
    d_t.z() = -sg.mean2d.x() * cam.fx * x / z2 - sg.mean2d.y() * cam.fy * y / z2 - d_j(0, 0) * cam.fx / z2 -
              d_j(1, 1) * cam.fy / z2 + d_j(0, 2) * Scalar(2) * cam.fx * x / z3 +
              d_j(1, 2) * Scalar(2) * cam.fy * y / z3;
    out.mean = w.transpose() * d_t;

    // color
    out.sh.row(0) = sg.color.transpose();
    if (sh_degree >= 1) {
        const Vec3 v = g.mean - cam.center();
        const Scalar norm = v.norm();
        const Vec3 dir = v / norm;
        const Scalar c1 = Scalar(kShC1);
        out.sh.row(1) = (-c1 * dir.y()) * sg.color.transpose();
        out.sh.row(2) = (c1 * dir.z()) * sg.color.transpose();
        out.sh.row(3) = (-c1 * dir.x()) * sg.color.transpose();
        Vec3 d_dir;
        d_dir.x() = -c1 * g.sh.row(3).dot(sg.color.transpose());
        d_dir.y() = -c1 * g.sh.row(1).dot(sg.color.transpose());
        d_dir.z() = c1 * g.sh.row(2).dot(sg.color.transpose());
        out.mean += (d_dir - dir * dir.dot(d_dir)) / norm;
    }

    const Scalar op = s.opacity;
    out.opacity_logit = sg.opacity * op * (Scalar(1) - op);

    // sigma = M M^T, M = R S
    const Mat3 d_m = Scalar(2) * d_sigma * m;
    const Mat3 d_r = d_m * scale.asDiagonal();
    for (int k = 0; k < 3; ++k) out.log_scale(k) = d_m.col(k).dot(rot.col(k)) * scale(k);

    const Eigen::Quaternion<Scalar> q = g.rotation.normalized();
    const Scalar qw = q.w(), qx = q.x(), qy = q.y(), qz = q.z();
    const Mat3 &G = d_r;
    Eigen::Matrix<Scalar, 4, 1> d_q;
    d_q(0) = 2 * (-qz * G(0, 1) + qy * G(0, 2) + qz * G(1, 0) - qx * G(1, 2) - qy * G(2, 0) + qx * G(2, 1));
    d_q(1) = 2 * (qy * G(0, 1) + qz * G(0, 2) + qy * G(1, 0) - 2 * qx * G(1, 1) - qw * G(1, 2) + qz * G(2, 0) +
                  qw * G(2, 1) - 2 * qx * G(2, 2));
    d_q(2) = 2 * (-2 * qy * G(0, 0) + qx * G(0, 1) + qw * G(0, 2) + qx * G(1, 0) + qz * G(1, 2) - qw * G(2, 0) +
                  qz * G(2, 1) - 2 * qy * G(2, 2));
    d_q(3) = 2 * (-2 * qz * G(0, 0) - qw * G(0, 1) + qx * G(0, 2) + qw * G(1, 0) - 2 * qz * G(1, 1) +
                  qy * G(1, 2) + qx * G(2, 0) + qy * G(2, 1));
    // q enters through q / |q|: project onto the tangent space and rescale.
    const Eigen::Matrix<Scalar, 4, 1> qhat(qw, qx, qy, qz);
    out.rotation = (d_q - qhat * qhat.dot(d_q)) / g.rotation.norm();
    return out;
}

template <typename Scalar>
struct CacheEntry {
    int splat;
    Scalar gauss;
};

/// Process-wide free list of blend-list buffers, so repeated passes reuse
/// their capacity instead of reallocating.
template <typename Scalar>
class CachePool {
public:
    static CachePool &instance() {
        static CachePool pool;
        return pool;
    }
    std::vector<CacheEntry<Scalar>> acquire() {
        std::lock_guard lock(mutex_);
        if (free_.empty()) return {};
        auto buf = std::move(free_.back());
        free_.pop_back();
        buf.clear();
        return buf;
    }
    void release(std::vector<CacheEntry<Scalar>> &&buf) {
        if (buf.capacity() == 0) return;
        std::lock_guard lock(mutex_);
        if (free_.size() < kMaxBuffers) free_.push_back(std::move(buf));
    }

private:
    static constexpr std::size_t kMaxBuffers = 256;
    std::mutex mutex_;
    std::vector<std::vector<CacheEntry<Scalar>>> free_;
};

} // namespace detail

/// One forward render that can be differentiated afterwards. Keeps a
/// reference to the set, which must outlive the pass.
template <typename Scalar>
class RenderPass {
public:
    /// With `differentiable` set, the per-pixel blend lists are kept for backward().
    RenderPass(const GaussianSet<Scalar> &set, const Camera<Scalar> &cam, bool differentiable = true)
        : set_(&set), cam_(cam), frame_(detail::build_frame(set, cam)),
          out_{Raster<Scalar, 3>(cam.width, cam.height), Raster<Scalar, 1>(cam.width, cam.height),
               Raster<Scalar, 1>(cam.width, cam.height)},
          differentiable_(differentiable) {
        if (differentiable_) {
            blocks_.reserve(std::size_t(frame_.tiles_y));
            for (int b = 0; b < frame_.tiles_y; ++b) blocks_.push_back(detail::CachePool<Scalar>::instance().acquire());
            begin_.assign(std::size_t(cam.width) * cam.height + 1, 0);
        }
        parallel_for(frame_.tiles_y, [&](int block) {
            const int y_end = std::min(cam_.height, (block + 1) * kTileSize);
            auto *cache = differentiable_ ? &blocks_[block] : nullptr;
            for (int y = block * kTileSize; y < y_end; ++y)
                for (int x = 0; x < cam_.width; ++x) {
                    const auto i = out_.image.index(x, y);
                    if (cache) begin_[std::size_t(i)] = std::uint32_t(cache->size());
                    const auto r = detail::composite_pixel<Scalar>(frame_, x, y, set_->background_color,
                                                                   [&](int k, Scalar gauss) {
                                                                       if (cache) cache->push_back({k, gauss});
                                                                   });
                    out_.image.pixel(i) = r.color.transpose();
                    out_.depth.data(i) = r.depth;
                    out_.alpha.data(i) = r.alpha;
                }
        });
    }

    RenderPass(const RenderPass &) = delete;
    RenderPass &operator=(const RenderPass &) = delete;
    ~RenderPass() {
        for (auto &b : blocks_) detail::CachePool<Scalar>::instance().release(std::move(b));
    }

    const RenderOutput<Scalar> &output() const { return out_; }
    RenderOutput<Scalar> take_output() { return std::move(out_); }

    /// dL/d(parameters) given dL/d(image).
    ParamGradients<Scalar> backward(const Raster<Scalar, 3> &loss_grad) const {
        using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
        if (loss_grad.width != cam_.width || loss_grad.height != cam_.height)
            throw ContractViolation("render_with_grad: loss gradient does not match the camera resolution");
        if (!differentiable_) throw ContractViolation("RenderPass::backward: pass was built without gradients");
        const int n_splats = int(frame_.splats.size());
        // One partial buffer per tile row, merged in row order below.
        std::vector<std::vector<detail::SplatGrad<Scalar>>> partial(frame_.tiles_y);
        parallel_for(frame_.tiles_y, [&](int block) {
            auto &acc = partial[block];
            acc.assign(n_splats, {});
            std::vector<Scalar> trans;
            const int y_end = std::min(cam_.height, (block + 1) * kTileSize);
            for (int y = block * kTileSize; y < y_end; ++y)
                for (int x = 0; x < cam_.width; ++x) {
                    const auto i = loss_grad.index(x, y);
                    const Vec3 g = loss_grad.pixel(i).transpose();
                    if (g.isZero(0)) continue;
                    const auto &cache = blocks_[block];
                    const std::size_t first = begin_[std::size_t(i)];
                    const std::size_t last = (x + 1 < cam_.width || y + 1 < y_end)
                                                 ? begin_[std::size_t(i) + 1]
                                                 : cache.size();
                    if (first == last) continue;
                    // transmittance in front of each entry, rebuilt from the forward cache
                    trans.resize(last - first);
                    Scalar t = 1;
                    for (std::size_t c = first; c < last; ++c) {
                        trans[c - first] = t;
                        const Scalar raw = frame_.splats[cache[c].splat].opacity * cache[c].gauss;
                        t *= Scalar(1) - std::min(raw, Scalar(kAlphaMax));
                    }
                    const Scalar px = Scalar(x) + Scalar(0.5), py = Scalar(y) + Scalar(0.5);
                    const Vec3 &bg = set_->background_color;
                    Scalar br = bg.x(), bgc = bg.y(), bb = bg.z(); // color composited behind the current entry
                    for (std::size_t c = last; c-- > first;) {
                        const auto &s = frame_.splats[cache[c].splat];
                        auto &sg = acc[cache[c].splat];
                        const Scalar gauss = cache[c].gauss, tr = trans[c - first];
                        const Scalar raw = s.opacity * gauss;
                        const bool clamped = raw > Scalar(kAlphaMax);
                        const Scalar alpha = clamped ? Scalar(kAlphaMax) : raw;
                        const Scalar w = alpha * tr;
                        sg.color.x() += w * g.x();
                        sg.color.y() += w * g.y();
                        sg.color.z() += w * g.z();
                        const Scalar sr = s.color.x(), sgc = s.color.y(), sb = s.color.z();
                        const Scalar d_alpha = tr * (g.x() * (sr - br) + g.y() * (sgc - bgc) + g.z() * (sb - bb));
                        br = alpha * sr + (Scalar(1) - alpha) * br;
                        bgc = alpha * sgc + (Scalar(1) - alpha) * bgc;
                        bb = alpha * sb + (Scalar(1) - alpha) * bb;
                        if (clamped) continue;
                        sg.opacity += d_alpha * gauss;
                        const Scalar d_power = -d_alpha * alpha;
                        const Scalar dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
                        const Scalar c00 = s.conic(0, 0), c01 = s.conic(0, 1), c11 = s.conic(1, 1);
                        sg.mean2d.x() -= d_power * (c00 * dx + c01 * dy);
                        sg.mean2d.y() -= d_power * (c01 * dx + c11 * dy);
                        const Scalar h = Scalar(0.5) * d_power;
                        sg.conic(0, 0) += h * dx * dx;
                        sg.conic(1, 1) += h * dy * dy;
                        sg.conic(0, 1) += h * dx * dy;
                        sg.conic(1, 0) += h * dx * dy;
                    }
                }
        });

        ParamGradients<Scalar> grads;
        grads.primitives.assign(set_->size(), {});
        for (int k = 0; k < n_splats; ++k) {
            detail::SplatGrad<Scalar> total;
            for (const auto &acc : partial) {
                total.mean2d += acc[k].mean2d;
                total.conic += acc[k].conic;
                total.opacity += acc[k].opacity;
                total.color += acc[k].color;
            }
            const auto &s = frame_.splats[k];
            grads.primitives[s.index] =
                detail::backprop_splat(set_->primitives[s.index], cam_, set_->sh_degree, s, total);
        }
        return grads;
    }

private:
    const GaussianSet<Scalar> *set_;
    Camera<Scalar> cam_;
    detail::Frame<Scalar> frame_;
    RenderOutput<Scalar> out_;
    bool differentiable_;
    std::vector<std::vector<detail::CacheEntry<Scalar>>> blocks_; // one blend-list buffer per tile row
    std::vector<std::uint32_t> begin_;            // per pixel offset into its block buffer
};

/// Renders `set` from `cam`: global depth sort, then per-pixel alpha
/// composition over every splat whose cutoff ellipse covers the pixel.
template <typename Scalar>
RenderOutput<Scalar> render(const GaussianSet<Scalar> &set, const Camera<Scalar> &cam) {
    return RenderPass<Scalar>(set, cam, false).take_output();
}

/// Forward render plus dL/d(parameters) for a given dL/d(image).
template <typename Scalar>
std::pair<RenderOutput<Scalar>, ParamGradients<Scalar>> render_with_grad(const GaussianSet<Scalar> &set,
                                                                         const Camera<Scalar> &cam,
                                                                         const Raster<Scalar, 3> &loss_grad) {
    if (loss_grad.width != cam.width || loss_grad.height != cam.height)
        throw ContractViolation("render_with_grad: loss gradient does not match the camera resolution");
    RenderPass<Scalar> pass(set, cam);
    auto grads = pass.backward(loss_grad);
    return {pass.take_output(), std::move(grads)};
}

} // namespace had
