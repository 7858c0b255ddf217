// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#include "had/fusion.hpp"

#include <cmath>
#include <set>

namespace had {

void VersionStack::validate() const {
    if (images.empty()) throw ContractViolation("version stack is empty");
    if (scores.size() != images.size()) throw ContractViolation("version stack: image/score count mismatch");
    for (std::size_t k = 0; k < images.size(); ++k) {
        require_same_shape(images[k], images.front(), "version stack image");
        require_same_shape(scores[k], images.front(), "version stack score");
    }
    if (std::set<int>(ref_indices.begin(), ref_indices.end()).size() != ref_indices.size())
        throw ContractViolation("version stack: reference indices are not distinct");
}

FusedView fuse_argmin(const VersionStack &stack) {
    stack.validate();
    FusedView out{stack.images.front(), stack.scores.front()};
    for (int k = 1; k < stack.size(); ++k) {
        const auto &s = stack.scores[k];
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s.data(i) < out.score.data(i)) {
                out.score.data(i) = s.data(i);
                out.image.pixel(i) = stack.images[k].pixel(i);
            }
    }
    return out;
}

FusedView fuse_weighted(const VersionStack &stack, double temperature) {
    if (!(temperature > 0)) throw ConfigError("fuse_weighted: temperature must be positive");
    stack.validate();
    if (stack.size() == 1) return {stack.images.front(), stack.scores.front()};
    const auto &first = stack.images.front();
    FusedView out{ImageBuffer(first.width, first.height), ScoreMap(first.width, first.height)};
    const int k_count = stack.size();
    std::vector<double> w(k_count);
    for (Eigen::Index i = 0; i < first.size(); ++i) {
        double lowest = stack.scores[0].data(i);
        for (int k = 1; k < k_count; ++k) lowest = std::min(lowest, stack.scores[k].data(i));
        double total = 0;
        for (int k = 0; k < k_count; ++k) total += w[k] = std::exp(-(stack.scores[k].data(i) - lowest) / temperature);
        for (int k = 0; k < k_count; ++k) {
            const double wk = w[k] / total;
            out.image.pixel(i) += wk * stack.images[k].pixel(i);
            out.score.data(i) += wk * stack.scores[k].data(i);
        }
    }
    return out;
}

std::string to_string(FusionMethod method) {
    return method == FusionMethod::argmin ? "argmin" : "weighted";
}

FusionMethod fusion_method_from_string(const std::string &s) {
    if (s == "argmin") return FusionMethod::argmin;
    if (s == "weighted") return FusionMethod::weighted;
    throw ConfigError("unknown fusion method: " + s);
}

} // namespace had
