// Copyright Contributors to the had-splat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "had/raster.hpp"

namespace had {

/// K augmented versions of one novel view with their score maps.
struct VersionStack {
    std::vector<ImageBuffer> images;
    std::vector<ScoreMap> scores;
    std::vector<int> ref_indices;

    int size() const { return int(images.size()); }
    void validate() const;
};

struct FusedView {
    ImageBuffer image;
    ScoreMap score;
};

enum class FusionMethod { argmin, weighted };

std::string to_string(FusionMethod method);
FusionMethod fusion_method_from_string(const std::string &s);

/// Per pixel, the version with the lowest score (lowest index on ties).
FusedView fuse_argmin(const VersionStack &stack);

/// Per pixel, softmax(-score / temperature) blend of the versions and their scores.
FusedView fuse_weighted(const VersionStack &stack, double temperature = 0.1);

} // namespace had
