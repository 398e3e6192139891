// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations used only by tests. Nothing here calls the code under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

namespace hico::oracle {

using Vec = std::vector<double>;

// Sum of squared distances of each point to its group mean.
inline double group_sse(const std::vector<Vec>& points, const std::vector<std::size_t>& group) {
    if (group.empty()) return 0.0;
    const std::size_t dim = points[group.front()].size();
    Vec mean(dim, 0.0);
    for (auto i : group) {
        for (std::size_t d = 0; d < dim; ++d) mean[d] += points[i][d];
    }
    for (double& m : mean) m /= static_cast<double>(group.size());
    double sse = 0.0;
    for (auto i : group) {
        for (std::size_t d = 0; d < dim; ++d) sse += (points[i][d] - mean[d]) * (points[i][d] - mean[d]);
    }
    return sse;
}

// Minimum total within-group SSE over every partition of the points into exactly
// `groups` non-empty blocks. Any sequence of pairwise merges ends in such a
// partition and every partition is reachable, so this is the best merge tree.
inline double best_partition_sse(const std::vector<Vec>& points, std::size_t groups) {
    const std::size_t n = points.size();
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    // Restricted growth strings enumerate set partitions without duplicates.
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
        if (used + (n - i) < groups) return;
        if (i == n) {
            if (used != groups) return;
            std::vector<std::vector<std::size_t>> blocks(groups);
            for (std::size_t k = 0; k < n; ++k) blocks[label[k]].push_back(k);
            double total = 0.0;
            for (const auto& b : blocks) total += group_sse(points, b);
            best = std::min(best, total);
            return;
        }
        for (std::size_t l = 0; l < used; ++l) {
            label[i] = l;
            rec(i + 1, used);
        }
        if (used < groups) {
            label[i] = used;
            rec(i + 1, used + 1);
        }
    };
    rec(0, 0);
    return best;
}

// Top-m indices by a full sort (score descending, index ascending), returned ascending.
inline std::vector<std::size_t> sorted_top(const std::vector<double>& scores, std::size_t m) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Two-way softmax weight of the first logit.
inline double softmax2(double a, double b) { return 1.0 / (1.0 + std::exp(b - a)); }

}  // namespace hico::oracle
