// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hico {

// Dense frames x rows x cols grid of dim-length feature vectors,
// frame-major then row-major, matching the on-disk embedding layout.
class TokenGrid {
public:
    TokenGrid() = default;
    TokenGrid(std::size_t frames, std::size_t rows, std::size_t cols, std::size_t dim);
    TokenGrid(std::size_t frames, std::size_t rows, std::size_t cols, std::size_t dim,
              std::vector<float> data);

    std::size_t frames() const { return frames_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t dim() const { return dim_; }
    std::size_t tokens_per_frame() const { return rows_ * cols_; }
    std::size_t token_count() const { return frames_ * rows_ * cols_; }
    bool empty() const { return token_count() == 0; }

    std::span<float> at(std::size_t frame, std::size_t row, std::size_t col);
    std::span<const float> at(std::size_t frame, std::size_t row, std::size_t col) const;
    // Flat token index in frame-major order.
    std::span<const float> token(std::size_t index) const;
    std::span<float> token(std::size_t index);

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    // Copy of frames [begin, end).
    TokenGrid slice_frames(std::size_t begin, std::size_t end) const;

    bool all_finite() const;

    friend bool operator==(const TokenGrid&, const TokenGrid&) = default;

private:
    std::size_t frames_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t dim_ = 0;
    std::vector<float> data_;
};

// Position of an original token in the sampled frame sequence.
struct Source {
    std::uint32_t frame = 0;
    std::uint32_t row = 0;
    std::uint32_t col = 0;

    friend auto operator<=>(const Source&, const Source&) = default;
};

// A token that may stand for several absorbed originals. For provenance-bearing
// tokens size == sources.size() and vector is the size-weighted mean of the sources.
// Sources are kept sorted.
struct MergedToken {
    std::vector<double> vector;
    std::uint32_t size = 1;
    std::vector<Source> sources;

    const Source& min_source() const { return sources.front(); }
};

}  // namespace hico
