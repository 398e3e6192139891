// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/token_grid.hpp"

#include <algorithm>
#include <cmath>

#include "hico/error.hpp"

namespace hico {

TokenGrid::TokenGrid(std::size_t frames, std::size_t rows, std::size_t cols, std::size_t dim)
    : TokenGrid(frames, rows, cols, dim, std::vector<float>(frames * rows * cols * dim, 0.0f)) {}

TokenGrid::TokenGrid(std::size_t frames, std::size_t rows, std::size_t cols, std::size_t dim,
                     std::vector<float> data)
    : frames_(frames), rows_(rows), cols_(cols), dim_(dim), data_(std::move(data)) {
    if (data_.size() != frames * rows * cols * dim) {
        throw DomainError("TokenGrid: payload length does not match shape");
    }
}

std::span<float> TokenGrid::at(std::size_t frame, std::size_t row, std::size_t col) {
    return token((frame * rows_ + row) * cols_ + col);
}

std::span<const float> TokenGrid::at(std::size_t frame, std::size_t row, std::size_t col) const {
    return token((frame * rows_ + row) * cols_ + col);
}

std::span<const float> TokenGrid::token(std::size_t index) const {
    return {data_.data() + index * dim_, dim_};
}

std::span<float> TokenGrid::token(std::size_t index) {
    return {data_.data() + index * dim_, dim_};
}

TokenGrid TokenGrid::slice_frames(std::size_t begin, std::size_t end) const {
    if (begin > end || end > frames_) {
        throw DomainError("TokenGrid::slice_frames: range out of bounds");
    }
    const std::size_t stride = rows_ * cols_ * dim_;
    std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                           data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
    return TokenGrid(end - begin, rows_, cols_, dim_, std::move(out));
}

bool TokenGrid::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace hico
