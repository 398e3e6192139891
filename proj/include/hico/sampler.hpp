// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hico {

// Frame-count bounds for duration-based sampling.
struct SamplingPolicy {
    std::size_t t_min = 64;
    std::size_t t_max = 512;

    void validate() const;
};

struct VideoMeta {
    double duration = 0.0;  // seconds
    double fps = 0.0;
    std::size_t total_frames = 0;

    // total_frames derived as round(duration * fps).
    static VideoMeta from_duration(double duration, double fps);
    void validate() const;
};

struct SamplePlan {
    std::size_t frame_count = 0;
    double density = 0.0;              // sampled frames per second
    std::vector<std::size_t> indices;  // source-frame indices, non-decreasing
    std::vector<double> timestamps;    // seconds
};

// Number of frames to sample: clamp(floor(duration), t_min, t_max).
std::size_t compute_frame_count(double duration, const SamplingPolicy& policy);

// Sampled frames per second of video.
double sampling_density(double duration, const SamplingPolicy& policy);

// Uniform stride plan; index j = floor(j * total_frames / frame_count). When the
// video has fewer frames than requested the formula repeats indices.
SamplePlan build_plan(const VideoMeta& meta, const SamplingPolicy& policy);

// "The video lasts for N seconds, and T frames are uniformly sampled from it."
// N is the duration rounded half-up. The text is fixed; "1 seconds" is intended.
std::string timestamp_prompt(double duration, std::size_t frame_count);

}  // namespace hico
