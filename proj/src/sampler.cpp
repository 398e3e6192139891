// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "hico/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "hico/error.hpp"

namespace hico {

namespace {

void require_positive_duration(double duration) {
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw DomainError("duration must be a positive finite number of seconds");
    }
}

}  // namespace

void SamplingPolicy::validate() const {
    if (t_min < 1 || t_max < 1) throw DomainError("sampling policy bounds must be >= 1");
    if (t_min > t_max) throw DomainError("sampling policy requires t_min <= t_max");
}

VideoMeta VideoMeta::from_duration(double duration, double fps) {
    require_positive_duration(duration);
    if (!(fps > 0.0) || !std::isfinite(fps)) throw DomainError("fps must be positive");
    VideoMeta meta{duration, fps, 0};
    meta.total_frames = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration * fps)));
    return meta;
}

void VideoMeta::validate() const {
    require_positive_duration(duration);
    if (!(fps > 0.0) || !std::isfinite(fps)) throw DomainError("fps must be positive");
    if (total_frames < 1) throw DomainError("total_frames must be >= 1");
    if (std::fabs(static_cast<double>(total_frames) - duration * fps) > 1.0) {
        throw DomainError("total_frames disagrees with duration * fps by more than one frame");
    }
}

std::size_t compute_frame_count(double duration, const SamplingPolicy& policy) {
    require_positive_duration(duration);
    policy.validate();
    // Durations beyond t_max saturate anyway; clamp before the cast to stay in range.
    const double whole = std::floor(std::min(duration, static_cast<double>(policy.t_max)));
    const auto seconds = static_cast<std::size_t>(whole);
    return std::min(policy.t_max, std::max(seconds, policy.t_min));
}

double sampling_density(double duration, const SamplingPolicy& policy) {
    return static_cast<double>(compute_frame_count(duration, policy)) / duration;
}

SamplePlan build_plan(const VideoMeta& meta, const SamplingPolicy& policy) {
    meta.validate();
    SamplePlan plan;
    plan.frame_count = compute_frame_count(meta.duration, policy);
    plan.density = static_cast<double>(plan.frame_count) / meta.duration;
    plan.indices.reserve(plan.frame_count);
    plan.timestamps.reserve(plan.frame_count);
    for (std::size_t j = 0; j < plan.frame_count; ++j) {
        const std::size_t index = j * meta.total_frames / plan.frame_count;
        plan.indices.push_back(index);
        plan.timestamps.push_back(std::min(meta.duration, static_cast<double>(index) / meta.fps));
    }
    return plan;
}

std::string timestamp_prompt(double duration, std::size_t frame_count) {
    require_positive_duration(duration);
    if (frame_count < 1) throw DomainError("frame_count must be >= 1");
    const auto seconds = static_cast<long long>(std::floor(duration + 0.5));
    return "The video lasts for " + std::to_string(seconds) + " seconds, and " +
           std::to_string(frame_count) + " frames are uniformly sampled from it.";
}

}  // namespace hico
