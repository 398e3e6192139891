// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <string>

#include "doctest.h"
#include "hico/error.hpp"
#include "hico/sampler.hpp"

using namespace hico;

TEST_SUITE("sampler") {

TEST_CASE("frame count clamps to the policy bounds") {
    const SamplingPolicy policy{64, 512};
    CHECK(compute_frame_count(30, policy) == 64);
    CHECK(compute_frame_count(128, policy) == 128);
    CHECK(compute_frame_count(4000, policy) == 512);
    // Fractional seconds are truncated before clamping.
    CHECK(compute_frame_count(100.9, policy) == 100);
    CHECK(compute_frame_count(1e300, policy) == 512);
}

TEST_CASE("sampling density") {
    const SamplingPolicy policy{64, 512};
    CHECK(sampling_density(32, policy) == doctest::Approx(2.0));
    CHECK(sampling_density(512, policy) == doctest::Approx(1.0));
    CHECK(sampling_density(5120, policy) == doctest::Approx(0.1));
}

TEST_CASE("density decreases outside the interior band") {
    const SamplingPolicy policy{64, 512};
    for (double d = 1; d < 64; d += 1) {
        CHECK(sampling_density(d + 1, policy) < sampling_density(d, policy));
    }
    for (double d = 513; d < 2000; d += 7) {
        CHECK(sampling_density(d + 1, policy) < sampling_density(d, policy));
    }
}

TEST_CASE("non-positive duration is a domain error") {
    const SamplingPolicy policy{64, 512};
    CHECK_THROWS_AS(compute_frame_count(0.0, policy), DomainError);
    CHECK_THROWS_AS(compute_frame_count(-3.0, policy), DomainError);
    CHECK_THROWS_AS(sampling_density(0.0, policy), DomainError);
    CHECK_THROWS_AS(compute_frame_count(10.0, SamplingPolicy{100, 50}), DomainError);
    CHECK_THROWS_AS(compute_frame_count(10.0, SamplingPolicy{0, 50}), DomainError);
}

TEST_CASE("build_plan stride formula") {
    SUBCASE("8 frames, 4 samples") {
        const auto plan = build_plan(VideoMeta{8, 1, 8}, SamplingPolicy{4, 4});
        CHECK(plan.indices == std::vector<std::size_t>{0, 2, 4, 6});
    }
    SUBCASE("identity") {
        const auto plan = build_plan(VideoMeta{5, 1, 5}, SamplingPolicy{5, 5});
        CHECK(plan.indices == std::vector<std::size_t>{0, 1, 2, 3, 4});
    }
    SUBCASE("fewer frames than samples repeats indices") {
        // floor(j * 3 / 4) for j = 0..3
        const auto plan = build_plan(VideoMeta{3, 1, 3}, SamplingPolicy{4, 4});
        CHECK(plan.indices == std::vector<std::size_t>{0, 0, 1, 2});
    }
    SUBCASE("timestamps stay inside the video") {
        const auto meta = VideoMeta::from_duration(60.0, 30.0);
        const auto plan = build_plan(meta, SamplingPolicy{64, 512});
        REQUIRE(plan.indices.size() == 64);
        for (std::size_t i = 0; i < plan.indices.size(); ++i) {
            CHECK(plan.indices[i] < meta.total_frames);
            if (i) CHECK(plan.indices[i] > plan.indices[i - 1]);
            CHECK(plan.timestamps[i] >= 0.0);
            CHECK(plan.timestamps[i] <= 60.0);
        }
    }
}

TEST_CASE("inconsistent video metadata is rejected") {
    CHECK_THROWS_AS(build_plan(VideoMeta{10, 30, 100}, SamplingPolicy{}), DomainError);
    CHECK_THROWS_AS(VideoMeta::from_duration(10, 0), DomainError);
}

TEST_CASE("timestamp prompt is byte exact") {
    CHECK(timestamp_prompt(60.0, 64) ==
          "The video lasts for 60 seconds, and 64 frames are uniformly sampled from it.");
    CHECK(timestamp_prompt(1.0, 64) ==
          "The video lasts for 1 seconds, and 64 frames are uniformly sampled from it.");
    CHECK(timestamp_prompt(3600.4, 512) ==
          "The video lasts for 3600 seconds, and 512 frames are uniformly sampled from it.");
    CHECK(timestamp_prompt(2.5, 64).find("lasts for 3 seconds") != std::string::npos);
    CHECK_THROWS_AS(timestamp_prompt(10.0, 0), DomainError);
}

TEST_CASE("timestamp prompt round-trips its integers") {
    for (double d : {0.4, 1.0, 59.5, 61.2, 3600.4, 12345.0}) {
        for (std::size_t t : {1u, 64u, 512u}) {
            const auto text = timestamp_prompt(d, t);
            long long n = -1;
            unsigned long long frames = 0;
            REQUIRE(std::sscanf(text.c_str(), "The video lasts for %lld seconds, and %llu frames", &n, &frames) == 2);
            CHECK(n == static_cast<long long>(d + 0.5));
            CHECK(frames == t);
        }
    }
}

}  // TEST_SUITE
