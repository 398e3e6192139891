// Copyright (C) 2026 The HiCo Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace hico {

// Flat `key = value` text: one pair per line, '#' starts a comment, keys may use
// dotted section names. Duplicate keys are a ConfigError.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace hico
