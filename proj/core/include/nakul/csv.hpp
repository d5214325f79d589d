// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Locale-independent number formatting and parsing for text outputs.

#pragma once

#include <string>
#include <string_view>

namespace nakul {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);
/// Parses the whole of `text` as a finite double; throws std::invalid_argument.
double parse_number(std::string_view text);

}  // namespace nakul
