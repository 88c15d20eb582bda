#pragma once

#include <algorithm>
#include <array>
#include <string_view>

namespace vizprompt::vega_lite {

/// Marks the response validator accepts.
inline constexpr std::array<std::string_view, 8> kMarks = {
    "bar", "line", "point", "tick", "arc", "area", "boxplot", "circle"};

/// Encoding channels the response validator accepts.
inline constexpr std::array<std::string_view, 7> kChannels = {
    "x", "y", "color", "size", "row", "column", "theta"};

inline constexpr std::string_view kSchemaUrl = "https://vega.github.io/schema/vega-lite/v5.json";

inline bool is_mark(std::string_view mark) {
  return std::find(kMarks.begin(), kMarks.end(), mark) != kMarks.end();
}

inline bool is_channel(std::string_view channel) {
  return std::find(kChannels.begin(), kChannels.end(), channel) != kChannels.end();
}

}  // namespace vizprompt::vega_lite
