#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace vpsim {

/// Stress-time communication styles. "None of the above" is a questionnaire
/// answer and deliberately not a style.
enum class SatirStyle { appeaser, accuser, rationalizer, distractor, congruent };

inline constexpr std::array<SatirStyle, 5> kAllStyles{
    SatirStyle::appeaser, SatirStyle::accuser, SatirStyle::rationalizer,
    SatirStyle::distractor, SatirStyle::congruent};

std::string_view to_string(SatirStyle style) noexcept;
std::optional<SatirStyle> parse_style(std::string_view text) noexcept;

}  // namespace vpsim
