#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

namespace vpsim {

using Timestamp =
    std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

/// Injectable wall clock; tests substitute a manual clock.
using Clock = std::function<Timestamp()>;

Clock system_clock();

std::int64_t to_epoch_ms(Timestamp t) noexcept;
Timestamp from_epoch_ms(std::int64_t ms) noexcept;

/// UTC, millisecond precision: 2024-05-01T12:00:00.000Z
std::string to_iso8601(Timestamp t);

}  // namespace vpsim
