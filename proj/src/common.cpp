#include <cmath>
#include <ctime>
#include <numeric>

#include "vpsim/errors.hpp"
#include "vpsim/satir_style.hpp"
#include "vpsim/stats.hpp"
#include "vpsim/timestamp.hpp"

namespace vpsim {

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = "validation failed";
  for (const auto& v : violations) {
    out += "; ";
    out += v;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

ValidationError::ValidationError(const std::string& what,
                                 std::vector<std::string> violations)
    : Error(what), violations_(std::move(violations)) {}

std::string_view to_string(SatirStyle style) noexcept {
  switch (style) {
    case SatirStyle::appeaser: return "appeaser";
    case SatirStyle::accuser: return "accuser";
    case SatirStyle::rationalizer: return "rationalizer";
    case SatirStyle::distractor: return "distractor";
    case SatirStyle::congruent: return "congruent";
  }
  return "unknown";
}

std::optional<SatirStyle> parse_style(std::string_view text) noexcept {
  for (auto s : kAllStyles) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw Error("mean_std: no data");
  const auto n = values.size();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return {mean, sd, n};
}

Clock system_clock() {
  return [] {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
  };
}

std::int64_t to_epoch_ms(Timestamp t) noexcept { return t.time_since_epoch().count(); }

Timestamp from_epoch_ms(std::int64_t ms) noexcept {
  return Timestamp{std::chrono::milliseconds{ms}};
}

std::string to_iso8601(Timestamp t) {
  const auto ms = to_epoch_ms(t);
  auto secs = static_cast<std::time_t>(ms / 1000);
  auto frac = static_cast<int>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, frac);
  return out;
}

}  // namespace vpsim
