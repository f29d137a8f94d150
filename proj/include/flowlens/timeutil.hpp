#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace flowlens {

// Timestamps are UTC epoch seconds. The on-disk form is the compact
// YYYYMMDDhhmmss stamp used by all CSV products. Conversions are done with
// plain civil-date arithmetic so results never depend on the host timezone
// or locale.

int64_t civil_to_epoch(int year, int month, int day, int hour, int minute, int second);

// Parses a 14-digit YYYYMMDDhhmmss stamp. Throws config_error on malformed
// input (wrong length, non-digits, out-of-range fields).
int64_t parse_timestamp(std::string_view text);

std::string format_timestamp(int64_t epoch_seconds);

// Largest multiple of window_s not greater than t.
inline int64_t align_window(int64_t t, int64_t window_s) {
  int64_t r = t % window_s;
  if (r < 0) r += window_s;
  return t - r;
}

}  // namespace flowlens
