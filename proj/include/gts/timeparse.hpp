#pragma once

#include <cstdint>
#include <string>

namespace gts::data {

// Parses "YYYY-MM-DDTHH:MM:SS" (a trailing "Z" is accepted) to Unix epoch
// seconds, proleptic Gregorian, no leap seconds. Throws DataError on
// malformed input or out-of-range fields.
int64_t parse_iso8601(const std::string& s);

// Inverse of parse_iso8601; always emits the 19-character form.
std::string format_iso8601(int64_t epoch_seconds);

}  // namespace gts::data
