#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trafcal {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or config text.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Requested destination unreachable from the origin.
class NoPathError : public Error {
public:
    using Error::Error;
};

/// A region-level query against a region with no usable sensor.
class NoSensorError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Half-open aggregation window [start, end) in seconds.
struct TimeInterval {
    std::int64_t start = 0;
    std::int64_t end = 0;

    std::int64_t length() const { return end - start; }
    bool contains(std::int64_t t) const { return t >= start && t < end; }
    bool operator==(const TimeInterval&) const = default;
};

/// Contiguous, non-overlapping intervals in chronological order.
using Schedule = std::vector<TimeInterval>;

/// Throws ValidationError unless the schedule is non-empty, each interval has
/// end > start, and consecutive intervals are contiguous.
void validate_schedule(const Schedule& schedule);

/// Index of the interval containing instant t, or -1 when t falls outside.
int interval_index_of(const Schedule& schedule, std::int64_t t);

inline std::int64_t schedule_horizon_end(const Schedule& schedule) {
    return schedule.empty() ? 0 : schedule.back().end;
}

inline std::int64_t schedule_horizon_start(const Schedule& schedule) {
    return schedule.empty() ? 0 : schedule.front().start;
}

/// Builds a uniform schedule of `count` intervals of `length` seconds from `start`.
Schedule make_uniform_schedule(std::int64_t start, std::int64_t length, int count);

/// round-half-away-from-zero to an integer (0.5 -> 1, -0.5 -> -1).
std::int64_t round_half_away_from_zero(double x);

/// Formats a double for CSV output; stable across runs for identical values.
std::string format_double(double v);

} // namespace trafcal
