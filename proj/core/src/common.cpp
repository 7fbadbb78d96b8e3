#include "trafcal/common.hpp"

#include <cmath>
#include <cstdio>

namespace trafcal {

void validate_schedule(const Schedule& schedule) {
    if (schedule.empty()) throw ValidationError("schedule is empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i].end <= schedule[i].start)
            throw ValidationError("interval " + std::to_string(i) + " has non-positive length");
        if (i > 0 && schedule[i].start != schedule[i - 1].end)
            throw ValidationError("intervals are not contiguous at index " + std::to_string(i));
    }
}

int interval_index_of(const Schedule& schedule, std::int64_t t) {
    if (schedule.empty() || t < schedule.front().start || t >= schedule.back().end) return -1;
    std::size_t lo = 0, hi = schedule.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (t >= schedule[mid].end)
            lo = mid + 1;
        else
            hi = mid;
    }
    return static_cast<int>(lo);
}

Schedule make_uniform_schedule(std::int64_t start, std::int64_t length, int count) {
    Schedule out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back({start + length * i, start + length * (i + 1)});
    return out;
}

std::int64_t round_half_away_from_zero(double x) {
    return static_cast<std::int64_t>(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace trafcal
