#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trafcal/regions.hpp"

namespace trafcal {

using SensorIndex = std::int32_t;

/// Fixed traffic-count device sitting on one edge.
struct Sensor {
    std::string id;
    EdgeIndex edge = -1;
};

/// Validates id uniqueness, edge existence and the one-sensor-per-edge rule,
/// and returns the sensors sorted by id (the canonical order used everywhere).
std::vector<Sensor> canonical_sensors(std::vector<Sensor> sensors, const RoadNetwork& network);

// Dense per-(sensor, interval) vehicle counts. Sensor axis follows the
// canonical (id-sorted) sensor vector it was built against.
class CountSeries {
public:
    CountSeries() = default;
    CountSeries(std::int32_t sensors, std::int32_t intervals)
        : sensors_(sensors), intervals_(intervals),
          data_(static_cast<std::size_t>(sensors) * static_cast<std::size_t>(intervals), 0) {}

    std::int32_t sensor_count() const { return sensors_; }
    std::int32_t interval_count() const { return intervals_; }

    std::int64_t at(SensorIndex s, std::int32_t interval) const {
        return data_[index(s, interval)];
    }
    std::int64_t& at(SensorIndex s, std::int32_t interval) { return data_[index(s, interval)]; }

    bool operator==(const CountSeries&) const = default;

private:
    std::size_t index(SensorIndex s, std::int32_t interval) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(intervals_) +
               static_cast<std::size_t>(interval);
    }

    std::int32_t sensors_ = 0;
    std::int32_t intervals_ = 0;
    std::vector<std::int64_t> data_;
};

/// Active (e.g. train-split) sensors located in a region, ascending sensor index.
std::vector<SensorIndex> sensors_in_region(const RegionGrid& grid,
                                           const std::vector<Sensor>& sensors,
                                           const std::vector<SensorIndex>& active,
                                           RegionIndex region);

/// Mean observed count over the active sensors inside the region during the
/// interval. Throws NoSensorError when the region has no active sensor.
double region_average_real(const CountSeries& counts, const RegionGrid& grid,
                           const std::vector<Sensor>& sensors,
                           const std::vector<SensorIndex>& active, RegionIndex region,
                           std::int32_t interval);

} // namespace trafcal
