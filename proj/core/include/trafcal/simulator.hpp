#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trafcal/counts.hpp"
#include "trafcal/network.hpp"
#include "trafcal/regions.hpp"

namespace trafcal {

struct Vehicle {
    std::string id;
    std::int64_t depart = 0; // seconds from simulation start
    Route route;
    RegionIndex origin_region = -1;            // -1 when unknown (random init)
    std::vector<RegionIndex> regional_route;   // empty for randomly initialized vehicles
};

/// The calibration variable: a set of vehicles with departure times and routes.
struct TrafficModel {
    std::vector<Vehicle> vehicles;

    std::size_t size() const { return vehicles.size(); }

    /// Unique id for a vehicle created by this model instance.
    std::string fresh_id() { return "v" + std::to_string(next_serial_++); }

    std::uint64_t next_serial_ = 0;
};

// Published calibrated-model format: `V <id> <depart_s> <edge_id>...` per line.
void save_model(const TrafficModel& model, const RoadNetwork& network, const std::string& path);
TrafficModel load_model(const std::string& path, const RoadNetwork& network);

struct SimulatorParams {
    double vehicle_length_m = 7.5;        // effective storage footprint per vehicle
    double saturation_flow_vphpl = 1800;  // outflow capacity per lane, vehicles/hour
    double jam_occupancy = 0.4;           // storage fraction above which upstream entries block
    std::int64_t insertion_retry_s = 300; // give up inserting after this many seconds
    double reroute_probability = 0.0;     // drawn once per vehicle per edge exit
    std::int64_t reroute_window_s = 100;  // trailing window for observed edge travel times
};

struct EdgeEntry {
    EdgeIndex edge = -1;
    std::int64_t tick = 0; // tick at which the vehicle entered the edge
};

struct SimulationResult {
    CountSeries counts; // simulated counts at sensor granularity

    // (edge, interval) travel-time aggregates keyed by exit tick's interval
    std::vector<double> travel_time_sum;
    std::vector<std::int32_t> travel_time_count;
    std::int32_t interval_count = 0;

    // per-vehicle traversal record, aligned with `vehicle_ids`
    std::vector<std::string> vehicle_ids;
    std::vector<std::vector<EdgeEntry>> traversals;

    std::int64_t inserted = 0;
    std::int64_t completed = 0;
    std::int64_t en_route_at_end = 0;
    std::int64_t insertion_dropped = 0;    // gave up after the retry window
    std::int64_t insertion_pending = 0;    // still waiting when the horizon ended

    std::optional<double> mean_travel_time(EdgeIndex e, std::int32_t interval) const {
        const auto idx = static_cast<std::size_t>(e) * static_cast<std::size_t>(interval_count) +
                         static_cast<std::size_t>(interval);
        if (travel_time_count[idx] == 0) return std::nullopt;
        return travel_time_sum[idx] / travel_time_count[idx];
    }

    bool operator==(const SimulationResult&) const = default;
};

/// Deterministic mesoscopic queue simulation of the model over the schedule.
/// Identical (network, model, sensors, schedule, params, seed) yield an
/// identical SimulationResult.
SimulationResult simulate(const RoadNetwork& network, const TrafficModel& model,
                          const std::vector<Sensor>& sensors, const Schedule& schedule,
                          const SimulatorParams& params, std::uint64_t seed);

/// Mean experienced travel time of vehicles completing edge e during the
/// interval; falls back to free-flow time when nothing traversed the edge.
/// Throws ValidationError on an out-of-range interval.
double observed_weight(const RoadNetwork& network, EdgeIndex e, std::int32_t interval,
                       const SimulationResult& result);

/// One observed weight per edge for a fixed interval (free-flow fallback).
std::vector<double> observed_weights(const RoadNetwork& network, std::int32_t interval,
                                     const SimulationResult& result);

/// Mean simulated count over the active sensors inside the region during the
/// interval. Mirrors region_average_real on the simulated side.
double region_average_simulated(const SimulationResult& result, const RegionGrid& grid,
                                const std::vector<Sensor>& sensors,
                                const std::vector<SensorIndex>& active, RegionIndex region,
                                std::int32_t interval);

} // namespace trafcal
