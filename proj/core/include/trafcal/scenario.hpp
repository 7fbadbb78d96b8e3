#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trafcal/simulator.hpp"

namespace trafcal {

/// Synthetic Manhattan-grid scenario description.
struct ScenarioSpec {
    int rows = 6;  // blocks vertically
    int cols = 6;  // blocks horizontally
    double block_length_m = 150;
    double max_speed_mps = 13.89;
    int lanes = 1;
    double cell_size_m = 300;
    int sensor_count = 12;
    std::int64_t horizon_s = 7200;
    std::int64_t interval_s = 900;
    // expected vehicle departures per interval index; shapes the demand peak
    std::vector<std::pair<int, double>> demand;
    std::uint64_t seed = 1;

    std::vector<std::string> validate() const;
    int interval_count() const { return static_cast<int>(horizon_s / interval_s); }
};

struct ScenarioBundle {
    RoadNetwork network;
    RegionGrid grid;
    std::vector<Sensor> sensors;
    Schedule schedule;
    TrafficModel truth;     // diagnostics only, never shown to calibrators
    CountSeries real_counts;
};

/// Builds the grid network, places sensors on the highest-betweenness edges,
/// synthesizes a ground-truth model following the demand profile, and runs the
/// simulator once to produce the "real" counts.
ScenarioBundle generate_scenario(const ScenarioSpec& spec);

/// Writes network.txt, counts.csv, sensors.csv, truth_model.txt, regions.txt
/// and scenario.cfg (a key=value echo of the spec) into the directory.
void write_bundle(const ScenarioBundle& bundle, const ScenarioSpec& spec,
                  const std::string& directory);

/// Writes a counts CSV: header `sensor_id,edge_id,interval_start_s,count`,
/// one row per (sensor, interval), sensors in canonical order.
void save_counts(const CountSeries& counts, const std::vector<Sensor>& sensors,
                 const RoadNetwork& network, const Schedule& schedule, const std::string& path);

struct LoadedCounts {
    std::vector<Sensor> sensors; // canonical (id-sorted) order
    Schedule schedule;
    CountSeries counts;
};

/// Parses a counts CSV against the network. Intervals must be uniform and
/// contiguous and every (sensor, interval) cell must be present.
LoadedCounts load_counts(const std::string& path, const RoadNetwork& network);

/// Key=value scenario spec file (# comments). Unknown keys are an error.
ScenarioSpec parse_scenario_spec(const std::string& path);
void save_scenario_spec(const ScenarioSpec& spec, const std::string& path);

} // namespace trafcal
