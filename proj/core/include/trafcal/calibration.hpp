#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trafcal/rng.hpp"
#include "trafcal/simulator.hpp"

namespace trafcal {

struct CalibrationConfig {
    double q = 0.15;              // convergence rate, fraction of the regional error acted on
    double p_reroute = 0.2;       // per-edge-exit reroute probability during simulation
    int m = 5;                    // maximum regional-route length
    int max_iterations = 20;      // S
    int patience = 3;             // w, stop after this many non-improving iterations
    std::int64_t perturb_max_s = 20;
    double epsilon_greedy = 0.01; // exploration probability for region/pivot choice
    double p_remove_transit = 0.5;
    double gamma = 200;           // target concurrent vehicles for random init
    std::uint64_t seed = 0;

    std::vector<std::string> validate() const;
};

/// Per-region calibration signal for one interval: epsilon = y - yhat and the
/// integer adjustment d = round_half_away_from_zero(|epsilon * q|).
struct RegionError {
    RegionIndex region = -1;
    std::int32_t interval = -1;
    double epsilon = 0;
    std::int64_t adjust = 0;
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0;
    std::size_t model_size = 0;
    double calib_seconds = 0;
    double sim_seconds = 0;
};

struct CalibrationHistory {
    IterationRecord initial;                               // pre-iteration simulation of the input model
    std::vector<IterationRecord> iterations;               // one record per completed iteration
    std::vector<std::vector<RegionError>> region_errors;   // aligned with `iterations`, flattened over intervals

    /// Best objective seen up to and including iteration index i (initial = -1).
    double best_objective_through(int i) const;
};

/// Random initial model: keeps roughly `gamma` vehicles concurrently active
/// (estimated from free-flow route durations) by inserting vehicles with
/// uniformly random origin/destination edges routed under free-flow weights.
TrafficModel init_random_model(const RoadNetwork& network, const Schedule& schedule, double gamma,
                               Rng& rng);

/// Sum over intervals and sensor-bearing regions of |y - yhat|; regions
/// without active sensors contribute zero.
double objective(const CountSeries& real, const SimulationResult& simulated,
                 const RegionGrid& grid, const std::vector<Sensor>& sensors,
                 const std::vector<SensorIndex>& active, const Schedule& schedule);

/// Region errors for one interval, ascending region id order, sensor-bearing
/// regions only.
std::vector<RegionError> compute_region_errors(const CountSeries& real,
                                               const SimulationResult& simulated,
                                               const RegionGrid& grid,
                                               const std::vector<Sensor>& sensors,
                                               const std::vector<SensorIndex>& active,
                                               std::int32_t interval, double q);

/// Removes up to `d` vehicles for a traffic overflow in (region, interval):
/// first vehicles starting their route in the region with a departure inside
/// the interval, then (with probability p_remove_transit each) vehicles that
/// transited the region during the interval per the previous simulation's
/// traversal record. Returns the number actually removed.
std::int64_t remove_vehicles(TrafficModel& model, const RegionGrid& grid, RegionIndex region,
                             const TimeInterval& interval, std::int64_t d,
                             const SimulationResult& last_sim, double p_remove_transit, Rng& rng);

/// Greedy-with-exploration choice over candidate regions: with probability
/// (1 - epsilon) the candidate with the largest epsilon in `errors` (ties by
/// region id), otherwise uniform. Throws ValidationError on no candidates.
RegionIndex choose_nearby_region(const std::vector<RegionIndex>& candidates,
                                 const std::vector<RegionError>& errors, double epsilon_greedy,
                                 Rng& rng);

/// Greedy-with-exploration choice of a sensor (pivot) edge by real-minus-
/// simulated count difference; ties by edge id.
EdgeIndex choose_pivot(const std::vector<std::pair<EdgeIndex, double>>& sensor_edge_diffs,
                       double epsilon_greedy, Rng& rng);

/// Per-region (sensor edge, real - simulated count) table for one interval.
/// Regions without active sensors get empty entries.
std::vector<std::vector<std::pair<EdgeIndex, double>>> sensor_edge_diffs(
    const CountSeries& real, const SimulationResult& simulated, const RegionGrid& grid,
    const std::vector<Sensor>& sensors, const std::vector<SensorIndex>& active,
    std::int32_t interval);

/// Builds a regional route from start_region (greedy growth over adjacent
/// sensor-bearing regions, length <= m, no repeats), picks one pivot edge per
/// region, concatenates shortest-path segments between consecutive pivots
/// under `edge_weights`, and appends the resulting vehicle to the model.
/// The caller assigns the departure time.
Vehicle& add_vehicle(const RoadNetwork& network, const RegionGrid& grid, TrafficModel& model,
                     RegionIndex start_region, std::span<const double> edge_weights, int m,
                     const std::vector<RegionError>& errors,
                     const std::vector<std::vector<std::pair<EdgeIndex, double>>>& diffs,
                     double epsilon_greedy, Rng& rng);

/// Evenly spaces the departures of vehicles originating in the region within
/// the interval, then jitters each by a uniformly drawn integer offset in
/// [0, perturb_max] with random sign, clamped back into the interval.
void schedule_starting_times(TrafficModel& model, const RegionGrid& grid, RegionIndex region,
                             const TimeInterval& interval, std::int64_t perturb_max, Rng& rng);

/// Full calibration loop; returns the model achieving the best recorded
/// objective together with the iteration history.
std::pair<TrafficModel, CalibrationHistory> calibrate(const RoadNetwork& network,
                                                      const RegionGrid& grid,
                                                      const CountSeries& real,
                                                      const Schedule& schedule,
                                                      const std::vector<Sensor>& sensors,
                                                      const std::vector<SensorIndex>& active_train,
                                                      const CalibrationConfig& config);

} // namespace trafcal
