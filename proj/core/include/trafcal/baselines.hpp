#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "trafcal/calibration.hpp"
#include "trafcal/simulator.hpp"

namespace trafcal {

struct SpsaConfig {
    std::vector<double> theta0;      // empty: data-derived default (mean real traffic / regions)
    double alpha = 30;               // step size
    double alpha_decay_exponent = 0; // alpha_k = alpha / (k+1)^exponent
    double c = 1.0;                  // perturbation scale, in vehicles
    int iterations = 100;            // K
    int max_simulations = std::numeric_limits<int>::max(); // total simulation budget
    std::uint64_t seed = 0;
};

/// Simultaneous-perturbation gradient estimate
/// g_i = (J(theta + c delta) - J(theta - c delta)) / (2 c delta_i).
/// delta entries must be +1/-1.
std::vector<double> spsa_gradient(const std::vector<double>& theta,
                                  const std::vector<double>& delta, double c_k,
                                  const std::function<double(const std::vector<double>&)>& objective);

struct SpsaRun {
    std::vector<double> theta;      // final iterate
    std::vector<double> best_theta; // best evaluated (perturbed) point
    double best_value = 0;
    std::vector<double> best_value_trace; // best-so-far after each iteration
    int evaluations = 0;
};

/// Generic budgeted SPSA loop with theta_{k+1} = project(theta_k - alpha_k g).
SpsaRun spsa_minimize(std::vector<double> theta0, int iterations, double alpha,
                      double alpha_decay_exponent, double c,
                      const std::function<double(const std::vector<double>&)>& objective,
                      const std::function<void(std::vector<double>&)>& project, Rng& rng,
                      int max_evaluations = std::numeric_limits<int>::max());

struct SpsaOutcome {
    TrafficModel model; // union over intervals of the best evaluated materializations
    std::vector<IterationRecord> history;
};

/// SPSA baseline over region-pair OD parameters; each interval's parameter
/// vector is calibrated independently. One objective evaluation materializes
/// theta into vehicles (spread evenly over the interval, routed pivot to pivot
/// under free-flow weights) and runs one simulation.
SpsaOutcome spsa_calibrate(const RoadNetwork& network, const RegionGrid& grid,
                           const CountSeries& real, const Schedule& schedule,
                           const std::vector<Sensor>& sensors,
                           const std::vector<SensorIndex>& active, const SpsaConfig& config,
                           const SimulatorParams& sim_params);

struct TripCandidate {
    Route route;
    std::int64_t depart = 0;
};

struct RoutePool {
    std::vector<TripCandidate> trips;
};

struct RouteSamplerOutcome {
    TrafficModel model;
    std::vector<std::size_t> selected;    // indices into the pool, in pick order
    std::vector<double> residual_trace;   // residual after each greedy pick
};

/// Greedy selection from the pool: repeatedly picks the trip that most
/// reduces sum over (sensor, interval) of max(0, y - yhat_static), where
/// yhat_static attributes each trip to sensors by free-flow offsets along its
/// route. Stops when no candidate improves.
RouteSamplerOutcome route_sampler_calibrate(const RoadNetwork& network, const RoutePool& pool,
                                            const CountSeries& real,
                                            const std::vector<Sensor>& sensors,
                                            const std::vector<SensorIndex>& active,
                                            const Schedule& schedule);

} // namespace trafcal
