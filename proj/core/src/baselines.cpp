#include "trafcal/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace trafcal {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct OdPair {
    RegionIndex from_region = -1;
    RegionIndex to_region = -1;
    Route route; // pivot-to-pivot under free-flow weights, fixed for the run
};

// Anchor edge per sensor-bearing region: the sensor edge with the highest
// total real count over the horizon, ties toward the smaller edge id.
std::vector<std::pair<RegionIndex, EdgeIndex>> region_anchors(
    const RegionGrid& grid, const CountSeries& real, const std::vector<Sensor>& sensors,
    const std::vector<SensorIndex>& active) {
    std::vector<std::pair<RegionIndex, EdgeIndex>> anchors;
    for (RegionIndex r = 0; r < grid.region_count(); ++r) {
        const auto in_region = sensors_in_region(grid, sensors, active, r);
        if (in_region.empty()) continue;
        EdgeIndex best_edge = -1;
        std::int64_t best_total = -1;
        for (SensorIndex s : in_region) {
            std::int64_t total = 0;
            for (std::int32_t i = 0; i < real.interval_count(); ++i) total += real.at(s, i);
            const EdgeIndex edge = sensors[static_cast<std::size_t>(s)].edge;
            if (total > best_total || (total == best_total && edge < best_edge)) {
                best_total = total;
                best_edge = edge;
            }
        }
        anchors.push_back({r, best_edge});
    }
    return anchors;
}

double interval_objective(const CountSeries& real, const SimulationResult& sim,
                          const RegionGrid& grid, const std::vector<Sensor>& sensors,
                          const std::vector<SensorIndex>& active, std::int32_t interval) {
    double total = 0;
    for (RegionIndex r = 0; r < grid.region_count(); ++r) {
        const auto in_region = sensors_in_region(grid, sensors, active, r);
        if (in_region.empty()) continue;
        double y = 0, yhat = 0;
        for (SensorIndex s : in_region) {
            y += static_cast<double>(real.at(s, interval));
            yhat += static_cast<double>(sim.counts.at(s, interval));
        }
        total += std::abs(y - yhat) / static_cast<double>(in_region.size());
    }
    return total;
}

} // namespace

std::vector<double> spsa_gradient(const std::vector<double>& theta,
                                  const std::vector<double>& delta, double c_k,
                                  const std::function<double(const std::vector<double>&)>& objective) {
    if (theta.size() != delta.size())
        throw ValidationError("spsa_gradient: theta/delta size mismatch");
    if (!(c_k > 0)) throw ValidationError("spsa_gradient: c_k must be positive");
    for (double d : delta)
        if (d != 1.0 && d != -1.0)
            throw ValidationError("spsa_gradient: delta entries must be +1 or -1");

    std::vector<double> plus(theta), minus(theta);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        plus[i] += c_k * delta[i];
        minus[i] -= c_k * delta[i];
    }
    const double j_plus = objective(plus);
    const double j_minus = objective(minus);

    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        grad[i] = (j_plus - j_minus) / (2.0 * c_k * delta[i]);
    return grad;
}

SpsaRun spsa_minimize(std::vector<double> theta0, int iterations, double alpha,
                      double alpha_decay_exponent, double c,
                      const std::function<double(const std::vector<double>&)>& objective,
                      const std::function<void(std::vector<double>&)>& project, Rng& rng,
                      int max_evaluations) {
    SpsaRun run;
    run.theta = std::move(theta0);
    run.best_value = std::numeric_limits<double>::infinity();

    std::vector<double> delta(run.theta.size());
    for (int k = 0; k < iterations; ++k) {
        if (run.evaluations + 2 > max_evaluations) break;
        for (auto& d : delta) d = static_cast<double>(rng.rademacher());

        double j_plus = 0, j_minus = 0;
        std::vector<double> plus(run.theta), minus(run.theta);
        for (std::size_t i = 0; i < run.theta.size(); ++i) {
            plus[i] += c * delta[i];
            minus[i] -= c * delta[i];
        }
        j_plus = objective(plus);
        j_minus = objective(minus);
        run.evaluations += 2;

        if (j_plus < run.best_value) {
            run.best_value = j_plus;
            run.best_theta = plus;
        }
        if (j_minus < run.best_value) {
            run.best_value = j_minus;
            run.best_theta = minus;
        }

        const double alpha_k = alpha / std::pow(static_cast<double>(k + 1), alpha_decay_exponent);
        for (std::size_t i = 0; i < run.theta.size(); ++i)
            run.theta[i] -= alpha_k * (j_plus - j_minus) / (2.0 * c * delta[i]);
        if (project) project(run.theta);
        run.best_value_trace.push_back(run.best_value);
    }
    return run;
}

SpsaOutcome spsa_calibrate(const RoadNetwork& network, const RegionGrid& grid,
                           const CountSeries& real, const Schedule& schedule,
                           const std::vector<Sensor>& sensors,
                           const std::vector<SensorIndex>& active, const SpsaConfig& config,
                           const SimulatorParams& sim_params) {
    if (active.empty()) throw ValidationError("spsa_calibrate: empty sensor set");
    validate_schedule(schedule);
    Rng rng(config.seed);

    const auto anchors = region_anchors(grid, real, sensors, active);
    const auto n_regions = anchors.size();
    const std::vector<double> ff = free_flow_weights(network);

    // unordered region pairs that admit a pivot-to-pivot route; orientation
    // follows id order when routable, else the reverse
    std::vector<OdPair> pairs;
    for (std::size_t a = 0; a < n_regions; ++a) {
        for (std::size_t b = a + 1; b < n_regions; ++b) {
            OdPair pair;
            try {
                pair.route = shortest_route(network, anchors[a].second, anchors[b].second, ff);
                pair.from_region = anchors[a].first;
                pair.to_region = anchors[b].first;
            } catch (const NoPathError&) {
                try {
                    pair.route = shortest_route(network, anchors[b].second, anchors[a].second, ff);
                    pair.from_region = anchors[b].first;
                    pair.to_region = anchors[a].first;
                } catch (const NoPathError&) {
                    continue; // unroutable pair, excluded from theta
                }
            }
            pairs.push_back(std::move(pair));
        }
    }
    if (pairs.empty()) throw ValidationError("spsa_calibrate: no routable region pairs");

    if (!config.theta0.empty() && config.theta0.size() != pairs.size())
        throw ConfigError("spsa theta0 has " + std::to_string(config.theta0.size()) +
                          " entries, expected " + std::to_string(pairs.size()));

    const auto n_intervals = static_cast<std::int32_t>(schedule.size());

    auto materialize = [&](const std::vector<double>& theta, std::int32_t interval,
                           TrafficModel& model) {
        const TimeInterval window = schedule[static_cast<std::size_t>(interval)];
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto n = std::max<std::int64_t>(0, round_half_away_from_zero(theta[p]));
            for (std::int64_t k = 0; k < n; ++k) {
                Vehicle v;
                v.id = model.fresh_id();
                v.depart = window.start +
                           static_cast<std::int64_t>(std::floor(
                               static_cast<double>(window.length()) * static_cast<double>(k) /
                               static_cast<double>(n)));
                v.route = pairs[p].route;
                v.origin_region = pairs[p].from_region;
                model.vehicles.push_back(std::move(v));
            }
        }
    };

    int simulations_left = config.max_simulations;
    double sim_seconds_total = 0;

    auto evaluate = [&](const std::vector<double>& theta, std::int32_t interval) {
        TrafficModel model;
        materialize(theta, interval, model);
        const auto t0 = std::chrono::steady_clock::now();
        const auto sim =
            simulate(network, model, sensors, schedule, sim_params, rng.next_u64());
        sim_seconds_total += seconds_since(t0);
        --simulations_left;
        return interval_objective(real, sim, grid, sensors, active, interval);
    };

    // theta initialization: average real traffic in the interval over the
    // active sensors, divided by the number of sensor-bearing regions
    std::vector<std::vector<double>> theta(static_cast<std::size_t>(n_intervals));
    for (std::int32_t i = 0; i < n_intervals; ++i) {
        if (!config.theta0.empty()) {
            theta[static_cast<std::size_t>(i)] = config.theta0;
            continue;
        }
        double mean = 0;
        for (SensorIndex s : active) mean += static_cast<double>(real.at(s, i));
        mean /= static_cast<double>(active.size());
        theta[static_cast<std::size_t>(i)]
            .assign(pairs.size(), mean / static_cast<double>(n_regions));
    }

    std::vector<double> best_value(static_cast<std::size_t>(n_intervals),
                                   std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> best_theta = theta;

    const int per_iteration_cost = 2 * n_intervals;
    const int budget_iterations =
        std::max(1, config.max_simulations / std::max(1, per_iteration_cost));
    const int iterations = std::min(config.iterations, budget_iterations);

    auto project = [](std::vector<double>& t) {
        for (auto& v : t) v = static_cast<double>(std::max<std::int64_t>(0, round_half_away_from_zero(v)));
    };

    SpsaOutcome outcome;
    std::vector<double> delta(pairs.size());
    for (int k = 0; k < iterations; ++k) {
        const auto calib_t0 = std::chrono::steady_clock::now();
        const double sim_before = sim_seconds_total;
        for (std::int32_t i = 0; i < n_intervals; ++i) {
            if (simulations_left < 2) break;
            auto& th = theta[static_cast<std::size_t>(i)];
            for (auto& d : delta) d = static_cast<double>(rng.rademacher());

            std::vector<double> plus(th), minus(th);
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                plus[p] += config.c * delta[p];
                minus[p] -= config.c * delta[p];
            }
            const double j_plus = evaluate(plus, i);
            const double j_minus = evaluate(minus, i);

            if (j_plus < best_value[static_cast<std::size_t>(i)]) {
                best_value[static_cast<std::size_t>(i)] = j_plus;
                best_theta[static_cast<std::size_t>(i)] = plus;
            }
            if (j_minus < best_value[static_cast<std::size_t>(i)]) {
                best_value[static_cast<std::size_t>(i)] = j_minus;
                best_theta[static_cast<std::size_t>(i)] = minus;
            }

            const double alpha_k =
                config.alpha / std::pow(static_cast<double>(k + 1), config.alpha_decay_exponent);
            for (std::size_t p = 0; p < pairs.size(); ++p)
                th[p] -= alpha_k * (j_plus - j_minus) / (2.0 * config.c * delta[p]);
            project(th);
        }

        double objective_total = 0;
        std::size_t model_size = 0;
        TrafficModel probe;
        for (std::int32_t i = 0; i < n_intervals; ++i) {
            objective_total += best_value[static_cast<std::size_t>(i)];
            materialize(best_theta[static_cast<std::size_t>(i)], i, probe);
        }
        model_size = probe.size();
        const double sim_delta = sim_seconds_total - sim_before;
        outcome.history.push_back({k + 1, objective_total, model_size,
                                   seconds_since(calib_t0) - sim_delta, sim_delta});
        if (simulations_left < 2) break;
    }

    for (std::int32_t i = 0; i < n_intervals; ++i)
        materialize(best_theta[static_cast<std::size_t>(i)], i, outcome.model);
    return outcome;
}

RouteSamplerOutcome route_sampler_calibrate(const RoadNetwork& network, const RoutePool& pool,
                                            const CountSeries& real,
                                            const std::vector<Sensor>& sensors,
                                            const std::vector<SensorIndex>& active,
                                            const Schedule& schedule) {
    if (pool.trips.empty()) throw ValidationError("route_sampler_calibrate: empty pool");
    validate_schedule(schedule);

    const auto n_intervals = static_cast<std::int32_t>(schedule.size());
    std::vector<SensorIndex> sensor_on_edge(static_cast<std::size_t>(network.edge_count()), -1);
    std::vector<char> is_active(sensors.size(), 0);
    for (SensorIndex s : active) is_active[static_cast<std::size_t>(s)] = 1;
    for (std::size_t s = 0; s < sensors.size(); ++s)
        if (is_active[s])
            sensor_on_edge[static_cast<std::size_t>(sensors[s].edge)] = static_cast<SensorIndex>(s);

    // static attribution: free-flow entry offsets along each candidate route
    auto cell_of = [&](SensorIndex s, std::int32_t i) {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_intervals) +
               static_cast<std::size_t>(i);
    };
    std::vector<std::vector<std::size_t>> hits(pool.trips.size());
    for (std::size_t c = 0; c < pool.trips.size(); ++c) {
        const auto& trip = pool.trips[c];
        double offset = 0;
        for (EdgeIndex e : trip.route.edges) {
            const auto enter =
                trip.depart + static_cast<std::int64_t>(std::floor(offset));
            const SensorIndex s = sensor_on_edge[static_cast<std::size_t>(e)];
            const int interval = interval_index_of(schedule, enter);
            if (s >= 0 && interval >= 0) hits[c].push_back(cell_of(s, interval));
            offset += free_flow_weight(network, e);
        }
    }

    std::vector<std::int64_t> deficit(sensors.size() * static_cast<std::size_t>(n_intervals), 0);
    double residual = 0;
    for (SensorIndex s : active)
        for (std::int32_t i = 0; i < n_intervals; ++i) {
            deficit[cell_of(s, i)] = real.at(s, i);
            residual += static_cast<double>(real.at(s, i));
        }

    RouteSamplerOutcome outcome;
    std::vector<char> used(pool.trips.size(), 0);
    while (true) {
        std::size_t best_candidate = pool.trips.size();
        std::int64_t best_reduction = 0;
        for (std::size_t c = 0; c < pool.trips.size(); ++c) {
            if (used[c]) continue;
            std::int64_t reduction = 0;
            for (std::size_t cell : hits[c])
                if (deficit[cell] > 0) ++reduction;
            if (reduction > best_reduction) {
                best_reduction = reduction;
                best_candidate = c;
            }
        }
        if (best_candidate == pool.trips.size()) break;

        used[best_candidate] = 1;
        outcome.selected.push_back(best_candidate);
        for (std::size_t cell : hits[best_candidate])
            if (deficit[cell] > 0) --deficit[cell];
        residual -= static_cast<double>(best_reduction);
        outcome.residual_trace.push_back(residual);

        const auto& trip = pool.trips[best_candidate];
        Vehicle v;
        v.id = outcome.model.fresh_id();
        v.depart = trip.depart;
        v.route = trip.route;
        outcome.model.vehicles.push_back(std::move(v));
    }
    return outcome;
}

} // namespace trafcal
