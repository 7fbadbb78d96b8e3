#include "trafcal/calibration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace trafcal {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

std::vector<std::string> CalibrationConfig::validate() const {
    std::vector<std::string> diags;
    if (!(q > 0.0 && q <= 1.0)) diags.push_back("q: must be in (0, 1]");
    if (p_reroute < 0.0 || p_reroute > 1.0) diags.push_back("p_reroute: must be in [0, 1]");
    if (m < 1) diags.push_back("m: must be >= 1");
    if (max_iterations < 1) diags.push_back("max_iterations: must be >= 1");
    if (patience < 1) diags.push_back("patience: must be >= 1");
    if (perturb_max_s < 0) diags.push_back("perturb_max_s: must be >= 0");
    if (epsilon_greedy < 0.0 || epsilon_greedy > 1.0)
        diags.push_back("epsilon_greedy: must be in [0, 1]");
    if (p_remove_transit < 0.0 || p_remove_transit > 1.0)
        diags.push_back("p_remove_transit: must be in [0, 1]");
    if (gamma < 0.0) diags.push_back("gamma: must be >= 0");
    return diags;
}

double CalibrationHistory::best_objective_through(int i) const {
    double best = initial.objective;
    for (const auto& rec : iterations) {
        if (rec.iteration > i) break;
        best = std::min(best, rec.objective);
    }
    return best;
}

TrafficModel init_random_model(const RoadNetwork& network, const Schedule& schedule, double gamma,
                               Rng& rng) {
    validate_schedule(schedule);
    TrafficModel model;
    if (gamma <= 0 || network.edge_count() == 0) return model;

    const std::vector<double> ff = free_flow_weights(network);
    const std::int64_t t0 = schedule_horizon_start(schedule);
    const std::int64_t t1 = schedule_horizon_end(schedule);

    // estimated trip end times of active vehicles
    std::priority_queue<double, std::vector<double>, std::greater<>> active;
    constexpr int kMaxRedraws = 32;

    for (std::int64_t t = t0; t < t1; ++t) {
        while (!active.empty() && active.top() <= static_cast<double>(t)) active.pop();
        while (static_cast<double>(active.size()) < gamma) {
            Route route;
            bool found = false;
            for (int attempt = 0; attempt < kMaxRedraws && !found; ++attempt) {
                const auto origin =
                    static_cast<EdgeIndex>(rng.uniform_int(0, network.edge_count() - 1));
                const auto destination =
                    static_cast<EdgeIndex>(rng.uniform_int(0, network.edge_count() - 1));
                try {
                    route = shortest_route(network, origin, destination, ff);
                    found = true;
                } catch (const NoPathError&) {
                }
            }
            if (!found) break; // skip this slot, try again at the next instant

            Vehicle v;
            v.id = model.fresh_id();
            v.depart = t;
            v.route = route;
            model.vehicles.push_back(std::move(v));
            active.push(static_cast<double>(t) + route_weight(route, ff));
        }
    }
    return model;
}

double objective(const CountSeries& real, const SimulationResult& simulated,
                 const RegionGrid& grid, const std::vector<Sensor>& sensors,
                 const std::vector<SensorIndex>& active, const Schedule& schedule) {
    double total = 0;
    for (RegionIndex r = 0; r < grid.region_count(); ++r) {
        const auto in_region = sensors_in_region(grid, sensors, active, r);
        if (in_region.empty()) continue;
        for (std::int32_t i = 0; i < static_cast<std::int32_t>(schedule.size()); ++i) {
            double y = 0, yhat = 0;
            for (SensorIndex s : in_region) {
                y += static_cast<double>(real.at(s, i));
                yhat += static_cast<double>(simulated.counts.at(s, i));
            }
            total += std::abs(y - yhat) / static_cast<double>(in_region.size());
        }
    }
    return total;
}

std::vector<RegionError> compute_region_errors(const CountSeries& real,
                                               const SimulationResult& simulated,
                                               const RegionGrid& grid,
                                               const std::vector<Sensor>& sensors,
                                               const std::vector<SensorIndex>& active,
                                               std::int32_t interval, double q) {
    std::vector<RegionError> errors;
    for (RegionIndex r = 0; r < grid.region_count(); ++r) {
        const auto in_region = sensors_in_region(grid, sensors, active, r);
        if (in_region.empty()) continue;
        double y = 0, yhat = 0;
        for (SensorIndex s : in_region) {
            y += static_cast<double>(real.at(s, interval));
            yhat += static_cast<double>(simulated.counts.at(s, interval));
        }
        const double epsilon = (y - yhat) / static_cast<double>(in_region.size());
        errors.push_back(
            {r, interval, epsilon, round_half_away_from_zero(std::abs(epsilon * q))});
    }
    return errors; // region indices ascend, which is id order by construction
}

std::int64_t remove_vehicles(TrafficModel& model, const RegionGrid& grid, RegionIndex region,
                             const TimeInterval& interval, std::int64_t d,
                             const SimulationResult& last_sim, double p_remove_transit, Rng& rng) {
    if (d <= 0) return 0;

    std::vector<std::size_t> starters;
    for (std::size_t v = 0; v < model.vehicles.size(); ++v) {
        const auto& veh = model.vehicles[v];
        if (grid.region_of_edge(veh.route.front()) == region && interval.contains(veh.depart))
            starters.push_back(v);
    }

    std::vector<std::size_t> doomed;
    std::int64_t removed = 0;
    while (removed < d && !starters.empty()) {
        const auto pick =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(starters.size()) - 1));
        doomed.push_back(starters[pick]);
        starters.erase(starters.begin() + static_cast<std::ptrdiff_t>(pick));
        ++removed;
    }

    if (removed < d) {
        // traversal records are keyed by vehicle id since the model may have
        // been edited since the simulation ran
        std::unordered_map<std::string_view, std::size_t> sim_index;
        sim_index.reserve(last_sim.vehicle_ids.size());
        for (std::size_t i = 0; i < last_sim.vehicle_ids.size(); ++i)
            sim_index.emplace(last_sim.vehicle_ids[i], i);

        std::vector<char> already(model.vehicles.size(), 0);
        for (std::size_t v : doomed) already[v] = 1;

        std::vector<std::size_t> transiting;
        for (std::size_t v = 0; v < model.vehicles.size(); ++v) {
            if (already[v]) continue;
            auto it = sim_index.find(model.vehicles[v].id);
            if (it == sim_index.end()) continue;
            for (const auto& entry : last_sim.traversals[it->second]) {
                if (interval.contains(entry.tick) && grid.region_of_edge(entry.edge) == region) {
                    transiting.push_back(v);
                    break;
                }
            }
        }

        while (removed < d && !transiting.empty()) {
            const auto pick = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(transiting.size()) - 1));
            const std::size_t v = transiting[pick];
            transiting.erase(transiting.begin() + static_cast<std::ptrdiff_t>(pick));
            ++removed; // one removal attempt is spent whether or not it succeeds
            if (rng.bernoulli(p_remove_transit)) doomed.push_back(v);
        }
    }

    std::sort(doomed.begin(), doomed.end(), std::greater<>());
    std::int64_t actually_removed = 0;
    for (std::size_t v : doomed) {
        model.vehicles.erase(model.vehicles.begin() + static_cast<std::ptrdiff_t>(v));
        ++actually_removed;
    }
    return actually_removed;
}

RegionIndex choose_nearby_region(const std::vector<RegionIndex>& candidates,
                                 const std::vector<RegionError>& errors, double epsilon_greedy,
                                 Rng& rng) {
    if (candidates.empty()) throw ValidationError("choose_nearby_region: no candidates");
    if (candidates.size() == 1) return candidates.front();
    if (rng.bernoulli(epsilon_greedy)) {
        return candidates[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
    }
    auto epsilon_of = [&](RegionIndex r) {
        for (const auto& e : errors)
            if (e.region == r) return e.epsilon;
        return -std::numeric_limits<double>::infinity();
    };
    RegionIndex best = candidates.front();
    double best_eps = epsilon_of(best);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double eps = epsilon_of(candidates[i]);
        if (eps > best_eps || (eps == best_eps && candidates[i] < best)) {
            best = candidates[i];
            best_eps = eps;
        }
    }
    return best;
}

EdgeIndex choose_pivot(const std::vector<std::pair<EdgeIndex, double>>& sensor_edge_diffs,
                       double epsilon_greedy, Rng& rng) {
    if (sensor_edge_diffs.empty())
        throw NoSensorError("choose_pivot: region has no sensor-equipped edge");
    if (sensor_edge_diffs.size() == 1) return sensor_edge_diffs.front().first;
    if (rng.bernoulli(epsilon_greedy)) {
        return sensor_edge_diffs[static_cast<std::size_t>(rng.uniform_int(
                                     0, static_cast<std::int64_t>(sensor_edge_diffs.size()) - 1))]
            .first;
    }
    auto best = sensor_edge_diffs.front();
    for (std::size_t i = 1; i < sensor_edge_diffs.size(); ++i) {
        const auto& cand = sensor_edge_diffs[i];
        if (cand.second > best.second || (cand.second == best.second && cand.first < best.first))
            best = cand;
    }
    return best.first;
}

std::vector<std::vector<std::pair<EdgeIndex, double>>> sensor_edge_diffs(
    const CountSeries& real, const SimulationResult& simulated, const RegionGrid& grid,
    const std::vector<Sensor>& sensors, const std::vector<SensorIndex>& active,
    std::int32_t interval) {
    std::vector<std::vector<std::pair<EdgeIndex, double>>> table(
        static_cast<std::size_t>(grid.region_count()));
    for (SensorIndex s : active) {
        const EdgeIndex edge = sensors[static_cast<std::size_t>(s)].edge;
        const auto region = static_cast<std::size_t>(grid.region_of_edge(edge));
        const double diff = static_cast<double>(real.at(s, interval)) -
                            static_cast<double>(simulated.counts.at(s, interval));
        table[region].push_back({edge, diff});
    }
    for (auto& entry : table) std::sort(entry.begin(), entry.end());
    return table;
}

Vehicle& add_vehicle(const RoadNetwork& network, const RegionGrid& grid, TrafficModel& model,
                     RegionIndex start_region, std::span<const double> edge_weights, int m,
                     const std::vector<RegionError>& errors,
                     const std::vector<std::vector<std::pair<EdgeIndex, double>>>& diffs,
                     double epsilon_greedy, Rng& rng) {
    if (diffs[static_cast<std::size_t>(start_region)].empty())
        throw NoSensorError("add_vehicle: start region has no sensor-equipped edge");

    // regional route: greedy growth over adjacent sensor-bearing regions
    std::vector<RegionIndex> regional{start_region};
    std::vector<char> in_route(static_cast<std::size_t>(grid.region_count()), 0);
    in_route[static_cast<std::size_t>(start_region)] = 1;
    auto candidates_of = [&](RegionIndex r) {
        std::vector<RegionIndex> out;
        for (RegionIndex n : grid.neighbors(r))
            if (!in_route[static_cast<std::size_t>(n)] && !diffs[static_cast<std::size_t>(n)].empty())
                out.push_back(n);
        return out;
    };
    auto candidates = candidates_of(start_region);
    while (static_cast<int>(regional.size()) < m && !candidates.empty()) {
        const RegionIndex next = choose_nearby_region(candidates, errors, epsilon_greedy, rng);
        regional.push_back(next);
        in_route[static_cast<std::size_t>(next)] = 1;
        candidates = candidates_of(next);
    }

    std::vector<EdgeIndex> pivots;
    pivots.reserve(regional.size());
    for (RegionIndex r : regional)
        pivots.push_back(choose_pivot(diffs[static_cast<std::size_t>(r)], epsilon_greedy, rng));

    // concatenate pivot-to-pivot segments, dropping the shared pivot edge at
    // each join; an unroutable pair truncates the regional route there
    Route route{{pivots.front()}};
    std::size_t reached = 1;
    for (std::size_t j = 0; j + 1 < pivots.size(); ++j) {
        try {
            Route segment = shortest_route(network, pivots[j], pivots[j + 1], edge_weights);
            route.edges.insert(route.edges.end(), segment.edges.begin() + 1, segment.edges.end());
            ++reached;
        } catch (const NoPathError&) {
            break;
        }
    }
    regional.resize(reached);

    Vehicle v;
    v.id = model.fresh_id();
    v.depart = 0; // stamped by the caller with the interval being calibrated
    v.route = std::move(route);
    v.origin_region = start_region;
    v.regional_route = std::move(regional);
    model.vehicles.push_back(std::move(v));
    return model.vehicles.back();
}

void schedule_starting_times(TrafficModel& model, const RegionGrid& grid, RegionIndex region,
                             const TimeInterval& interval, std::int64_t perturb_max, Rng& rng) {
    std::vector<std::size_t> members;
    for (std::size_t v = 0; v < model.vehicles.size(); ++v) {
        const auto& veh = model.vehicles[v];
        if (grid.region_of_edge(veh.route.front()) == region && interval.contains(veh.depart))
            members.push_back(v);
    }
    if (members.empty()) return;

    const double spacing =
        static_cast<double>(interval.length()) / static_cast<double>(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        std::int64_t depart =
            interval.start + static_cast<std::int64_t>(std::floor(spacing * static_cast<double>(k)));
        if (perturb_max > 0) {
            const std::int64_t offset = rng.uniform_int(0, perturb_max);
            depart += rng.bernoulli(0.5) ? offset : -offset;
        }
        depart = std::clamp(depart, interval.start, interval.end - 1);
        model.vehicles[members[k]].depart = depart;
    }
}

std::pair<TrafficModel, CalibrationHistory> calibrate(const RoadNetwork& network,
                                                      const RegionGrid& grid,
                                                      const CountSeries& real,
                                                      const Schedule& schedule,
                                                      const std::vector<Sensor>& sensors,
                                                      const std::vector<SensorIndex>& active_train,
                                                      const CalibrationConfig& config) {
    if (auto diags = config.validate(); !diags.empty())
        throw ConfigError("invalid calibration config: " + diags.front());
    if (active_train.empty()) throw ValidationError("calibrate: empty train sensor set");
    validate_schedule(schedule);

    Rng rng(config.seed);
    SimulatorParams sim_params;
    sim_params.reroute_probability = config.p_reroute;

    TrafficModel model = init_random_model(network, schedule, config.gamma, rng);

    CalibrationHistory history;
    auto sim_t0 = std::chrono::steady_clock::now();
    SimulationResult sim = simulate(network, model, sensors, schedule, sim_params, rng.next_u64());
    double sim_seconds = seconds_since(sim_t0);
    double obj = objective(real, sim, grid, sensors, active_train, schedule);
    history.initial = {0, obj, model.size(), 0.0, sim_seconds};

    TrafficModel best_model = model;
    double best_objective = obj;
    int no_improvement = 0;

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        const auto calib_t0 = std::chrono::steady_clock::now();
        std::vector<RegionError> iter_errors;

        for (std::int32_t i = 0; i < static_cast<std::int32_t>(schedule.size()); ++i) {
            const TimeInterval& interval = schedule[static_cast<std::size_t>(i)];
            const auto errors =
                compute_region_errors(real, sim, grid, sensors, active_train, i, config.q);
            const auto diffs = sensor_edge_diffs(real, sim, grid, sensors, active_train, i);
            const auto weights = observed_weights(network, i, sim);

            for (const auto& err : errors) {
                if (err.epsilon < 0 && err.adjust > 0) {
                    remove_vehicles(model, grid, err.region, interval, err.adjust, sim,
                                    config.p_remove_transit, rng);
                } else if (err.epsilon > 0 && err.adjust > 0) {
                    for (std::int64_t v = 0; v < err.adjust; ++v) {
                        Vehicle& fresh =
                            add_vehicle(network, grid, model, err.region, weights, config.m,
                                        errors, diffs, config.epsilon_greedy, rng);
                        fresh.depart = interval.start;
                    }
                }
                schedule_starting_times(model, grid, err.region, interval, config.perturb_max_s,
                                        rng);
            }
            iter_errors.insert(iter_errors.end(), errors.begin(), errors.end());
        }
        const double calib_seconds = seconds_since(calib_t0);

        sim_t0 = std::chrono::steady_clock::now();
        sim = simulate(network, model, sensors, schedule, sim_params, rng.next_u64());
        sim_seconds = seconds_since(sim_t0);
        obj = objective(real, sim, grid, sensors, active_train, schedule);

        history.iterations.push_back({iter, obj, model.size(), calib_seconds, sim_seconds});
        history.region_errors.push_back(std::move(iter_errors));

        if (obj < best_objective) {
            best_objective = obj;
            best_model = model;
            no_improvement = 0;
        } else if (++no_improvement >= config.patience) {
            break;
        }
    }
    return {std::move(best_model), std::move(history)};
}

} // namespace trafcal
