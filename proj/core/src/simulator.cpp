#include "trafcal/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "trafcal/rng.hpp"

namespace trafcal {

namespace {

constexpr double kExitEps = 1e-9;

struct VehicleRt {
    std::vector<EdgeIndex> path; // current plan, path[pos] is the edge being traversed
    std::size_t pos = 0;
    std::int64_t entered = 0;
    double earliest_exit = 0;
    bool reroute_drawn = false;
};

struct EdgeRt {
    std::deque<std::int32_t> queue; // vehicle runtime indices, FIFO
    double rate = 0;                // outflow vehicles per second
    double cap = 1;                 // accumulated budget never exceeds max(1, rate)
    double budget = 0;
    std::int64_t budget_tick = 0;
    std::int32_t storage = 1;
    double jam_limit = 0;

    // trailing travel-time samples (exit tick, duration) for reroute weights
    std::deque<std::pair<std::int64_t, double>> window;
    double window_sum = 0;
};

} // namespace

std::vector<Sensor> canonical_sensors(std::vector<Sensor> sensors, const RoadNetwork& network) {
    std::sort(sensors.begin(), sensors.end(),
              [](const Sensor& a, const Sensor& b) { return a.id < b.id; });
    std::unordered_set<std::string> ids;
    std::vector<char> edge_used(static_cast<std::size_t>(network.edge_count()), 0);
    for (const auto& s : sensors) {
        if (!ids.insert(s.id).second) throw ValidationError("duplicate sensor id '" + s.id + "'");
        if (s.edge < 0 || s.edge >= network.edge_count())
            throw ValidationError("sensor '" + s.id + "' references an unknown edge");
        if (edge_used[static_cast<std::size_t>(s.edge)])
            throw ValidationError("multiple sensors on edge '" + network.edge(s.edge).id + "'");
        edge_used[static_cast<std::size_t>(s.edge)] = 1;
    }
    return sensors;
}

std::vector<SensorIndex> sensors_in_region(const RegionGrid& grid,
                                           const std::vector<Sensor>& sensors,
                                           const std::vector<SensorIndex>& active,
                                           RegionIndex region) {
    std::vector<SensorIndex> out;
    for (SensorIndex s : active)
        if (grid.region_of_edge(sensors[static_cast<std::size_t>(s)].edge) == region)
            out.push_back(s);
    return out;
}

double region_average_real(const CountSeries& counts, const RegionGrid& grid,
                           const std::vector<Sensor>& sensors,
                           const std::vector<SensorIndex>& active, RegionIndex region,
                           std::int32_t interval) {
    if (interval < 0 || interval >= counts.interval_count())
        throw ValidationError("region_average_real: interval out of range");
    const auto in_region = sensors_in_region(grid, sensors, active, region);
    if (in_region.empty())
        throw NoSensorError("region '" + grid.region(region).id + "' has no active sensor");
    double sum = 0;
    for (SensorIndex s : in_region) sum += static_cast<double>(counts.at(s, interval));
    return sum / static_cast<double>(in_region.size());
}

double region_average_simulated(const SimulationResult& result, const RegionGrid& grid,
                                const std::vector<Sensor>& sensors,
                                const std::vector<SensorIndex>& active, RegionIndex region,
                                std::int32_t interval) {
    if (interval < 0 || interval >= result.counts.interval_count())
        throw ValidationError("region_average_simulated: interval out of range");
    const auto in_region = sensors_in_region(grid, sensors, active, region);
    if (in_region.empty())
        throw NoSensorError("region '" + grid.region(region).id + "' has no active sensor");
    double sum = 0;
    for (SensorIndex s : in_region) sum += static_cast<double>(result.counts.at(s, interval));
    return sum / static_cast<double>(in_region.size());
}

double observed_weight(const RoadNetwork& network, EdgeIndex e, std::int32_t interval,
                       const SimulationResult& result) {
    if (interval < 0 || interval >= result.interval_count)
        throw ValidationError("observed_weight: interval out of range");
    if (auto mean = result.mean_travel_time(e, interval)) return *mean;
    return free_flow_weight(network, e);
}

std::vector<double> observed_weights(const RoadNetwork& network, std::int32_t interval,
                                     const SimulationResult& result) {
    std::vector<double> w(static_cast<std::size_t>(network.edge_count()));
    for (EdgeIndex e = 0; e < network.edge_count(); ++e)
        w[static_cast<std::size_t>(e)] = observed_weight(network, e, interval, result);
    return w;
}

SimulationResult simulate(const RoadNetwork& network, const TrafficModel& model,
                          const std::vector<Sensor>& sensors, const Schedule& schedule,
                          const SimulatorParams& params, std::uint64_t seed) {
    validate_schedule(schedule);
    const auto n_edges = static_cast<std::size_t>(network.edge_count());
    const auto n_vehicles = model.vehicles.size();
    const auto n_intervals = static_cast<std::int32_t>(schedule.size());
    const std::int64_t t_begin = schedule.front().start;
    const std::int64_t t_end = schedule.back().end;

    {
        std::unordered_set<std::string> ids;
        for (const auto& v : model.vehicles) {
            if (!ids.insert(v.id).second)
                throw ValidationError("duplicate vehicle id '" + v.id + "'");
            if (v.route.empty()) throw ValidationError("vehicle '" + v.id + "' has an empty route");
            for (EdgeIndex e : v.route.edges)
                if (e < 0 || static_cast<std::size_t>(e) >= n_edges)
                    throw ValidationError("vehicle '" + v.id + "' route references an unknown edge");
            if (!network.route_is_connected(v.route))
                throw ValidationError("vehicle '" + v.id + "' route is not connected");
            if (v.depart < t_begin || v.depart >= t_end)
                throw ValidationError("vehicle '" + v.id + "' departs outside the schedule");
        }
    }

    SimulationResult result;
    result.counts = CountSeries(static_cast<std::int32_t>(sensors.size()), n_intervals);
    result.interval_count = n_intervals;
    result.travel_time_sum.assign(n_edges * static_cast<std::size_t>(n_intervals), 0.0);
    result.travel_time_count.assign(n_edges * static_cast<std::size_t>(n_intervals), 0);
    result.vehicle_ids.reserve(n_vehicles);
    for (const auto& v : model.vehicles) result.vehicle_ids.push_back(v.id);
    result.traversals.assign(n_vehicles, {});

    std::vector<SensorIndex> sensor_on_edge(n_edges, -1);
    for (std::size_t s = 0; s < sensors.size(); ++s)
        sensor_on_edge[static_cast<std::size_t>(sensors[s].edge)] = static_cast<SensorIndex>(s);

    const std::vector<double> ff = free_flow_weights(network);

    std::vector<EdgeRt> edge_rt(n_edges);
    for (std::size_t e = 0; e < n_edges; ++e) {
        const Edge& edge = network.edge(static_cast<EdgeIndex>(e));
        auto& rt = edge_rt[e];
        rt.rate = edge.lanes * params.saturation_flow_vphpl / 3600.0;
        rt.cap = std::max(1.0, rt.rate);
        rt.budget_tick = t_begin;
        rt.storage = std::max<std::int32_t>(
            1, static_cast<std::int32_t>(std::floor(edge.length_m * edge.lanes /
                                                    params.vehicle_length_m)));
        rt.jam_limit = params.jam_occupancy * rt.storage;
    }

    std::vector<VehicleRt> veh_rt(n_vehicles);
    for (std::size_t v = 0; v < n_vehicles; ++v) veh_rt[v].path = model.vehicles[v].route.edges;

    // insertion order: (depart, model index)
    std::vector<std::int32_t> arrivals(n_vehicles);
    for (std::size_t v = 0; v < n_vehicles; ++v) arrivals[v] = static_cast<std::int32_t>(v);
    std::stable_sort(arrivals.begin(), arrivals.end(), [&](std::int32_t a, std::int32_t b) {
        return model.vehicles[static_cast<std::size_t>(a)].depart <
               model.vehicles[static_cast<std::size_t>(b)].depart;
    });
    std::size_t next_arrival = 0;
    std::deque<std::int32_t> waiting; // departed but not yet inserted, stable order

    Rng rng(seed);

    std::int32_t current_interval = 0;
    auto advance_interval = [&](std::int64_t t) {
        while (current_interval + 1 < n_intervals && t >= schedule[current_interval].end)
            ++current_interval;
    };

    // reroute weight vector, rebuilt at most once per tick
    std::vector<double> window_weights(n_edges);
    std::int64_t weights_tick = t_begin - 1;
    auto reroute_weights = [&](std::int64_t t) -> const std::vector<double>& {
        if (weights_tick != t) {
            weights_tick = t;
            for (std::size_t e = 0; e < n_edges; ++e) {
                auto& rt = edge_rt[e];
                while (!rt.window.empty() && rt.window.front().first <= t - params.reroute_window_s) {
                    rt.window_sum -= rt.window.front().second;
                    rt.window.pop_front();
                }
                window_weights[e] = rt.window.empty()
                                        ? ff[e]
                                        : rt.window_sum / static_cast<double>(rt.window.size());
            }
        }
        return window_weights;
    };

    auto enter_edge = [&](std::int32_t v, EdgeIndex e, std::int64_t t) {
        auto& rt = veh_rt[static_cast<std::size_t>(v)];
        rt.entered = t;
        rt.earliest_exit = static_cast<double>(t) + ff[static_cast<std::size_t>(e)];
        rt.reroute_drawn = false;
        edge_rt[static_cast<std::size_t>(e)].queue.push_back(v);
        result.traversals[static_cast<std::size_t>(v)].push_back({e, t});
        const SensorIndex s = sensor_on_edge[static_cast<std::size_t>(e)];
        if (s >= 0) ++result.counts.at(s, current_interval);
    };

    auto record_exit = [&](std::int32_t v, EdgeIndex e, std::int64_t t) {
        auto& rt = veh_rt[static_cast<std::size_t>(v)];
        const double duration = static_cast<double>(t - rt.entered);
        const auto idx = static_cast<std::size_t>(e) * static_cast<std::size_t>(n_intervals) +
                         static_cast<std::size_t>(current_interval);
        result.travel_time_sum[idx] += duration;
        ++result.travel_time_count[idx];
        auto& ert = edge_rt[static_cast<std::size_t>(e)];
        ert.window.push_back({t, duration});
        ert.window_sum += duration;
    };

    auto can_receive = [&](EdgeIndex e) {
        const auto& rt = edge_rt[static_cast<std::size_t>(e)];
        const auto occ = static_cast<double>(rt.queue.size());
        return occ < rt.storage && occ <= rt.jam_limit;
    };

    for (std::int64_t t = t_begin; t < t_end; ++t) {
        advance_interval(t);

        for (std::size_t e = 0; e < n_edges; ++e) {
            auto& ert = edge_rt[e];
            if (ert.queue.empty()) continue;
            ert.budget = std::min(ert.cap, ert.budget + ert.rate * static_cast<double>(t - ert.budget_tick));
            ert.budget_tick = t;

            while (!ert.queue.empty()) {
                const std::int32_t v = ert.queue.front();
                auto& vrt = veh_rt[static_cast<std::size_t>(v)];
                if (static_cast<double>(t) < vrt.earliest_exit - kExitEps) break;

                if (vrt.pos + 1 == vrt.path.size()) {
                    // destination reached; leaving the network consumes no outflow budget
                    record_exit(v, static_cast<EdgeIndex>(e), t);
                    ert.queue.pop_front();
                    ++result.completed;
                    continue;
                }

                if (params.reroute_probability > 0 && !vrt.reroute_drawn) {
                    vrt.reroute_drawn = true;
                    if (rng.bernoulli(params.reroute_probability)) {
                        // re-plan the remainder toward the original destination;
                        // the current remaining route is a witness that a path exists
                        const auto& w = reroute_weights(t);
                        Route fresh = shortest_route(network, static_cast<EdgeIndex>(e),
                                                     vrt.path.back(), w);
                        vrt.path = std::move(fresh.edges);
                        vrt.pos = 0;
                    }
                }

                if (ert.budget < 1.0) break;
                const EdgeIndex next = vrt.path[vrt.pos + 1];
                if (!can_receive(next)) break; // spillback: head blocks the queue

                ert.budget -= 1.0;
                record_exit(v, static_cast<EdgeIndex>(e), t);
                ert.queue.pop_front();
                ++vrt.pos;
                enter_edge(v, next, t);
            }
        }

        // departures: vehicles enter at their origin edge when storage allows,
        // retrying each tick within the retry window
        while (next_arrival < n_vehicles &&
               model.vehicles[static_cast<std::size_t>(arrivals[next_arrival])].depart <= t)
            waiting.push_back(arrivals[next_arrival++]);

        for (std::size_t i = 0; i < waiting.size();) {
            const std::int32_t v = waiting[i];
            const auto& veh = model.vehicles[static_cast<std::size_t>(v)];
            if (t - veh.depart > params.insertion_retry_s) {
                ++result.insertion_dropped;
                waiting.erase(waiting.begin() + static_cast<std::ptrdiff_t>(i));
                continue;
            }
            const EdgeIndex origin = veh_rt[static_cast<std::size_t>(v)].path.front();
            auto& ort = edge_rt[static_cast<std::size_t>(origin)];
            if (static_cast<std::int32_t>(ort.queue.size()) < ort.storage) {
                enter_edge(v, origin, t);
                ++result.inserted;
                waiting.erase(waiting.begin() + static_cast<std::ptrdiff_t>(i));
                continue;
            }
            ++i;
        }
    }

    for (const auto& ert : edge_rt) result.en_route_at_end += static_cast<std::int64_t>(ert.queue.size());
    result.insertion_pending = static_cast<std::int64_t>(waiting.size());
    return result;
}

void save_model(const TrafficModel& model, const RoadNetwork& network, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw Error("cannot write model file '" + path + "'");
    for (const auto& v : model.vehicles) {
        file << "V " << v.id << ' ' << v.depart;
        for (EdgeIndex e : v.route.edges) file << ' ' << network.edge(e).id;
        file << '\n';
    }
}

TrafficModel load_model(const std::string& path, const RoadNetwork& network) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open model file '" + path + "'");
    TrafficModel model;
    std::string line;
    std::size_t line_no = 0;
    std::uint64_t max_serial = 0;
    while (std::getline(file, line)) {
        ++line_no;
        std::istringstream stream(line);
        std::string tag;
        if (!(stream >> tag) || tag.front() == '#') continue;
        if (tag != "V")
            throw ParseError("unexpected record '" + tag + "' at " + path + ":" +
                             std::to_string(line_no));
        Vehicle v;
        std::int64_t depart;
        if (!(stream >> v.id >> depart))
            throw ParseError("malformed vehicle line at " + path + ":" + std::to_string(line_no));
        v.depart = depart;
        std::string edge_id;
        while (stream >> edge_id) v.route.edges.push_back(network.edge_index(edge_id));
        if (v.route.empty())
            throw ParseError("vehicle without a route at " + path + ":" + std::to_string(line_no));
        if (v.id.size() > 1 && v.id[0] == 'v') {
            // keep fresh_id() clear of ids already present in the file
            bool digits = true;
            for (std::size_t i = 1; i < v.id.size(); ++i) digits = digits && std::isdigit(v.id[i]);
            if (digits) max_serial = std::max(max_serial, std::stoull(v.id.substr(1)) + 1);
        }
        model.vehicles.push_back(std::move(v));
    }
    model.next_serial_ = std::max(model.next_serial_, max_serial);
    return model;
}

} // namespace trafcal
