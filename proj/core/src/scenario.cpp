#include "trafcal/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "trafcal/rng.hpp"

namespace trafcal {

namespace {

std::string pad2(int v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", v);
    return buf;
}

} // namespace

std::vector<std::string> ScenarioSpec::validate() const {
    std::vector<std::string> diags;
    if (rows < 1 || cols < 1) diags.push_back("rows/cols: must be >= 1");
    if (!(block_length_m > 0)) diags.push_back("block_length_m: must be positive");
    if (!(max_speed_mps > 0)) diags.push_back("max_speed_mps: must be positive");
    if (lanes < 1) diags.push_back("lanes: must be >= 1");
    if (!(cell_size_m > 0)) diags.push_back("cell_size_m: must be positive");
    if (sensor_count < 1) diags.push_back("sensor_count: must be >= 1");
    if (horizon_s < 1 || interval_s < 1) diags.push_back("horizon_s/interval_s: must be positive");
    if (interval_s > 0 && horizon_s % interval_s != 0)
        diags.push_back("interval_s: must divide horizon_s");
    const int n_edges = 2 * ((rows + 1) * cols + (cols + 1) * rows);
    if (sensor_count > n_edges) diags.push_back("sensor_count: exceeds number of edges");
    for (const auto& [interval, expected] : demand) {
        if (interval < 0 || interval >= interval_count())
            diags.push_back("demand: interval index " + std::to_string(interval) + " out of range");
        if (expected < 0) diags.push_back("demand: expected departures must be >= 0");
    }
    return diags;
}

ScenarioBundle generate_scenario(const ScenarioSpec& spec) {
    if (auto diags = spec.validate(); !diags.empty())
        throw ConfigError("invalid scenario spec: " + diags.front());

    // Manhattan grid: (rows+1) x (cols+1) junctions, streets in both directions
    std::vector<Junction> junctions;
    for (int r = 0; r <= spec.rows; ++r)
        for (int c = 0; c <= spec.cols; ++c)
            junctions.push_back({"j" + pad2(r) + "_" + pad2(c),
                                 {c * spec.block_length_m, r * spec.block_length_m}});

    auto junction_name = [&](int r, int c) { return "j" + pad2(r) + "_" + pad2(c); };
    std::unordered_map<std::string, JunctionIndex> slot;
    for (std::size_t i = 0; i < junctions.size(); ++i)
        slot.emplace(junctions[i].id, static_cast<JunctionIndex>(i));

    std::vector<Edge> edges;
    auto add_street = [&](int r0, int c0, int r1, int c1) {
        const auto a = slot.at(junction_name(r0, c0));
        const auto b = slot.at(junction_name(r1, c1));
        const std::string base =
            pad2(r0) + std::string("_") + pad2(c0) + "_" + pad2(r1) + "_" + pad2(c1);
        edges.push_back({"e" + base + "_f", a, b, spec.block_length_m, spec.max_speed_mps,
                         spec.lanes, {}});
        edges.push_back({"e" + base + "_r", b, a, spec.block_length_m, spec.max_speed_mps,
                         spec.lanes, {}});
    };
    for (int r = 0; r <= spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) add_street(r, c, r, c + 1);
    for (int c = 0; c <= spec.cols; ++c)
        for (int r = 0; r < spec.rows; ++r) add_street(r, c, r + 1, c);

    ScenarioBundle bundle;
    bundle.network = RoadNetwork::build(std::move(junctions), std::move(edges));
    bundle.grid = partition_grid(bundle.network, spec.cell_size_m);
    bundle.schedule = make_uniform_schedule(0, spec.interval_s, spec.interval_count());

    Rng rng(Rng::derive_seed(spec.seed, 0x7363656e));

    // sensor placement: sample shortest paths under uniform weights and put
    // sensors on the most-visited edges
    const auto n_edges = bundle.network.edge_count();
    std::vector<std::int64_t> visits(static_cast<std::size_t>(n_edges), 0);
    const std::vector<double> uniform(static_cast<std::size_t>(n_edges), 1.0);
    const int samples = std::max(512, 16 * n_edges);
    for (int i = 0; i < samples; ++i) {
        const auto o = static_cast<EdgeIndex>(rng.uniform_int(0, n_edges - 1));
        const auto d = static_cast<EdgeIndex>(rng.uniform_int(0, n_edges - 1));
        try {
            for (EdgeIndex e : shortest_route(bundle.network, o, d, uniform).edges)
                ++visits[static_cast<std::size_t>(e)];
        } catch (const NoPathError&) {
        }
    }
    std::vector<EdgeIndex> by_betweenness(static_cast<std::size_t>(n_edges));
    for (EdgeIndex e = 0; e < n_edges; ++e) by_betweenness[static_cast<std::size_t>(e)] = e;
    std::sort(by_betweenness.begin(), by_betweenness.end(), [&](EdgeIndex a, EdgeIndex b) {
        if (visits[static_cast<std::size_t>(a)] != visits[static_cast<std::size_t>(b)])
            return visits[static_cast<std::size_t>(a)] > visits[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::vector<Sensor> sensors;
    for (int s = 0; s < spec.sensor_count; ++s)
        sensors.push_back({"s" + pad2(s), by_betweenness[static_cast<std::size_t>(s)]});
    bundle.sensors = canonical_sensors(std::move(sensors), bundle.network);

    // ground truth: random OD trips following the demand profile
    const std::vector<double> ff = free_flow_weights(bundle.network);
    for (const auto& [interval, expected] : spec.demand) {
        const TimeInterval window = bundle.schedule[static_cast<std::size_t>(interval)];
        const auto n = static_cast<std::int64_t>(std::llround(expected));
        for (std::int64_t k = 0; k < n; ++k) {
            Route route;
            bool found = false;
            for (int attempt = 0; attempt < 32 && !found; ++attempt) {
                const auto o = static_cast<EdgeIndex>(rng.uniform_int(0, n_edges - 1));
                const auto d = static_cast<EdgeIndex>(rng.uniform_int(0, n_edges - 1));
                try {
                    route = shortest_route(bundle.network, o, d, ff);
                    found = true;
                } catch (const NoPathError&) {
                }
            }
            if (!found) continue;
            Vehicle v;
            v.id = bundle.truth.fresh_id();
            v.depart = rng.uniform_int(window.start, window.end - 1);
            v.route = std::move(route);
            bundle.truth.vehicles.push_back(std::move(v));
        }
    }

    SimulatorParams params; // ground truth runs without rerouting
    bundle.real_counts =
        simulate(bundle.network, bundle.truth, bundle.sensors, bundle.schedule, params,
                 Rng::derive_seed(spec.seed, 0x74727574))
            .counts;
    return bundle;
}

void save_counts(const CountSeries& counts, const std::vector<Sensor>& sensors,
                 const RoadNetwork& network, const Schedule& schedule, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw Error("cannot write counts file '" + path + "'");
    file << "sensor_id,edge_id,interval_start_s,count\n";
    for (std::size_t s = 0; s < sensors.size(); ++s)
        for (std::size_t i = 0; i < schedule.size(); ++i)
            file << sensors[s].id << ',' << network.edge(sensors[s].edge).id << ','
                 << schedule[i].start << ','
                 << counts.at(static_cast<SensorIndex>(s), static_cast<std::int32_t>(i)) << '\n';
}

LoadedCounts load_counts(const std::string& path, const RoadNetwork& network) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open counts file '" + path + "'");

    std::string line;
    if (!std::getline(file, line) || line != "sensor_id,edge_id,interval_start_s,count")
        throw ParseError("counts file '" + path + "' missing the expected header");

    struct Cell {
        std::string sensor_id, edge_id;
        std::int64_t start, count;
    };
    std::vector<Cell> cells;
    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream stream(line);
        Cell cell;
        std::string start_s, count_s;
        if (!std::getline(stream, cell.sensor_id, ',') || !std::getline(stream, cell.edge_id, ',') ||
            !std::getline(stream, start_s, ',') || !std::getline(stream, count_s))
            throw ParseError("malformed counts row at " + path + ":" + std::to_string(line_no));
        try {
            cell.start = std::stoll(start_s);
            cell.count = std::stoll(count_s);
        } catch (const std::exception&) {
            throw ParseError("bad number in counts row at " + path + ":" + std::to_string(line_no));
        }
        if (cell.count < 0)
            throw ValidationError("negative count at " + path + ":" + std::to_string(line_no));
        cells.push_back(std::move(cell));
    }
    if (cells.empty()) throw ParseError("counts file '" + path + "' has no data rows");

    // interval schedule: uniform spacing inferred from the distinct starts
    std::vector<std::int64_t> starts;
    for (const auto& c : cells) starts.push_back(c.start);
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
    std::int64_t length = 0;
    if (starts.size() == 1) {
        throw ParseError("counts file '" + path + "' needs at least two intervals");
    }
    length = starts[1] - starts[0];
    if (length <= 0) throw ParseError("non-increasing interval starts in '" + path + "'");
    for (std::size_t i = 1; i < starts.size(); ++i)
        if (starts[i] - starts[i - 1] != length)
            throw ValidationError("non-contiguous intervals in '" + path + "' near start " +
                                  std::to_string(starts[i]));
    Schedule schedule = make_uniform_schedule(starts.front(), length,
                                              static_cast<int>(starts.size()));

    // sensor set
    std::map<std::string, std::string> sensor_edges;
    for (const auto& c : cells) {
        auto [it, inserted] = sensor_edges.emplace(c.sensor_id, c.edge_id);
        if (!inserted && it->second != c.edge_id)
            throw ValidationError("sensor '" + c.sensor_id + "' maps to multiple edges");
    }
    std::vector<Sensor> sensors;
    for (const auto& [sensor_id, edge_id] : sensor_edges)
        sensors.push_back({sensor_id, network.edge_index(edge_id)});
    sensors = canonical_sensors(std::move(sensors), network);

    std::unordered_map<std::string, SensorIndex> sensor_slot;
    for (std::size_t s = 0; s < sensors.size(); ++s)
        sensor_slot.emplace(sensors[s].id, static_cast<SensorIndex>(s));
    std::unordered_map<std::int64_t, std::int32_t> interval_slot;
    for (std::size_t i = 0; i < schedule.size(); ++i)
        interval_slot.emplace(schedule[i].start, static_cast<std::int32_t>(i));

    CountSeries counts(static_cast<std::int32_t>(sensors.size()),
                       static_cast<std::int32_t>(schedule.size()));
    std::vector<char> seen(sensors.size() * schedule.size(), 0);
    for (const auto& c : cells) {
        const SensorIndex s = sensor_slot.at(c.sensor_id);
        const std::int32_t i = interval_slot.at(c.start);
        const auto flat = static_cast<std::size_t>(s) * schedule.size() + static_cast<std::size_t>(i);
        if (seen[flat])
            throw ValidationError("duplicate cell for sensor '" + c.sensor_id + "' at start " +
                                  std::to_string(c.start));
        seen[flat] = 1;
        counts.at(s, i) = c.count;
    }
    for (std::size_t s = 0; s < sensors.size(); ++s)
        for (std::size_t i = 0; i < schedule.size(); ++i)
            if (!seen[s * schedule.size() + i])
                throw ValidationError("missing cell for sensor '" + sensors[s].id +
                                      "' at interval start " +
                                      std::to_string(schedule[i].start));

    return {std::move(sensors), std::move(schedule), std::move(counts)};
}

ScenarioSpec parse_scenario_spec(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open scenario spec '" + path + "'");
    ScenarioSpec spec;
    spec.demand.clear();
    std::string line;
    std::size_t line_no = 0;
    bool demand_given = false;
    while (std::getline(file, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value' at " + path + ":" + std::to_string(line_no));
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "rows") spec.rows = std::stoi(value);
            else if (key == "cols") spec.cols = std::stoi(value);
            else if (key == "block_length_m") spec.block_length_m = std::stod(value);
            else if (key == "max_speed_mps") spec.max_speed_mps = std::stod(value);
            else if (key == "lanes") spec.lanes = std::stoi(value);
            else if (key == "cell_size_m") spec.cell_size_m = std::stod(value);
            else if (key == "sensors") spec.sensor_count = std::stoi(value);
            else if (key == "horizon_s") spec.horizon_s = std::stoll(value);
            else if (key == "interval_s") spec.interval_s = std::stoll(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "demand") {
                // whitespace-separated expected departures, one per interval index
                demand_given = true;
                std::istringstream stream(value);
                double expected;
                int index = 0;
                while (stream >> expected) spec.demand.push_back({index++, expected});
            } else {
                throw ParseError("unknown scenario key '" + key + "' at " + path + ":" +
                                 std::to_string(line_no));
            }
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("bad value for '" + key + "' at " + path + ":" +
                             std::to_string(line_no));
        }
    }
    if (!demand_given)
        throw ParseError("scenario spec '" + path + "' is missing the demand profile");
    return spec;
}

void save_scenario_spec(const ScenarioSpec& spec, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw Error("cannot write scenario spec '" + path + "'");
    file << "rows = " << spec.rows << '\n';
    file << "cols = " << spec.cols << '\n';
    file << "block_length_m = " << format_double(spec.block_length_m) << '\n';
    file << "max_speed_mps = " << format_double(spec.max_speed_mps) << '\n';
    file << "lanes = " << spec.lanes << '\n';
    file << "cell_size_m = " << format_double(spec.cell_size_m) << '\n';
    file << "sensors = " << spec.sensor_count << '\n';
    file << "horizon_s = " << spec.horizon_s << '\n';
    file << "interval_s = " << spec.interval_s << '\n';
    file << "seed = " << spec.seed << '\n';
    std::vector<double> profile(static_cast<std::size_t>(spec.interval_count()), 0.0);
    for (const auto& [interval, expected] : spec.demand)
        profile[static_cast<std::size_t>(interval)] = expected;
    file << "demand =";
    for (double v : profile) file << ' ' << format_double(v);
    file << '\n';
}

void write_bundle(const ScenarioBundle& bundle, const ScenarioSpec& spec,
                  const std::string& directory) {
    std::filesystem::create_directories(directory);
    const std::filesystem::path dir(directory);
    save_network(bundle.network, (dir / "network.txt").string());
    save_counts(bundle.real_counts, bundle.sensors, bundle.network, bundle.schedule,
                (dir / "counts.csv").string());
    {
        std::ofstream file(dir / "sensors.csv");
        if (!file) throw Error("cannot write sensors.csv");
        file << "sensor_id,edge_id\n";
        for (const auto& s : bundle.sensors)
            file << s.id << ',' << bundle.network.edge(s.edge).id << '\n';
    }
    save_model(bundle.truth, bundle.network, (dir / "truth_model.txt").string());
    save_regions(bundle.grid, bundle.network, (dir / "regions.txt").string());
    save_scenario_spec(spec, (dir / "scenario.cfg").string());
}

} // namespace trafcal
