#include "trafcal/network.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

namespace trafcal {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream stream(line);
    std::string token;
    while (stream >> token) {
        if (token.front() == '#') break; // trailing comment
        out.push_back(token);
    }
    return out;
}

double parse_double(const std::string& token, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(token, &pos);
        if (pos != token.size()) throw ParseError("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad numeric value '" + token + "' in " + context);
    }
}

int parse_int(const std::string& token, const std::string& context) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(token, &pos);
        if (pos != token.size()) throw ParseError("trailing characters");
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ParseError("bad integer value '" + token + "' in " + context);
    }
}

} // namespace

RoadNetwork RoadNetwork::build(std::vector<Junction> junctions, std::vector<Edge> edges) {
    RoadNetwork net;
    std::sort(junctions.begin(), junctions.end(),
              [](const Junction& a, const Junction& b) { return a.id < b.id; });
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.id < b.id; });

    net.junctions_ = std::move(junctions);
    net.edges_ = std::move(edges);

    for (std::size_t i = 0; i < net.junctions_.size(); ++i) {
        const auto& j = net.junctions_[i];
        if (!net.junction_by_id_.emplace(j.id, static_cast<JunctionIndex>(i)).second)
            throw ValidationError("duplicate junction id '" + j.id + "'");
    }
    for (std::size_t i = 0; i < net.edges_.size(); ++i) {
        Edge& e = net.edges_[i];
        if (!net.edge_by_id_.emplace(e.id, static_cast<EdgeIndex>(i)).second)
            throw ValidationError("duplicate edge id '" + e.id + "'");
        if (e.from < 0 || e.from >= net.junction_count() || e.to < 0 || e.to >= net.junction_count())
            throw ValidationError("edge '" + e.id + "' references an unknown junction");
        if (e.from == e.to) throw ValidationError("edge '" + e.id + "' is a self-loop");
        if (!(e.length_m > 0)) throw ValidationError("edge '" + e.id + "' has non-positive length");
        if (!(e.max_speed_mps > 0))
            throw ValidationError("edge '" + e.id + "' has non-positive max speed");
        if (e.lanes < 1) throw ValidationError("edge '" + e.id + "' has lanes < 1");
        if (e.geometry.empty()) {
            e.geometry = {net.junctions_[static_cast<std::size_t>(e.from)].position,
                          net.junctions_[static_cast<std::size_t>(e.to)].position};
        } else if (e.geometry.size() < 2) {
            throw ValidationError("edge '" + e.id + "' geometry needs at least two points");
        }
    }

    // e2 succeeds e1 iff e1.to == e2.from
    std::vector<std::vector<EdgeIndex>> out_of_junction(net.junctions_.size());
    for (std::size_t i = 0; i < net.edges_.size(); ++i)
        out_of_junction[static_cast<std::size_t>(net.edges_[i].from)].push_back(
            static_cast<EdgeIndex>(i));
    net.successors_.resize(net.edges_.size());
    for (std::size_t i = 0; i < net.edges_.size(); ++i) {
        net.successors_[i] = out_of_junction[static_cast<std::size_t>(net.edges_[i].to)];
        std::sort(net.successors_[i].begin(), net.successors_[i].end());
    }
    return net;
}

std::optional<EdgeIndex> RoadNetwork::find_edge(const std::string& id) const {
    auto it = edge_by_id_.find(id);
    if (it == edge_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<JunctionIndex> RoadNetwork::find_junction(const std::string& id) const {
    auto it = junction_by_id_.find(id);
    if (it == junction_by_id_.end()) return std::nullopt;
    return it->second;
}

EdgeIndex RoadNetwork::edge_index(const std::string& id) const {
    auto found = find_edge(id);
    if (!found) throw ValidationError("unknown edge id '" + id + "'");
    return *found;
}

bool RoadNetwork::route_is_connected(const Route& route) const {
    if (route.empty()) return false;
    for (std::size_t i = 0; i + 1 < route.edges.size(); ++i) {
        const auto succ = successors(route.edges[i]);
        if (!std::binary_search(succ.begin(), succ.end(), route.edges[i + 1])) return false;
    }
    return true;
}

void RoadNetwork::bounding_box(Point& min_corner, Point& max_corner) const {
    min_corner = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    max_corner = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    auto absorb = [&](const Point& p) {
        min_corner.x = std::min(min_corner.x, p.x);
        min_corner.y = std::min(min_corner.y, p.y);
        max_corner.x = std::max(max_corner.x, p.x);
        max_corner.y = std::max(max_corner.y, p.y);
    };
    for (const auto& j : junctions_) absorb(j.position);
    for (const auto& e : edges_)
        for (const auto& p : e.geometry) absorb(p);
}

RoadNetwork load_network(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open network file '" + path + "'");

    std::string line;
    bool header_seen = false;
    std::vector<Junction> junctions;
    struct RawEdge {
        std::string id, from, to;
        double length, speed;
        int lanes;
        std::vector<Point> geometry;
    };
    std::vector<RawEdge> raw_edges;
    std::unordered_map<std::string, std::size_t> edge_slot;

    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        if (!header_seen) {
            if (tokens.size() != 2 || tokens[0] != "NETWORK" || tokens[1] != "v1")
                throw ParseError("missing 'NETWORK v1' header in " + where);
            header_seen = true;
            continue;
        }
        if (tokens[0] == "J") {
            if (tokens.size() != 4) throw ParseError("junction line needs 'J <id> <x> <y>' at " + where);
            junctions.push_back(
                {tokens[1], {parse_double(tokens[2], where), parse_double(tokens[3], where)}});
        } else if (tokens[0] == "E") {
            if (tokens.size() != 7)
                throw ParseError("edge line needs 'E <id> <from> <to> <len> <speed> <lanes>' at " + where);
            RawEdge e{tokens[1], tokens[2], tokens[3], parse_double(tokens[4], where),
                      parse_double(tokens[5], where), parse_int(tokens[6], where), {}};
            edge_slot[e.id] = raw_edges.size();
            raw_edges.push_back(std::move(e));
        } else if (tokens[0] == "G") {
            if (tokens.size() < 6 || tokens.size() % 2 != 0)
                throw ParseError("geometry line needs an edge id and >= 2 coordinate pairs at " + where);
            auto it = edge_slot.find(tokens[1]);
            if (it == edge_slot.end())
                throw ParseError("geometry for unknown edge '" + tokens[1] + "' at " + where);
            std::vector<Point> pts;
            for (std::size_t i = 2; i < tokens.size(); i += 2)
                pts.push_back({parse_double(tokens[i], where), parse_double(tokens[i + 1], where)});
            raw_edges[it->second].geometry = std::move(pts);
        } else {
            throw ParseError("unknown record '" + tokens[0] + "' at " + where);
        }
    }
    if (!header_seen) throw ParseError("empty network file '" + path + "'");

    std::unordered_map<std::string, JunctionIndex> junction_slot;
    for (std::size_t i = 0; i < junctions.size(); ++i)
        junction_slot.emplace(junctions[i].id, static_cast<JunctionIndex>(i));

    std::vector<Edge> edges;
    edges.reserve(raw_edges.size());
    for (auto& raw : raw_edges) {
        auto from = junction_slot.find(raw.from);
        auto to = junction_slot.find(raw.to);
        if (from == junction_slot.end())
            throw ValidationError("edge '" + raw.id + "' references unknown junction '" + raw.from + "'");
        if (to == junction_slot.end())
            throw ValidationError("edge '" + raw.id + "' references unknown junction '" + raw.to + "'");
        edges.push_back({raw.id, from->second, to->second, raw.length, raw.speed, raw.lanes,
                         std::move(raw.geometry)});
    }
    return RoadNetwork::build(std::move(junctions), std::move(edges));
}

void save_network(const RoadNetwork& network, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw Error("cannot write network file '" + path + "'");
    file << "NETWORK v1\n";
    for (const auto& j : network.junctions())
        file << "J " << j.id << ' ' << format_double(j.position.x) << ' '
             << format_double(j.position.y) << '\n';
    for (const auto& e : network.edges()) {
        file << "E " << e.id << ' ' << network.junction(e.from).id << ' '
             << network.junction(e.to).id << ' ' << format_double(e.length_m) << ' '
             << format_double(e.max_speed_mps) << ' ' << e.lanes << '\n';
    }
    for (const auto& e : network.edges()) {
        const std::vector<Point> endpoints = {network.junction(e.from).position,
                                              network.junction(e.to).position};
        if (e.geometry == endpoints) continue;
        file << "G " << e.id;
        for (const auto& p : e.geometry)
            file << ' ' << format_double(p.x) << ' ' << format_double(p.y);
        file << '\n';
    }
}

std::vector<double> free_flow_weights(const RoadNetwork& net) {
    std::vector<double> w(static_cast<std::size_t>(net.edge_count()));
    for (EdgeIndex e = 0; e < net.edge_count(); ++e)
        w[static_cast<std::size_t>(e)] = free_flow_weight(net, e);
    return w;
}

Route shortest_route(const RoadNetwork& net, EdgeIndex origin, EdgeIndex destination,
                     std::span<const double> edge_weights) {
    const auto n = static_cast<std::size_t>(net.edge_count());
    if (origin < 0 || static_cast<std::size_t>(origin) >= n || destination < 0 ||
        static_cast<std::size_t>(destination) >= n)
        throw ValidationError("shortest_route: edge index out of range");

    if (origin == destination) return Route{{origin}};

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, kInf);
    std::vector<EdgeIndex> parent(n, -1);
    std::vector<char> settled(n, 0);

    using Item = std::pair<double, EdgeIndex>; // (distance, edge); index order == id order
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;

    dist[static_cast<std::size_t>(origin)] = edge_weights[static_cast<std::size_t>(origin)];
    heap.push({dist[static_cast<std::size_t>(origin)], origin});

    while (!heap.empty()) {
        const auto [d, e] = heap.top();
        heap.pop();
        if (settled[static_cast<std::size_t>(e)]) continue;
        settled[static_cast<std::size_t>(e)] = 1;
        if (e == destination) break;
        for (EdgeIndex next : net.successors(e)) {
            const double nd = d + edge_weights[static_cast<std::size_t>(next)];
            if (nd < dist[static_cast<std::size_t>(next)]) {
                dist[static_cast<std::size_t>(next)] = nd;
                parent[static_cast<std::size_t>(next)] = e;
                heap.push({nd, next});
            }
        }
    }

    if (!settled[static_cast<std::size_t>(destination)])
        throw NoPathError("no route from edge '" + net.edge(origin).id + "' to edge '" +
                          net.edge(destination).id + "'");

    Route route;
    for (EdgeIndex e = destination; e != -1; e = parent[static_cast<std::size_t>(e)])
        route.edges.push_back(e);
    std::reverse(route.edges.begin(), route.edges.end());
    return route;
}

Route shortest_route(const RoadNetwork& net, EdgeIndex origin, EdgeIndex destination,
                     const std::function<double(EdgeIndex)>& weight) {
    std::vector<double> w(static_cast<std::size_t>(net.edge_count()));
    for (EdgeIndex e = 0; e < net.edge_count(); ++e) w[static_cast<std::size_t>(e)] = weight(e);
    return shortest_route(net, origin, destination, w);
}

double route_weight(const Route& route, std::span<const double> edge_weights) {
    double total = 0;
    for (EdgeIndex e : route.edges) total += edge_weights[static_cast<std::size_t>(e)];
    return total;
}

} // namespace trafcal
