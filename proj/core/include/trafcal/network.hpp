#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trafcal/common.hpp"

namespace trafcal {

using EdgeIndex = std::int32_t;
using JunctionIndex = std::int32_t;

struct Point {
    double x = 0;
    double y = 0;
    bool operator==(const Point&) const = default;
};

struct Junction {
    std::string id;
    Point position;
};

struct Edge {
    std::string id;
    JunctionIndex from = -1;
    JunctionIndex to = -1;
    double length_m = 0;
    double max_speed_mps = 0;
    int lanes = 1;
    std::vector<Point> geometry; // polyline, at least the two endpoints
};

/// Ordered sequence of connected edges; stored as dense edge indices
/// scoped to the RoadNetwork that produced it.
struct Route {
    std::vector<EdgeIndex> edges;

    bool empty() const { return edges.empty(); }
    std::size_t size() const { return edges.size(); }
    EdgeIndex front() const { return edges.front(); }
    EdgeIndex back() const { return edges.back(); }
    bool operator==(const Route&) const = default;
};

// Immutable directed road graph. Junctions and edges are kept sorted by id,
// so dense indices follow lexicographic id order and index-based tie-breaking
// matches id-based tie-breaking everywhere.
class RoadNetwork {
public:
    RoadNetwork() = default;

    /// Validates references and invariants, sorts by id, builds the successor map.
    static RoadNetwork build(std::vector<Junction> junctions, std::vector<Edge> edges);

    std::int32_t junction_count() const { return static_cast<std::int32_t>(junctions_.size()); }
    std::int32_t edge_count() const { return static_cast<std::int32_t>(edges_.size()); }

    const Junction& junction(JunctionIndex i) const { return junctions_[static_cast<std::size_t>(i)]; }
    const Edge& edge(EdgeIndex i) const { return edges_[static_cast<std::size_t>(i)]; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Junction>& junctions() const { return junctions_; }

    std::optional<EdgeIndex> find_edge(const std::string& id) const;
    std::optional<JunctionIndex> find_junction(const std::string& id) const;

    /// Throws ValidationError when the id is unknown.
    EdgeIndex edge_index(const std::string& id) const;

    /// Edges reachable through the downstream junction, ascending index order.
    std::span<const EdgeIndex> successors(EdgeIndex e) const {
        return successors_[static_cast<std::size_t>(e)];
    }

    bool route_is_connected(const Route& route) const;

    /// Axis-aligned bounding box over all junction positions and edge geometry.
    void bounding_box(Point& min_corner, Point& max_corner) const;

private:
    std::vector<Junction> junctions_;
    std::vector<Edge> edges_;
    std::vector<std::vector<EdgeIndex>> successors_;
    std::unordered_map<std::string, JunctionIndex> junction_by_id_;
    std::unordered_map<std::string, EdgeIndex> edge_by_id_;
};

// Plain-text network format, one record per line, '#' comments:
//   NETWORK v1
//   J <id> <x> <y>
//   E <id> <from> <to> <length_m> <maxspeed_mps> <lanes>
//   G <edge_id> <x1> <y1> <x2> <y2> ...
RoadNetwork load_network(const std::string& path);
void save_network(const RoadNetwork& network, const std::string& path);

/// Uncongested traversal time l(e)/s_max(e) in seconds.
inline double free_flow_weight(const Edge& e) { return e.length_m / e.max_speed_mps; }

inline double free_flow_weight(const RoadNetwork& net, EdgeIndex e) {
    return free_flow_weight(net.edge(e));
}

/// One weight per edge, aligned with dense edge indices.
std::vector<double> free_flow_weights(const RoadNetwork& net);

/// Minimum-total-weight route from origin to destination, both edges included
/// in the cost. Ties broken toward lexicographically smaller edge ids.
/// Throws NoPathError when the destination is unreachable.
Route shortest_route(const RoadNetwork& net, EdgeIndex origin, EdgeIndex destination,
                     std::span<const double> edge_weights);

Route shortest_route(const RoadNetwork& net, EdgeIndex origin, EdgeIndex destination,
                     const std::function<double(EdgeIndex)>& weight);

double route_weight(const Route& route, std::span<const double> edge_weights);

} // namespace trafcal
