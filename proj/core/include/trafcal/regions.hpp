#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trafcal/network.hpp"

namespace trafcal {

using RegionIndex = std::int32_t;

/// Axis-aligned square region owning a disjoint set of edges.
struct Region {
    std::string id;
    double min_x = 0;
    double min_y = 0;
    double side = 0;
    std::int32_t row = 0;
    std::int32_t col = 0;
    std::vector<EdgeIndex> edge_ids; // ascending
};

// Square-grid partition of a network. Cells are anchored at the bounding-box
// minimum corner; empty cells are dropped. Region ids are zero-padded
// "r<row>_<col>" so lexicographic id order equals row-major cell order.
class RegionGrid {
public:
    RegionGrid() = default;

    std::int32_t region_count() const { return static_cast<std::int32_t>(regions_.size()); }
    const Region& region(RegionIndex r) const { return regions_[static_cast<std::size_t>(r)]; }
    const std::vector<Region>& regions() const { return regions_; }
    double cell_size() const { return cell_size_; }

    /// Throws ValidationError when the id is unknown.
    RegionIndex region_index(const std::string& id) const;

    /// Region owning the edge; every edge belongs to exactly one region.
    RegionIndex region_of_edge(EdgeIndex e) const {
        return edge_region_[static_cast<std::size_t>(e)];
    }

    /// True iff the two cells touch (8-neighborhood). False for a == b.
    /// Throws ValidationError on an unknown region index.
    bool adjacent(RegionIndex a, RegionIndex b) const;

    /// Adjacent regions in ascending index (== id) order.
    std::span<const RegionIndex> neighbors(RegionIndex r) const {
        return neighbors_[static_cast<std::size_t>(r)];
    }

    friend RegionGrid partition_grid(const RoadNetwork& network, double cell_size);

private:
    std::vector<Region> regions_;
    std::vector<RegionIndex> edge_region_;
    std::vector<std::vector<RegionIndex>> neighbors_;
    double cell_size_ = 0;
};

/// Partitions the network bounding box into square cells of the given size and
/// assigns every edge to the first cell, in row-major order, whose square its
/// geometry intersects. Cells that receive no edge are dropped.
RegionGrid partition_grid(const RoadNetwork& network, double cell_size);

/// Optional inspection dump: one `R <id> <min_x> <min_y> <side> <edge_id>...`
/// line per region.
void save_regions(const RegionGrid& grid, const RoadNetwork& network, const std::string& path);

} // namespace trafcal
