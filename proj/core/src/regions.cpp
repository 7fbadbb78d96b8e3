#include "trafcal/regions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace trafcal {

namespace {

struct Square {
    double min_x, min_y, side;
    double max_x() const { return min_x + side; }
    double max_y() const { return min_y + side; }
};

bool point_in_square(const Point& p, const Square& s) {
    return p.x >= s.min_x && p.x <= s.max_x() && p.y >= s.min_y && p.y <= s.max_y();
}

// Segment/axis-aligned-square intersection via the slab method. Boundary
// contact counts as intersection.
bool segment_intersects_square(const Point& a, const Point& b, const Square& s) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;

    auto clip = [&](double p, double q) {
        // moving from p toward direction q; keep [t0, t1] inside the slab
        if (p == 0.0) return q >= 0.0;
        const double r = q / p;
        if (p < 0.0) {
            if (r > t1) return false;
            t0 = std::max(t0, r);
        } else {
            if (r < t0) return false;
            t1 = std::min(t1, r);
        }
        return t0 <= t1;
    };

    if (!clip(-dx, a.x - s.min_x)) return false;
    if (!clip(dx, s.max_x() - a.x)) return false;
    if (!clip(-dy, a.y - s.min_y)) return false;
    if (!clip(dy, s.max_y() - a.y)) return false;
    return true;
}

bool polyline_intersects_square(const std::vector<Point>& pts, const Square& s) {
    if (pts.size() == 1) return point_in_square(pts[0], s);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        if (segment_intersects_square(pts[i], pts[i + 1], s)) return true;
    return false;
}

std::string region_id_for(std::int32_t row, std::int32_t col, int pad) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "r%0*d_%0*d", pad, row, pad, col);
    return buf;
}

} // namespace

RegionIndex RegionGrid::region_index(const std::string& id) const {
    for (std::size_t i = 0; i < regions_.size(); ++i)
        if (regions_[i].id == id) return static_cast<RegionIndex>(i);
    throw ValidationError("unknown region id '" + id + "'");
}

bool RegionGrid::adjacent(RegionIndex a, RegionIndex b) const {
    if (a < 0 || a >= region_count() || b < 0 || b >= region_count())
        throw ValidationError("adjacent: region index out of range");
    if (a == b) return false;
    const Region& ra = regions_[static_cast<std::size_t>(a)];
    const Region& rb = regions_[static_cast<std::size_t>(b)];
    return std::abs(ra.row - rb.row) <= 1 && std::abs(ra.col - rb.col) <= 1;
}

RegionGrid partition_grid(const RoadNetwork& network, double cell_size) {
    if (!(cell_size > 0)) throw ValidationError("cell_size must be positive");
    if (network.edge_count() == 0) throw ValidationError("cannot partition an empty network");

    Point lo, hi;
    network.bounding_box(lo, hi);
    const auto cols = std::max<std::int32_t>(
        1, static_cast<std::int32_t>(std::ceil((hi.x - lo.x) / cell_size)));
    const auto rows = std::max<std::int32_t>(
        1, static_cast<std::int32_t>(std::ceil((hi.y - lo.y) / cell_size)));

    auto square_at = [&](std::int32_t row, std::int32_t col) {
        return Square{lo.x + col * cell_size, lo.y + row * cell_size, cell_size};
    };

    // First intersecting cell in row-major order wins; an edge on a shared
    // boundary therefore lands in the lowest (row, col) cell it touches.
    std::vector<std::vector<EdgeIndex>> cell_edges(static_cast<std::size_t>(rows) *
                                                   static_cast<std::size_t>(cols));
    std::vector<std::int64_t> edge_cell(static_cast<std::size_t>(network.edge_count()), -1);
    for (EdgeIndex e = 0; e < network.edge_count(); ++e) {
        const auto& geom = network.edge(e).geometry;
        double gx0 = geom[0].x, gx1 = geom[0].x, gy0 = geom[0].y, gy1 = geom[0].y;
        for (const auto& p : geom) {
            gx0 = std::min(gx0, p.x);
            gx1 = std::max(gx1, p.x);
            gy0 = std::min(gy0, p.y);
            gy1 = std::max(gy1, p.y);
        }
        const auto c0 = std::clamp<std::int32_t>(
            static_cast<std::int32_t>(std::floor((gx0 - lo.x) / cell_size)), 0, cols - 1);
        const auto c1 = std::clamp<std::int32_t>(
            static_cast<std::int32_t>(std::floor((gx1 - lo.x) / cell_size)), 0, cols - 1);
        const auto r0 = std::clamp<std::int32_t>(
            static_cast<std::int32_t>(std::floor((gy0 - lo.y) / cell_size)), 0, rows - 1);
        const auto r1 = std::clamp<std::int32_t>(
            static_cast<std::int32_t>(std::floor((gy1 - lo.y) / cell_size)), 0, rows - 1);

        for (std::int32_t row = r0; row <= r1 && edge_cell[static_cast<std::size_t>(e)] < 0; ++row) {
            for (std::int32_t col = c0; col <= c1; ++col) {
                if (polyline_intersects_square(geom, square_at(row, col))) {
                    const std::int64_t cell = static_cast<std::int64_t>(row) * cols + col;
                    edge_cell[static_cast<std::size_t>(e)] = cell;
                    cell_edges[static_cast<std::size_t>(cell)].push_back(e);
                    break;
                }
            }
        }
        if (edge_cell[static_cast<std::size_t>(e)] < 0)
            throw ValidationError("edge '" + network.edge(e).id +
                                  "' does not intersect any grid cell");
    }

    const int pad = std::max(2, static_cast<int>(std::to_string(std::max(rows, cols) - 1).size()));

    RegionGrid grid;
    grid.cell_size_ = cell_size;
    std::unordered_map<std::int64_t, RegionIndex> cell_to_region;
    for (std::int32_t row = 0; row < rows; ++row) {
        for (std::int32_t col = 0; col < cols; ++col) {
            const std::int64_t cell = static_cast<std::int64_t>(row) * cols + col;
            auto& edges = cell_edges[static_cast<std::size_t>(cell)];
            if (edges.empty()) continue;
            std::sort(edges.begin(), edges.end());
            const Square sq = square_at(row, col);
            cell_to_region.emplace(cell, grid.region_count());
            grid.regions_.push_back(
                {region_id_for(row, col, pad), sq.min_x, sq.min_y, cell_size, row, col, edges});
        }
    }

    grid.edge_region_.resize(static_cast<std::size_t>(network.edge_count()));
    for (EdgeIndex e = 0; e < network.edge_count(); ++e)
        grid.edge_region_[static_cast<std::size_t>(e)] =
            cell_to_region.at(edge_cell[static_cast<std::size_t>(e)]);

    grid.neighbors_.resize(grid.regions_.size());
    for (RegionIndex a = 0; a < grid.region_count(); ++a)
        for (RegionIndex b = 0; b < grid.region_count(); ++b)
            if (a != b && grid.adjacent(a, b)) grid.neighbors_[static_cast<std::size_t>(a)].push_back(b);

    return grid;
}

void save_regions(const RegionGrid& grid, const RoadNetwork& network, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw Error("cannot write region file '" + path + "'");
    for (const auto& region : grid.regions()) {
        file << "R " << region.id << ' ' << format_double(region.min_x) << ' '
             << format_double(region.min_y) << ' ' << format_double(region.side);
        for (EdgeIndex e : region.edge_ids) file << ' ' << network.edge(e).id;
        file << '\n';
    }
}

} // namespace trafcal
