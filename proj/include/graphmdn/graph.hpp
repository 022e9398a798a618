#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphmdn/matrix.hpp"

namespace graphmdn {

/// Undirected skeleton topology. Immutable after construction; every layer
/// and dataset references one of these and agrees on node order.
class SkeletonGraph {
  public:
    /// Validates indices, connectivity and duplicate edges, then builds the
    /// adjacency with self-loops. Node names default to "j<i>" when empty.
    SkeletonGraph(std::size_t node_count,
                  std::vector<std::pair<std::size_t, std::size_t>> edges,
                  std::vector<std::string> node_names = {});

    std::size_t node_count() const { return node_count_; }
    const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
    const std::vector<std::string>& node_names() const { return node_names_; }
    const Matrix& adjacency() const { return adjacency_; }

    std::size_t degree(std::size_t node) const;

    /// FNV-1a hash of the canonical form (K + sorted edge list), hex string.
    /// Datasets and checkpoints carry it to detect topology mismatches.
    std::string hash() const;

  private:
    std::size_t node_count_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
    std::vector<std::string> node_names_;
    Matrix adjacency_; // K x K binary, unit diagonal
};

/// The 16-joint human skeleton used by the 2D-to-3D lifting task.
/// Root-relative convention: the pelvis is not a node; it sits at the
/// origin and hips/spine connect through it via explicit edges.
const SkeletonGraph& human_skeleton();

/// Binary K x K matrix with entry (i,j) = 1 iff j is i or a neighbor of i.
Matrix neighbor_mask(const SkeletonGraph& g);

/// Parses the graph override file format:
///   nodes <K>
///   edge <i> <j>      (one per line, duplicates rejected)
/// Lines starting with '#' and blank lines are ignored.
SkeletonGraph parse_graph_file(const std::string& path);
SkeletonGraph parse_graph_text(const std::string& text, const std::string& origin);

// Pose layout helpers. Poses are stored node-major:
// 2D vector = [x0,y0, x1,y1, ...], 3D vector = [x0,y0,z0, x1,y1,z1, ...].
Matrix unflatten_pose(std::span<const double> v, std::size_t node_count, std::size_t dims);
std::vector<double> flatten_pose(const Matrix& pose);

} // namespace graphmdn
