#include "graphmdn/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "graphmdn/errors.hpp"

namespace graphmdn {

SkeletonGraph::SkeletonGraph(std::size_t node_count,
                             std::vector<std::pair<std::size_t, std::size_t>> edges,
                             std::vector<std::string> node_names)
    : node_count_(node_count), edges_(std::move(edges)), node_names_(std::move(node_names)) {
    if (node_count_ == 0) throw DataError("SkeletonGraph: node count must be positive");
    if (node_names_.empty()) {
        node_names_.reserve(node_count_);
        for (std::size_t i = 0; i < node_count_; ++i) node_names_.push_back("j" + std::to_string(i));
    }
    if (node_names_.size() != node_count_) {
        throw DataError("SkeletonGraph: node name count does not match node count");
    }

    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto& [a, b] : edges_) {
        if (a >= node_count_ || b >= node_count_) {
            throw DataError("SkeletonGraph: edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ") references an invalid node");
        }
        if (a == b) throw DataError("SkeletonGraph: self-loop edges are not allowed");
        auto canon = std::minmax(a, b);
        if (!seen.insert({canon.first, canon.second}).second) {
            throw DataError("SkeletonGraph: duplicate edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ")");
        }
    }

    adjacency_ = Matrix(node_count_, node_count_);
    for (std::size_t i = 0; i < node_count_; ++i) adjacency_(i, i) = 1.0;
    for (auto& [a, b] : edges_) {
        adjacency_(a, b) = 1.0;
        adjacency_(b, a) = 1.0;
    }

    // Connectivity check: BFS from node 0.
    std::vector<char> visited(node_count_, 0);
    std::vector<std::size_t> queue{0};
    visited[0] = 1;
    while (!queue.empty()) {
        std::size_t u = queue.back();
        queue.pop_back();
        for (std::size_t v = 0; v < node_count_; ++v) {
            if (v != u && adjacency_(u, v) != 0.0 && !visited[v]) {
                visited[v] = 1;
                queue.push_back(v);
            }
        }
    }
    if (std::find(visited.begin(), visited.end(), 0) != visited.end()) {
        throw DataError("SkeletonGraph: graph is not connected");
    }
}

std::size_t SkeletonGraph::degree(std::size_t node) const {
    std::size_t d = 0;
    for (std::size_t j = 0; j < node_count_; ++j) {
        if (j != node && adjacency_(node, j) != 0.0) ++d;
    }
    return d;
}

std::string SkeletonGraph::hash() const {
    std::vector<std::pair<std::size_t, std::size_t>> canon;
    canon.reserve(edges_.size());
    for (auto& [a, b] : edges_) canon.push_back(std::minmax(a, b));
    std::sort(canon.begin(), canon.end());

    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(node_count_);
    for (auto& [a, b] : canon) {
        feed(a);
        feed(b);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

const SkeletonGraph& human_skeleton() {
    static const SkeletonGraph g = [] {
        const std::vector<std::string> names = {
            "rhip",      "rknee",  "rfoot",  "lhip",      "lknee",  "lfoot",
            "spine",     "thorax", "neck",   "head",      "lshoulder", "lelbow",
            "lwrist",    "rshoulder", "relbow", "rwrist"};
        // Tree with 15 bones. The pelvis is implicit at the origin, so both
        // hips and the spine connect to each other through it.
        const std::vector<std::pair<std::size_t, std::size_t>> edges = {
            {0, 1},  {1, 2},          // right leg
            {3, 4},  {4, 5},          // left leg
            {0, 6},  {3, 6},          // hips to spine (through the implicit root)
            {6, 7},  {7, 8},  {8, 9}, // spine, thorax, neck, head
            {7, 10}, {10, 11}, {11, 12}, // left arm
            {7, 13}, {13, 14}, {14, 15}, // right arm
        };
        return SkeletonGraph(16, edges, names);
    }();
    return g;
}

Matrix neighbor_mask(const SkeletonGraph& g) { return g.adjacency(); }

SkeletonGraph parse_graph_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::size_t node_count = 0;
    bool have_nodes = false;
    std::vector<std::pair<std::size_t, std::size_t>> edges;

    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "nodes") {
            long long k = -1;
            if (!(ls >> k) || k <= 0) {
                throw DataError(origin + ":" + std::to_string(line_no) + ": invalid node count");
            }
            if (have_nodes) {
                throw DataError(origin + ":" + std::to_string(line_no) + ": duplicate nodes header");
            }
            node_count = static_cast<std::size_t>(k);
            have_nodes = true;
        } else if (tag == "edge") {
            if (!have_nodes) {
                throw DataError(origin + ":" + std::to_string(line_no) +
                                ": edge before nodes header");
            }
            long long a = -1, b = -1;
            if (!(ls >> a >> b) || a < 0 || b < 0) {
                throw DataError(origin + ":" + std::to_string(line_no) + ": invalid edge line");
            }
            std::string extra;
            if (ls >> extra) {
                throw DataError(origin + ":" + std::to_string(line_no) + ": trailing tokens");
            }
            edges.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        } else {
            throw DataError(origin + ":" + std::to_string(line_no) + ": unknown directive '" +
                            tag + "'");
        }
    }
    if (!have_nodes) throw DataError(origin + ": missing nodes header");

    try {
        return SkeletonGraph(node_count, std::move(edges));
    } catch (const DataError& e) {
        throw DataError(origin + ": " + e.what());
    }
}

SkeletonGraph parse_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open graph file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_graph_text(buf.str(), path);
}

Matrix unflatten_pose(std::span<const double> v, std::size_t node_count, std::size_t dims) {
    if (v.size() != node_count * dims) {
        throw ShapeError("unflatten_pose: vector length " + std::to_string(v.size()) +
                         " != " + std::to_string(node_count) + "*" + std::to_string(dims));
    }
    Matrix pose(node_count, dims);
    std::copy(v.begin(), v.end(), pose.data());
    return pose;
}

std::vector<double> flatten_pose(const Matrix& pose) {
    return std::vector<double>(pose.data(), pose.data() + pose.size());
}

} // namespace graphmdn
