#pragma once

// Cosine distance, average-linkage agglomerative clustering, and
// nearest-neighbour suggestion over feature matrices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/feature_matrix.hpp"

namespace vegmap {

/// 1 - u.v / (|u||v|), clamped to [0, 2]. Scale invariant.
inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::dimension_mismatch, "vector dimensions differ",
          fmt::format("{} vs {}", u.size(), v.size()));
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  require(uu > 0.0 && vv > 0.0, ErrorCode::invalid_argument,
          "cosine distance is undefined for a zero vector");
  return std::clamp(1.0 - dot / std::sqrt(uu * vv), 0.0, 2.0);
}

inline double cosine_distance(const FeatureVector& u, const FeatureVector& v) {
  require(u.layout_id == v.layout_id, ErrorCode::layout_mismatch, "feature layouts differ",
          u.layout_id + " vs " + v.layout_id);
  return cosine_distance(std::span<const double>(u.values), std::span<const double>(v.values));
}

struct Merge {
  std::size_t left;   ///< node id: < n is a leaf row, otherwise n + merge index
  std::size_t right;
  double height;
  std::size_t size;
};

class Dendrogram {
 public:
  Dendrogram(std::size_t leaves, std::vector<Merge> merges)
      : leaves_(leaves), merges_(std::move(merges)) {}

  std::size_t leaves() const noexcept { return leaves_; }
  const std::vector<Merge>& merges() const noexcept { return merges_; }
  std::size_t root() const noexcept { return leaves_ + merges_.size() - 1; }

  /// Splits the tree `depth` levels below the root (root = depth 0). Leaves
  /// reached earlier stay as singleton clusters. Cluster ids are numbered by
  /// the smallest row they contain.
  std::vector<int> cut_at_depth(int depth) const {
    require(depth >= 0, ErrorCode::invalid_argument, "depth must be >= 0");
    std::vector<std::size_t> frontier{root()};
    for (int d = 0; d < depth; ++d) {
      std::vector<std::size_t> next;
      for (auto node : frontier) {
        if (node < leaves_) {
          next.push_back(node);
        } else {
          const auto& m = merges_[node - leaves_];
          next.push_back(m.left);
          next.push_back(m.right);
        }
      }
      frontier = std::move(next);
    }
    std::vector<int> raw(leaves_, -1);
    for (std::size_t c = 0; c < frontier.size(); ++c) {
      for (auto row : members(frontier[c])) raw[row] = static_cast<int>(c);
    }
    return renumber(raw);
  }

  std::vector<std::size_t> members(std::size_t node) const {
    std::vector<std::size_t> out, stack{node};
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      if (cur < leaves_) {
        out.push_back(cur);
      } else {
        stack.push_back(merges_[cur - leaves_].right);
        stack.push_back(merges_[cur - leaves_].left);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["linkage"] = "average";
    j["metric"] = "cosine";
    j["leaves"] = leaves_;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : merges_) arr.push_back({m.left, m.right, m.height, m.size});
    j["merges"] = std::move(arr);
    return j;
  }

 private:
  static std::vector<int> renumber(const std::vector<int>& raw) {
    std::vector<int> mapping;
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto it = std::find(mapping.begin(), mapping.end(), raw[i]);
      if (it == mapping.end()) {
        mapping.push_back(raw[i]);
        it = mapping.end() - 1;
      }
      out[i] = static_cast<int>(it - mapping.begin());
    }
    return out;
  }

  std::size_t leaves_;
  std::vector<Merge> merges_;
};

/// Agglomerative average-linkage clustering under cosine distance. Clusters are
/// tracked by their smallest row index; ties in merge distance go to the
/// lexicographically smallest pair of those indices.
inline Dendrogram hclust(const FeatureMatrix& m) {
  const std::size_t n = m.rows();
  require(n >= 2, ErrorCode::degenerate_data, "clustering needs at least two rows");
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = cosine_distance(m.row(i), m.row(j));
      dist[i * n + j] = dist[j * n + i] = d;
    }
  }
  auto D = [&](std::size_t a, std::size_t b) -> double& { return dist[a * n + b]; };

  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1), node(n);
  for (std::size_t i = 0; i < n; ++i) node[i] = i;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> nn(n, kNone);
  std::vector<double> nnd(n, kInf);
  auto rescan = [&](std::size_t a) {
    nn[a] = kNone;
    nnd[a] = kInf;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (active[b] && D(a, b) < nnd[a]) {
        nnd[a] = D(a, b);
        nn[a] = b;
      }
    }
  };
  for (std::size_t a = 0; a < n; ++a) rescan(a);

  std::vector<Merge> merges;
  merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = kNone;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i] && nn[i] != kNone && (a == kNone || nnd[i] < nnd[a])) a = i;
    }
    const std::size_t b = nn[a];
    const double height = nnd[a];
    merges.push_back({node[a], node[b], height, size[a] + size[b]});

    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double merged =
          (static_cast<double>(size[a]) * D(a, c) + static_cast<double>(size[b]) * D(b, c)) /
          static_cast<double>(size[a] + size[b]);
      D(a, c) = D(c, a) = merged;
    }
    active[b] = false;
    size[a] += size[b];
    node[a] = n + step;

    rescan(a);
    for (std::size_t c = 0; c < a; ++c) {
      if (!active[c]) continue;
      if (nn[c] == a || nn[c] == b) {
        rescan(c);
      } else if (D(c, a) < nnd[c] || (D(c, a) == nnd[c] && a < nn[c])) {
        nnd[c] = D(c, a);
        nn[c] = a;
      }
    }
    for (std::size_t c = a + 1; c < b; ++c) {
      if (active[c] && nn[c] == b) rescan(c);
    }
  }
  return Dendrogram(n, std::move(merges));
}

struct Neighbor {
  TileSpec tile;
  double distance = 0.0;
  std::size_t pool_row = 0;
  std::size_t seed_row = 0;  ///< closest seed
};

/// Pool rows ranked by their smallest cosine distance to any seed (ascending,
/// tile key tie-break); the first k are returned.
inline std::vector<Neighbor> nearest_neighbors(const FeatureMatrix& seeds, const FeatureMatrix& pool,
                                               std::size_t k) {
  require_same_layout(seeds, pool);
  require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
  require(seeds.rows() >= 1, ErrorCode::invalid_argument, "at least one seed is required");
  std::vector<Neighbor> all;
  all.reserve(pool.rows());
  for (std::size_t p = 0; p < pool.rows(); ++p) {
    Neighbor nb{pool.key(p), std::numeric_limits<double>::infinity(), p, 0};
    for (std::size_t s = 0; s < seeds.rows(); ++s) {
      const double d = cosine_distance(seeds.row(s), pool.row(p));
      if (d < nb.distance) {
        nb.distance = d;
        nb.seed_row = s;
      }
    }
    all.push_back(std::move(nb));
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.tile < b.tile;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

inline std::string neighbors_to_jsonl(const std::vector<Neighbor>& neighbors,
                                      const FeatureMatrix& seeds) {
  std::string out;
  for (const auto& nb : neighbors) {
    nlohmann::ordered_json j;
    j["image_id"] = nb.tile.image_id;
    j["x"] = nb.tile.x;
    j["y"] = nb.tile.y;
    j["size"] = nb.tile.size;
    j["distance"] = nb.distance;
    const auto& s = seeds.key(nb.seed_row);
    j["seed"] = {{"image_id", s.image_id}, {"x", s.x}, {"y", s.y}, {"size", s.size}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace vegmap
