#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splatmesh/camera.hpp"

namespace splatmesh {

// Exact nearest-neighbour index over a fixed point set (3-d tree, median split).
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  struct Result {
    std::size_t index = 0;
    double distance_sq = 0.0;
  };

  // Ties resolve to the lowest point index. Requires a non-empty tree.
  Result nearest(const Vec3& query) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range into order_
    std::int32_t left = -1, right = -1;
    int axis = -1;                     // -1 marks a leaf
    double split = 0.0;
  };

  int build(std::uint32_t begin, std::uint32_t end);
  void search(int node, const Vec3& q, Result& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace splatmesh
