#include "cueforge/components.hpp"

#include <algorithm>
#include <numeric>

namespace cueforge {

namespace {

struct DisjointSet {
  std::vector<int> parent;

  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Keep the smaller (earlier) provisional label as root.
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

ComponentMap label_components(const LabelMask& mask, bool include_ignore) {
  const int h = mask.height();
  const int w = mask.width();
  ComponentMap out;
  out.height = h;
  out.width = w;
  out.index.assign(mask.pixel_count(), -1);
  DisjointSet sets;

  auto at = [&](int y, int x) { return static_cast<std::size_t>(y) * w + x; };
  // First pass: provisional labels from the already visited half of the 8-neighborhood.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Label l = mask.at(y, x);
      if (l == kIgnoreLabel && !include_ignore) continue;
      int current = -1;
      const int dy[4] = {0, -1, -1, -1};
      const int dx[4] = {-1, -1, 0, 1};
      for (int k = 0; k < 4; ++k) {
        const int ny = y + dy[k], nx = x + dx[k];
        if (ny < 0 || nx < 0 || nx >= w) continue;
        if (mask.at(ny, nx) != l) continue;
        const int other = out.index[at(ny, nx)];
        if (other < 0) continue;
        if (current < 0) current = other;
        else sets.unite(current, other);
      }
      if (current < 0) current = sets.make();
      out.index[at(y, x)] = current;
    }
  }

  // Second pass: compact roots into dense ids in order of first appearance.
  std::vector<int> dense(sets.parent.size(), -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int& idx = out.index[at(y, x)];
      if (idx < 0) continue;
      const int root = sets.find(idx);
      if (dense[root] < 0) {
        dense[root] = static_cast<int>(out.components.size());
        out.components.push_back(Component{mask.at(y, x), 0, y, x, y, x});
      }
      idx = dense[root];
      Component& c = out.components[idx];
      ++c.area;
      c.y0 = std::min(c.y0, y);
      c.y1 = std::max(c.y1, y);
      c.x0 = std::min(c.x0, x);
      c.x1 = std::max(c.x1, x);
    }
  }
  return out;
}

}  // namespace cueforge
