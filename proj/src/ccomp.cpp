#include "polarseg/ccomp.hpp"

#include <numeric>

#include "polarseg/errors.hpp"

namespace polarseg {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractError(what);
}

// Union-find over provisional labels, path halving + union by size.
class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    size_.push_back(1);
    return parent_.back();
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
};

}  // namespace

LabelMap label_components(const Mask2D& mask, int connectivity) {
  mask.validate();
  require(connectivity == 4 || connectivity == 8,
          "label_components: connectivity must be 4 or 8");

  const int h = mask.height;
  const int w = mask.width;
  LabelMap lm;
  lm.height = h;
  lm.width = w;
  lm.labels.assign(static_cast<std::size_t>(h) * w, 0);

  // First pass: provisional labels, merging with the already-scanned
  // neighbors (W and N; plus NW and NE for 8-connectivity).
  DisjointSet ds;
  std::vector<std::int32_t> prov(static_cast<std::size_t>(h) * w, -1);
  auto prov_at = [&](int r, int c) -> std::int32_t& {
    return prov[static_cast<std::size_t>(r) * w + c];
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      int merged = -1;
      auto consider = [&](int nr, int nc) {
        if (nr < 0 || nc < 0 || nc >= w) return;
        const std::int32_t p = prov_at(nr, nc);
        if (p < 0) return;
        if (merged < 0)
          merged = p;
        else
          ds.unite(merged, p);
      };
      consider(r, c - 1);
      if (connectivity == 8) consider(r - 1, c - 1);
      consider(r - 1, c);
      if (connectivity == 8) consider(r - 1, c + 1);

      if (merged < 0)
        prov_at(r, c) = ds.make();
      else
        prov_at(r, c) = merged;
    }
  }

  // Second pass: map each union-find root to a final label in raster order
  // of first appearance, and collect component statistics.
  std::vector<std::int32_t> root_to_label;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int32_t p = prov_at(r, c);
      if (p < 0) continue;
      const int root = ds.find(p);
      if (root >= static_cast<int>(root_to_label.size()))
        root_to_label.resize(root + 1, 0);
      if (root_to_label[root] == 0) {
        root_to_label[root] = static_cast<std::int32_t>(lm.components.size()) + 1;
        Component comp;
        comp.label = root_to_label[root];
        lm.components.push_back(std::move(comp));
      }
      const std::int32_t label = root_to_label[root];
      lm.labels[static_cast<std::size_t>(r) * w + c] = label;
      Component& comp = lm.components[label - 1];
      comp.area += 1;
      comp.centroid_row += r;
      comp.centroid_col += c;
      comp.pixel_list.emplace_back(r, c);
    }
  }

  for (Component& comp : lm.components) {
    comp.centroid_row /= comp.area;
    comp.centroid_col /= comp.area;
  }
  return lm;
}

LabelMap filter_small(const LabelMap& lm, std::int64_t min_area) {
  LabelMap out;
  out.height = lm.height;
  out.width = lm.width;
  out.labels.assign(lm.labels.size(), 0);

  std::vector<std::int32_t> remap(lm.components.size() + 1, 0);
  for (const Component& comp : lm.components) {
    if (comp.area < min_area) continue;
    Component kept = comp;
    kept.label = static_cast<int>(out.components.size()) + 1;
    remap[comp.label] = kept.label;
    out.components.push_back(std::move(kept));
  }

  for (std::size_t i = 0; i < lm.labels.size(); ++i)
    out.labels[i] = remap[lm.labels[i]];
  return out;
}

Mask2D hysteresis_threshold(const Image2D& map, double low, double high,
                            int connectivity) {
  map.validate();
  require(connectivity == 4 || connectivity == 8,
          "hysteresis_threshold: connectivity must be 4 or 8");

  const int h = map.height;
  const int w = map.width;
  Mask2D out(h, w);

  // Seed from strong pixels and grow through weak (> low) ones.
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const float v = map.at(r, c);
      if (v >= high && v > low && !out.at(r, c)) {
        out.at(r, c) = 1;
        stack.emplace_back(r, c);
      }
    }
  }

  const int dr8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
  const int dc8[] = {-1, 0, 1, -1, 1, -1, 0, 1};
  const int dr4[] = {-1, 0, 0, 1};
  const int dc4[] = {0, -1, 1, 0};
  const int* dr = connectivity == 8 ? dr8 : dr4;
  const int* dc = connectivity == 8 ? dc8 : dc4;
  const int nn = connectivity;

  while (!stack.empty()) {
    const auto [r, c] = stack.back();
    stack.pop_back();
    for (int k = 0; k < nn; ++k) {
      const int nr = r + dr[k];
      const int nc = c + dc[k];
      if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
      if (out.at(nr, nc)) continue;
      if (map.at(nr, nc) > low) {
        out.at(nr, nc) = 1;
        stack.emplace_back(nr, nc);
      }
    }
  }
  return out;
}

}  // namespace polarseg
