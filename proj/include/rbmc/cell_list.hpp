#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rbmc/core.hpp"

namespace rbmc {

// Uniform-grid cell list over an axis-aligned box. Cell edges are at least
// `cutoff` on every axis, so the 3^d cells around a point hold every particle
// within `cutoff` of it. Membership is kept as intrusive doubly linked lists
// so that single-particle moves are O(1).
template <std::size_t D>
class CellList {
 public:
  CellList() = default;

  CellList(const Vec<D>& lo, const Vec<D>& hi, double cutoff,
           std::size_t max_cells = std::size_t{1} << 21)
      : lo_(lo) {
    require(cutoff > 0.0, "CellList: cutoff must be positive");
    // Largest per-axis count that keeps the total under max_cells;
    // coarser cells are always valid since the edge only has to be >= cutoff.
    const double per_axis_cap =
        std::floor(std::pow(static_cast<double>(max_cells), 1.0 / D));
    total_cells_ = 1;
    for (std::size_t k = 0; k < D; ++k) {
      const double extent = hi[k] - lo[k];
      require(extent > 0.0, "CellList: degenerate box");
      double n = std::floor(extent / cutoff);
      n = std::clamp(n, 1.0, std::max(1.0, per_axis_cap));
      dims_[k] = static_cast<std::size_t>(n);
      edge_[k] = extent / n;
      total_cells_ *= dims_[k];
    }
    head_.assign(total_cells_, -1);
  }

  void build(std::span<const Vec<D>> positions) {
    std::fill(head_.begin(), head_.end(), -1);
    const std::size_t n = positions.size();
    next_.assign(n, -1);
    prev_.assign(n, -1);
    cell_of_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) insert(i, cell_index(positions[i]));
  }

  void move(std::size_t i, const Vec<D>& new_position) {
    const std::size_t c = cell_index(new_position);
    if (c == cell_of_[i]) return;
    remove(i);
    insert(i, c);
  }

  std::size_t cell_of(std::size_t i) const { return cell_of_[i]; }
  std::size_t cell_count() const { return total_cells_; }
  const std::array<std::size_t, D>& dims() const { return dims_; }
  const Vec<D>& edge() const { return edge_; }

  // Calls f(j) for every particle in the cells adjacent to x (inclusive).
  template <class F>
  void for_each_neighbor(const Vec<D>& x, F&& f) const {
    std::array<std::ptrdiff_t, D> c;
    for (std::size_t k = 0; k < D; ++k) c[k] = axis_cell(x, k);
    std::array<std::ptrdiff_t, D> off;
    off.fill(-1);
    while (true) {
      bool inside = true;
      std::size_t idx = 0;
      for (std::size_t k = D; k-- > 0;) {
        const std::ptrdiff_t ck = c[k] + off[k];
        if (ck < 0 || ck >= static_cast<std::ptrdiff_t>(dims_[k])) {
          inside = false;
          break;
        }
        idx = idx * dims_[k] + static_cast<std::size_t>(ck);
      }
      if (inside) {
        for (std::int64_t j = head_[idx]; j >= 0; j = next_[j])
          f(static_cast<std::size_t>(j));
      }
      std::size_t k = 0;
      while (k < D && off[k] == 1) off[k++] = -1;
      if (k == D) break;
      ++off[k];
    }
  }

  std::size_t cell_index(const Vec<D>& x) const {
    std::size_t idx = 0;
    for (std::size_t k = D; k-- > 0;)
      idx = idx * dims_[k] + static_cast<std::size_t>(axis_cell(x, k));
    return idx;
  }

 private:
  std::ptrdiff_t axis_cell(const Vec<D>& x, std::size_t k) const {
    const double t = std::floor((x[k] - lo_[k]) / edge_[k]);
    const double hi = static_cast<double>(dims_[k] - 1);
    return static_cast<std::ptrdiff_t>(std::clamp(t, 0.0, hi));
  }

  void insert(std::size_t i, std::size_t c) {
    cell_of_[i] = c;
    prev_[i] = -1;
    next_[i] = head_[c];
    if (head_[c] >= 0) prev_[head_[c]] = static_cast<std::int64_t>(i);
    head_[c] = static_cast<std::int64_t>(i);
  }

  void remove(std::size_t i) {
    const std::size_t c = cell_of_[i];
    if (prev_[i] >= 0) {
      next_[prev_[i]] = next_[i];
    } else {
      head_[c] = next_[i];
    }
    if (next_[i] >= 0) prev_[next_[i]] = prev_[i];
    next_[i] = prev_[i] = -1;
  }

  Vec<D> lo_{};
  Vec<D> edge_{};
  std::array<std::size_t, D> dims_{};
  std::size_t total_cells_ = 0;
  std::vector<std::int64_t> head_;
  std::vector<std::int64_t> next_;
  std::vector<std::int64_t> prev_;
  std::vector<std::size_t> cell_of_;
};

}  // namespace rbmc
