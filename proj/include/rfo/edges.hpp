#pragma once

#include "rfo/geometry.hpp"

namespace rfo {

// Single edge-enumeration convention used by every energy sum. interior:
// edges with both endpoints in r, each once (positive axis direction).
// meeting: additionally each crossing edge once (the endpoint in r is first).
enum class EdgeMode { interior, meeting };

// fn(i, a, j, b): a = r.site(i); j = index of b in r, or -1 when b lies
// outside r (crossing edge, meeting mode only).
template <class F>
void for_each_edge(const Region& r, EdgeMode mode, F&& fn) {
  const int d = r.dim();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Site& a = r.site(i);
    for (int ax = 0; ax < d; ++ax) {
      Site b = a;
      b[ax] += 1;
      std::ptrdiff_t j = r.index_of(b);
      if (j >= 0) {
        fn(i, a, static_cast<std::ptrdiff_t>(j), b);
      } else if (mode == EdgeMode::meeting) {
        fn(i, a, std::ptrdiff_t{-1}, b);
      }
      if (mode == EdgeMode::meeting) {
        Site c = a;
        c[ax] -= 1;
        if (!r.contains(c)) fn(i, a, std::ptrdiff_t{-1}, c);
      }
    }
  }
}

}  // namespace rfo
