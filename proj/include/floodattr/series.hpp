#pragma once

#include <cstddef>
#include <vector>

namespace floodattr {

// Annual maximum discharge (m3/s) indexed by calendar year; years ascending.
struct AnnualMaxSeries {
  std::vector<int> years;
  std::vector<double> discharge;

  [[nodiscard]] std::size_t size() const noexcept { return years.size(); }
  [[nodiscard]] bool empty() const noexcept { return years.empty(); }
};

}  // namespace floodattr
