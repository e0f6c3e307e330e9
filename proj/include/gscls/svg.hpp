#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gscls/real.hpp"

namespace gscls {

// 2-D scatter of n points colored by class label.
std::string svg_scatter(std::span<const Real> points, std::span<const std::size_t> labels,
                        const std::vector<std::string>& class_names, const std::string& title);

// k x k heatmap (row-major values in [0,1], linear color scale from white at
// 0 to full saturation at 1) with row/column class labels and cell values.
std::string svg_heatmap(std::span<const Real> matrix, const std::vector<std::string>& class_names,
                        const std::string& title);

}  // namespace gscls
