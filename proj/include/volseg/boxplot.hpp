#pragma once

#include <string>
#include <vector>

#include "volseg/stats.hpp"

namespace volseg {

struct BoxplotLayout {
  double width = 640.0;
  double height = 400.0;
  double margin_left = 70.0;
  double margin_right = 20.0;
  double margin_top = 40.0;
  double margin_bottom = 70.0;

  double plot_width() const noexcept { return width - margin_left - margin_right; }
  double plot_height() const noexcept { return height - margin_top - margin_bottom; }
};

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct BoxplotGroup {
  std::string label;
  Summary summary;
};

/// Dice always spans [0, 1]; other metrics span [0, largest upper whisker].
AxisRange axis_range_for(const std::string& metric, const std::vector<BoxplotGroup>& groups);

/// Affine data-to-SVG mapping: hi maps to the top of the plot area, lo to the bottom.
double value_to_y(double value, const AxisRange& range, const BoxplotLayout& layout);

/// x coordinate of the centre of box `index` out of `count`.
double box_center_x(std::size_t index, std::size_t count, const BoxplotLayout& layout);

/// Box-and-whisker chart from precomputed summaries. Outliers are not drawn.
std::string render_boxplot(const std::string& title, const std::string& y_label, const std::vector<BoxplotGroup>& groups,
                           const AxisRange& range, const BoxplotLayout& layout = {});

}  // namespace volseg
