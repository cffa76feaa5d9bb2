#include "volseg/boxplot.hpp"

#include <algorithm>
#include <sstream>

#include "volseg/report.hpp"

namespace volseg {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return format_number(v); }

void line(std::ostringstream& os, const char* cls, double x1, double y1, double x2, double y2) {
  os << "  <line class=\"" << cls << "\" x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
     << "\" y2=\"" << num(y2) << "\" stroke=\"#333\" stroke-width=\"1.5\"/>\n";
}

}  // namespace

AxisRange axis_range_for(const std::string& metric, const std::vector<BoxplotGroup>& groups) {
  if (metric == "dice") return {0.0, 1.0};
  double hi = 0.0;
  for (const auto& g : groups) hi = std::max(hi, g.summary.whisker_hi);
  return {0.0, hi > 0.0 ? hi : 1.0};
}

double value_to_y(double value, const AxisRange& range, const BoxplotLayout& layout) {
  return layout.margin_top + (range.hi - value) / (range.hi - range.lo) * layout.plot_height();
}

double box_center_x(std::size_t index, std::size_t count, const BoxplotLayout& layout) {
  const double slot = layout.plot_width() / static_cast<double>(count);
  return layout.margin_left + (static_cast<double>(index) + 0.5) * slot;
}

std::string render_boxplot(const std::string& title, const std::string& y_label, const std::vector<BoxplotGroup>& groups,
                           const AxisRange& range, const BoxplotLayout& layout) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(layout.width) << "\" height=\"" << num(layout.height)
     << "\" viewBox=\"0 0 " << num(layout.width) << ' ' << num(layout.height) << "\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "  <text class=\"title\" x=\"" << num(layout.width / 2) << "\" y=\"" << num(layout.margin_top / 2)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title) << "</text>\n";

  const double x0 = layout.margin_left;
  const double x1 = layout.margin_left + layout.plot_width();
  const double y_top = value_to_y(range.hi, range, layout);
  const double y_bottom = value_to_y(range.lo, range, layout);
  line(os, "axis", x0, y_top, x0, y_bottom);
  line(os, "axis", x0, y_bottom, x1, y_bottom);
  for (int i = 0; i <= 4; ++i) {
    const double v = range.lo + (range.hi - range.lo) * i / 4.0;
    const double y = value_to_y(v, range, layout);
    line(os, "tick", x0 - 5, y, x0, y);
    os << "  <text class=\"tick-label\" x=\"" << num(x0 - 8) << "\" y=\"" << num(y + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(v) << "</text>\n";
  }
  os << "  <text class=\"y-label\" x=\"16\" y=\"" << num((y_top + y_bottom) / 2) << "\" transform=\"rotate(-90 16 "
     << num((y_top + y_bottom) / 2) << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << xml_escape(y_label) << "</text>\n";

  const double slot = layout.plot_width() / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double half = slot * 0.25;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const Summary& s = groups[i].summary;
    const double cx = box_center_x(i, groups.size(), layout);
    const double yq1 = value_to_y(s.q1, range, layout);
    const double yq3 = value_to_y(s.q3, range, layout);
    const double ymed = value_to_y(s.median, range, layout);
    const double ylo = value_to_y(s.whisker_lo, range, layout);
    const double yhi = value_to_y(s.whisker_hi, range, layout);
    os << "  <g class=\"group\" data-group=\"" << xml_escape(groups[i].label) << "\" data-n=\"" << s.n << "\">\n";
    os << "  <rect class=\"box\" x=\"" << num(cx - half) << "\" y=\"" << num(yq3) << "\" width=\"" << num(2 * half)
       << "\" height=\"" << num(yq1 - yq3) << "\" fill=\"#9ecae1\" stroke=\"#333\" stroke-width=\"1.5\"/>\n";
    line(os, "median", cx - half, ymed, cx + half, ymed);
    line(os, "whisker-hi", cx, yq3, cx, yhi);
    line(os, "whisker-lo", cx, yq1, cx, ylo);
    line(os, "cap-hi", cx - half / 2, yhi, cx + half / 2, yhi);
    line(os, "cap-lo", cx - half / 2, ylo, cx + half / 2, ylo);
    os << "  <text class=\"group-label\" x=\"" << num(cx) << "\" y=\"" << num(y_bottom + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(groups[i].label)
       << " (n=" << s.n << ")</text>\n";
    os << "  </g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace volseg
