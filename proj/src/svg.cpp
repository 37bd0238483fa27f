#include "archrec/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace archrec::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                          "#e377c2", "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31"};

std::string color_for(int group) {
  if (group < 0) return "#999999";
  return kPalette[group % static_cast<int>(std::size(kPalette))];
}

std::string num(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void header(std::ostringstream& os, int w, int h) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string scatter(const Eigen::MatrixXd& coords, const std::vector<std::string>& labels,
                    const std::vector<int>& groups) {
  constexpr int W = 800, H = 800, pad = 40;
  std::ostringstream os;
  header(os, W, H);
  if (coords.rows() > 0 && coords.cols() >= 2) {
    const double x0 = coords.col(0).minCoeff(), x1 = coords.col(0).maxCoeff();
    const double y0 = coords.col(1).minCoeff(), y1 = coords.col(1).maxCoeff();
    const double sx = (W - 2 * pad) / std::max(x1 - x0, 1e-12);
    const double sy = (H - 2 * pad) / std::max(y1 - y0, 1e-12);
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
      const double x = pad + (coords(i, 0) - x0) * sx;
      const double y = H - pad - (coords(i, 1) - y0) * sy;
      const int g = i < static_cast<Eigen::Index>(groups.size()) ? groups[static_cast<std::size_t>(i)] : 0;
      os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"" << color_for(g) << "\"/>\n";
      if (i < static_cast<Eigen::Index>(labels.size())) {
        os << "<text x=\"" << num(x + 5) << "\" y=\"" << num(y - 5) << "\" font-size=\"11\">"
           << escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
      }
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string reachability_plot(const std::vector<double>& reachability, const std::vector<int>& labels_in_order) {
  constexpr int H = 400, pad = 30;
  const int n = static_cast<int>(reachability.size());
  const int bw = 12;
  const int W = std::max(200, 2 * pad + n * bw);
  double top = 0.0;
  for (double r : reachability) {
    if (std::isfinite(r)) top = std::max(top, r);
  }
  if (top <= 0.0) top = 1.0;
  top *= 1.1;
  std::ostringstream os;
  header(os, W, H);
  for (int i = 0; i < n; ++i) {
    const double r = reachability[static_cast<std::size_t>(i)];
    const bool inf = !std::isfinite(r);
    const double h = (inf ? top : r) / top * (H - 2 * pad);
    const int g = i < static_cast<int>(labels_in_order.size()) ? labels_in_order[static_cast<std::size_t>(i)] : -1;
    os << "<rect x=\"" << pad + i * bw << "\" y=\"" << num(H - pad - h) << "\" width=\"" << bw - 2 << "\" height=\""
       << num(h) << "\" fill=\"" << (inf ? "#dddddd" : color_for(g)) << "\"/>\n";
  }
  os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"13\">reachability (max " << num(top / 1.1) << ")</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::vector<Bar>& bars) {
  constexpr int row = 22, pad = 20, label_w = 220, plot_w = 400;
  const int H = 2 * pad + 30 + row * static_cast<int>(bars.size());
  const int W = label_w + plot_w + 2 * pad + 60;
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.value);
  if (top <= 0.0) top = 1.0;
  std::ostringstream os;
  header(os, W, H);
  os << "<text x=\"" << pad << "\" y=\"" << pad + 10 << "\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const int y = pad + 30 + static_cast<int>(i) * row;
    const double w = bars[i].value / top * plot_w;
    os << "<text x=\"" << pad << "\" y=\"" << y + 14 << "\" font-size=\"12\">" << escape(bars[i].label) << "</text>\n";
    os << "<rect x=\"" << pad + label_w << "\" y=\"" << y + 2 << "\" width=\"" << num(std::max(w, 0.0))
       << "\" height=\"" << row - 6 << "\" fill=\"" << color_for(static_cast<int>(i)) << "\"/>\n";
    os << "<text x=\"" << num(pad + label_w + std::max(w, 0.0) + 4) << "\" y=\"" << y + 14 << "\" font-size=\"11\">"
       << num(bars[i].value, 4) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace archrec::svg
