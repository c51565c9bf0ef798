#include <cmath>
#include <cstdio>
#include <sstream>

#include "cuspgeo/cli.hpp"

namespace cuspgeo::cli {

namespace {

constexpr double kWidth = 800.0, kHeight = 600.0, kMargin = 60.0;

std::string fixed(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

Polyline trajectory_polyline(const Trajectory& tr, const Window& window) {
  Polyline p;
  const bool use_r = window.y_axis == "r";
  for (const auto& y : tr.y)
    p.points.push_back({y[Trajectory::PHI], use_r ? y[Trajectory::R] : y[Trajectory::THETA]});
  return p;
}

std::string render_svg(const std::vector<Polyline>& lines, const Window& w,
                       const std::vector<CriticalPoint>& markers, const std::string& title) {
  if (!(w.x1 > w.x0) || !(w.y1 > w.y0)) throw std::invalid_argument("render_svg: empty window");
  if (lines.empty()) throw std::invalid_argument("render_svg: no trajectories");
  const double pw = kWidth - 2 * kMargin, ph = kHeight - 2 * kMargin;
  auto px = [&](double x) { return kMargin + (x - w.x0) / (w.x1 - w.x0) * pw; };
  auto py = [&](double y) { return kHeight - kMargin - (y - w.y0) / (w.y1 - w.y0) * ph; };
  auto inside = [&](const std::array<double, 2>& q) {
    return q[0] >= w.x0 && q[0] <= w.x1 && q[1] >= w.y0 && q[1] <= w.y1;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << fixed(kWidth, 0) << ' '
     << fixed(kHeight, 0) << "\" width=\"" << fixed(kWidth, 0) << "\" height=\""
     << fixed(kHeight, 0) << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  os << "<rect x=\"" << fixed(kMargin) << "\" y=\"" << fixed(kMargin) << "\" width=\"" << fixed(pw)
     << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">"
     << escape(title) << "</text>\n";
  os << "<text x=\"400\" y=\"590\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\">"
     << escape(w.x_axis) << "</text>\n";
  os << "<text x=\"15\" y=\"300\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"14\" transform=\"rotate(-90 15 300)\">"
     << escape(w.y_axis) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = w.x0 + (w.x1 - w.x0) * i / 4, yv = w.y0 + (w.y1 - w.y0) * i / 4;
    os << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << fixed(kHeight - kMargin + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(xv, 3)
       << "</text>\n";
    os << "<text x=\"" << fixed(kMargin - 6) << "\" y=\"" << fixed(py(yv) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << escape(std::abs(yv) < 1e-3 && yv != 0.0 ? fixed(yv * 1e6, 1) + "e-6" : fixed(yv, 3))
       << "</text>\n";
  }

  for (const auto& line : lines) {
    std::vector<std::vector<std::array<double, 2>>> pieces(1);
    for (const auto& q : line.points) {
      if (inside(q) && std::isfinite(q[0]) && std::isfinite(q[1])) {
        pieces.back().push_back(q);
      } else if (!pieces.back().empty()) {
        pieces.emplace_back();
      }
    }
    for (const auto& piece : pieces) {
      if (piece.size() < 2) continue;
      os << "<polyline fill=\"none\" stroke=\"" << line.color << "\" stroke-width=\"1\" points=\"";
      for (std::size_t i = 0; i < piece.size(); ++i) {
        if (i) os << ' ';
        os << fixed(px(piece[i][0])) << ',' << fixed(py(piece[i][1]));
      }
      os << "\"/>\n";
    }
  }

  for (const auto& cp : markers) {
    const double y = 0.0;  // singular points sit at theta = 0, r = 0
    if (cp.phi0 < w.x0 || cp.phi0 > w.x1 || y < w.y0 || y > w.y1) continue;
    const char* color = cp.type == CriticalType::maximum   ? "#c0392b"
                        : cp.type == CriticalType::minimum ? "#2e86c1"
                                                           : "#7f8c8d";
    os << "<circle cx=\"" << fixed(px(cp.phi0)) << "\" cy=\"" << fixed(py(y)) << "\" r=\"4\" fill=\""
       << color << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace cuspgeo::cli
