#include "thermocad/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace thermocad::harness::svg {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open(std::string_view title) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " +
         num(kWidth) + " " + num(kHeight) + "\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
}

std::string axes(const Frame& f, std::string_view x_label, std::string_view y_label, bool x_ticks) {
  const double xa = f.px(f.x0), xb = f.px(f.x1), ya = f.py(f.y0), yb = f.py(f.y1);
  std::string s = "<g stroke=\"black\" fill=\"none\">\n<line x1=\"" + num(xa) + "\" y1=\"" + num(ya) + "\" x2=\"" +
                  num(xb) + "\" y2=\"" + num(ya) + "\"/>\n<line x1=\"" + num(xa) + "\" y1=\"" + num(ya) +
                  "\" x2=\"" + num(xa) + "\" y2=\"" + num(yb) + "\"/>\n</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<line x1=\"" + num(xa - 4) + "\" y1=\"" + num(f.py(yv)) + "\" x2=\"" + num(xa) + "\" y2=\"" +
         num(f.py(yv)) + "\" stroke=\"black\"/>\n<text x=\"" + num(xa - 6) + "\" y=\"" + num(f.py(yv) + 4) +
         "\" text-anchor=\"end\">" + tick(yv) + "</text>\n";
    if (x_ticks) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      s += "<line x1=\"" + num(f.px(xv)) + "\" y1=\"" + num(ya) + "\" x2=\"" + num(f.px(xv)) + "\" y2=\"" +
           num(ya + 4) + "\" stroke=\"black\"/>\n<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(ya + 16) +
           "\" text-anchor=\"middle\">" + tick(xv) + "</text>\n";
    }
  }
  s += "<text x=\"" + num((xa + xb) / 2) + "\" y=\"" + num(kHeight - 15) + "\" text-anchor=\"middle\">" +
       escape(x_label) + "</text>\n";
  s += "<text x=\"18\" y=\"" + num((ya + yb) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num((ya + yb) / 2) + ")\">" + escape(y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(std::string_view title, std::string_view x_label, std::string_view y_label,
                       const std::vector<Series>& series) {
  Frame f{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  }
  if (!std::isfinite(f.x0)) f = {0, 1, 0, 1};
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);

  std::string out = open(title) + axes(f, x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      points += (points.empty() ? "" : " ") + num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
           "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k);
    out += "<line x1=\"" + num(kWidth - kRight + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" +
           num(kWidth - kRight + 28) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kWidth - kRight + 32) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.name) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string box_plot(std::string_view title, std::string_view y_label,
                     const std::vector<std::pair<std::string, std::vector<double>>>& groups) {
  Frame f{-0.5, static_cast<double>(groups.size()) - 0.5, std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (const auto& [name, values] : groups) {
    for (double v : values) {
      f.y0 = std::min(f.y0, v);
      f.y1 = std::max(f.y1, v);
    }
  }
  if (!std::isfinite(f.y0)) {
    f.y0 = 0;
    f.y1 = 1;
  }
  widen(f.x0, f.x1);
  widen(f.y0, f.y1);

  std::string out = open(title) + axes(f, "", y_label, false);
  const double half = 0.25 * (f.px(1) - f.px(0));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double> v = groups[g].second;
    const double cx = f.px(static_cast<double>(g));
    out += "<text x=\"" + num(cx) + "\" y=\"" + num(f.py(f.y0) + 16) + "\" text-anchor=\"middle\">" +
           escape(groups[g].first) + "</text>\n";
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const auto q = [&](double p) {
      const double pos = p * static_cast<double>(v.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, v.size() - 1);
      return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
    };
    const double q1 = q(0.25), q2 = q(0.5), q3 = q(0.75);
    out += "<g stroke=\"black\">\n";
    out += "<line x1=\"" + num(cx) + "\" y1=\"" + num(f.py(v.front())) + "\" x2=\"" + num(cx) + "\" y2=\"" +
           num(f.py(v.back())) + "\"/>\n";
    out += "<rect x=\"" + num(cx - half) + "\" y=\"" + num(f.py(q3)) + "\" width=\"" + num(2 * half) +
           "\" height=\"" + num(std::max(1.0, f.py(q1) - f.py(q3))) + "\" fill=\"#9ecae1\"/>\n";
    out += "<line x1=\"" + num(cx - half) + "\" y1=\"" + num(f.py(q2)) + "\" x2=\"" + num(cx + half) + "\" y2=\"" +
           num(f.py(q2)) + "\" stroke-width=\"2\"/>\n";
    out += "</g>\n";
    for (double x : v) {
      out += "<circle class=\"sample\" cx=\"" + num(cx + half * 1.4) + "\" cy=\"" + num(f.py(x)) +
             "\" r=\"2.5\" fill=\"#08519c\"/>\n";
    }
  }
  return out + "</svg>\n";
}

}  // namespace thermocad::harness::svg
