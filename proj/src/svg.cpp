#include "dqnmpc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace dqnmpc::svg {

namespace {

constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.0e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.3g", v);
  }
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

// Roughly five ticks at 1/2/5 multiples of a power of ten.
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  return t;
}

struct Frame {
  PlotSpec spec;
  double x0, x1, y0, y1;  // data range (y already log10 if log_y)

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (spec.width - kLeft - kRight); }
  double py(double y) const { return spec.height - kBottom - (y - y0) / (y1 - y0) * (spec.height - kTop - kBottom); }
};

void header(std::ostringstream& o, const PlotSpec& s) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << s.width << "\" height=\"" << s.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << s.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(s.title)
    << "</text>\n";
  o << "<text x=\"" << s.width / 2 << "\" y=\"" << s.height - 12 << "\" text-anchor=\"middle\">" << escape(s.xlabel)
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << s.height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << s.height / 2
    << ")\">" << escape(s.ylabel) << "</text>\n";
}

void y_axis(std::ostringstream& o, const Frame& f) {
  const double xl = kLeft, xr = f.spec.width - kRight;
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << xr - xl << "\" height=\""
    << f.spec.height - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(f.y0, f.y1)) {
    const double y = f.py(t);
    o << "<line x1=\"" << xl - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << xr << "\" y2=\"" << num(y)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << xl - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
      << (f.spec.log_y ? "1e" + tick_label(t) : tick_label(t)) << "</text>\n";
  }
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double d = std::max(1.0, std::abs(lo)) * 0.5;
    return {lo - d, hi + d};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

double ymap(const PlotSpec& s, double y) { return s.log_y ? std::log10(std::max(y, 1e-300)) : y; }

}  // namespace

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0.0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ymap(spec, s.y[i]));
      y1 = std::max(y1, ymap(spec, s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!(x1 > x0)) x1 = x0 + 1.0;
  const auto [ya, yb] = padded(y0, y1);
  const Frame f{spec, x0, x1, ya, yb};

  std::ostringstream o;
  header(o, spec);
  y_axis(o, f);
  for (double t : nice_ticks(x0, x1)) {
    const double x = f.px(t);
    o << "<line x1=\"" << num(x) << "\" y1=\"" << spec.height - kBottom << "\" x2=\"" << num(x) << "\" y2=\""
      << spec.height - kBottom + 4 << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(x) << "\" y=\"" << spec.height - kBottom + 17 << "\" text-anchor=\"middle\">"
      << tick_label(t) << "</text>\n";
  }
  int li = 0;
  for (const auto& s : series) {
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0.0)) continue;
        o << num(f.px(s.x[i])) << "," << num(f.py(ymap(spec, s.y[i]))) << " ";
      }
      o << "\"/>\n";
    } else {
      for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0.0)) continue;
        o << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(ymap(spec, s.y[i])))
          << "\" r=\"2.5\" fill=\"" << s.color << "\" fill-opacity=\"0.6\"/>\n";
      }
    }
    if (!s.label.empty()) {
      const double ly = kTop + 14 + 16 * li++;
      const double lx = spec.width - kRight - 150;
      o << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"10\" fill=\"" << s.color << "\"/>\n";
      o << "<text x=\"" << lx + 18 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string box_plot(const PlotSpec& spec, const std::vector<BoxGroup>& groups) {
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& g : groups) {
    for (double v : g.values) {
      if (!std::isfinite(v) || (spec.log_y && v <= 0.0)) continue;
      y0 = std::min(y0, ymap(spec, v));
      y1 = std::max(y1, ymap(spec, v));
    }
  }
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  const auto [ya, yb] = padded(y0, y1);
  const double n = std::max<size_t>(groups.size(), 1);
  const Frame f{spec, 0.0, n, ya, yb};

  std::ostringstream o;
  header(o, spec);
  y_axis(o, f);
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    std::vector<double> v;
    for (double x : g.values) {
      if (std::isfinite(x) && !(spec.log_y && x <= 0.0)) v.push_back(ymap(spec, x));
    }
    const double cx = f.px(gi + 0.5);
    o << "<text x=\"" << num(cx) << "\" y=\"" << spec.height - kBottom + 17 << "\" text-anchor=\"middle\">"
      << escape(g.label) << "</text>\n";
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      const double pos = p * (v.size() - 1);
      const size_t i = static_cast<size_t>(pos);
      return i + 1 < v.size() ? v[i] + (pos - i) * (v[i + 1] - v[i]) : v[i];
    };
    const double q1 = q(0.25), med = q(0.5), q3 = q(0.75), iqr = q3 - q1;
    double lo = v.front(), hi = v.back();
    for (double x : v) {
      if (x >= q1 - 1.5 * iqr) {
        lo = x;
        break;
      }
    }
    for (auto it = v.rbegin(); it != v.rend(); ++it) {
      if (*it <= q3 + 1.5 * iqr) {
        hi = *it;
        break;
      }
    }
    const double w = 0.18 * (f.px(1) - f.px(0));
    o << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(lo)) << "\" x2=\"" << num(cx) << "\" y2=\"" << num(f.py(hi))
      << "\" stroke=\"black\"/>\n";
    o << "<rect x=\"" << num(cx - w) << "\" y=\"" << num(f.py(q3)) << "\" width=\"" << num(2 * w) << "\" height=\""
      << num(std::max(0.5, f.py(q1) - f.py(q3))) << "\" fill=\"" << g.color
      << "\" fill-opacity=\"0.35\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << num(cx - w) << "\" y1=\"" << num(f.py(med)) << "\" x2=\"" << num(cx + w) << "\" y2=\""
      << num(f.py(med)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    // golden-ratio jitter keeps the layout reproducible
    for (size_t i = 0; i < v.size(); ++i) {
      const double jit = std::fmod(0.618033988749895 * (i + 1), 1.0) - 0.5;
      o << "<circle cx=\"" << num(cx + 1.6 * w + 0.5 * w * (jit + 0.5)) << "\" cy=\"" << num(f.py(v[i]))
        << "\" r=\"1.8\" fill=\"" << g.color << "\" fill-opacity=\"0.6\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace dqnmpc::svg
