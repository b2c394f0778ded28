#include "minto/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "minto/csv.hpp"

namespace minto::plots {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 440;
constexpr double kLeft = 70;
constexpr double kRight = 190;
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
     << "</text>\n";
  return os.str();
}

std::string axes(const Range& x, const Range& y, const std::string& x_label, const std::string& y_label, bool x_ticks) {
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  std::ostringstream os;
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = kTop + ph - ph * i / 4.0;
    os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << py << "\" x2=\"" << kLeft << "\" y2=\"" << py
       << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << kLeft - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    if (x_ticks) {
      const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
      const double px = kLeft + pw * i / 4.0;
      os << "<line x1=\"" << px << "\" y1=\"" << kTop + ph << "\" x2=\"" << px << "\" y2=\"" << kTop + ph + 4
         << "\" stroke=\"black\"/>\n"
         << "<text x=\"" << px << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    }
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
     << xml_escape(x_label) << "</text>\n"
     << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << xml_escape(y_label) << "</text>\n";
  return os.str();
}

}  // namespace

std::string xml_escape(const std::string& text) {
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

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.low.empty() ? s.y[i] : s.low[i]);
      yhi = std::max(yhi, s.high.empty() ? s.y[i] : s.high[i]);
    }
  }
  Range xr{xlo, xhi};
  if (!std::isfinite(xlo) || xhi - xlo < 1e-12) xr = padded(xlo, xhi);
  const Range yr = padded(ylo, yhi);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto px = [&](double v) { return kLeft + pw * (v - xr.lo) / (xr.hi - xr.lo); };
  const auto py = [&](double v) { return kTop + ph - ph * (v - yr.lo) / (yr.hi - yr.lo); };

  std::ostringstream os;
  os << header(title) << axes(xr, yr, x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (s.y.empty()) continue;
    if (!s.low.empty() && s.low.size() == s.y.size() && s.high.size() == s.y.size()) {
      os << "<polygon fill=\"" << color(k) << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.y.size(); ++i) os << num(px(s.x[i])) << "," << num(py(s.high[i])) << " ";
      for (std::size_t i = s.y.size(); i-- > 0;) os << num(px(s.x[i])) << "," << num(py(s.low[i])) << " ";
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color(k) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.y.size(); ++i) os << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    os << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 32 << "\" y2=\""
       << ly << "\" stroke=\"" << color(k) << "\" stroke-width=\"3\"/>\n"
       << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars) {
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bars) {
    lo = std::min({lo, b.low, b.value});
    hi = std::max({hi, b.high, b.value});
  }
  const Range yr = padded(lo, hi);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto py = [&](double v) { return kTop + ph - ph * (v - yr.lo) / (yr.hi - yr.lo); };
  std::ostringstream os;
  os << header(title) << axes({0, 1}, yr, "", y_label, false);
  const double slot = bars.empty() ? pw : pw / static_cast<double>(bars.size());
  for (std::size_t k = 0; k < bars.size(); ++k) {
    const auto& b = bars[k];
    const double x0 = kLeft + slot * static_cast<double>(k) + slot * 0.15;
    const double w = slot * 0.7;
    const double top = py(std::max(b.value, 0.0));
    const double bottom = py(std::min(b.value, 0.0));
    os << "<rect x=\"" << num(x0) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\""
       << num(bottom - top) << "\" fill=\"" << color(k) << "\" fill-opacity=\"0.8\"/>\n";
    const double cx = x0 + w / 2;
    os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(py(b.low)) << "\" x2=\"" << num(cx) << "\" y2=\""
       << num(py(b.high)) << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << ly - 6 << "\" width=\"20\" height=\"12\" fill=\""
       << color(k) << "\"/>\n"
       << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(b.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

bool write_svg(const std::filesystem::path& path, const std::string& svg, std::ostream& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    log << "warning: cannot write " << path.string() << "\n";
    return false;
  }
  out << svg;
  return true;
}

std::string safe(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-')) c = '_';
  }
  return out;
}

struct Columns {
  std::vector<std::size_t> idx;
  bool ok = true;
};

Columns need(const csv::Table& t, std::initializer_list<const char*> names, const std::string& file, std::ostream& log) {
  Columns c;
  for (const char* n : names) {
    const auto i = t.column(n);
    if (!i) {
      log << "warning: " << file << " lacks column '" << n << "'; plot skipped\n";
      c.ok = false;
      return c;
    }
    c.idx.push_back(*i);
  }
  return c;
}

// (experiment, env) -> group -> series
using SeriesMap = std::map<std::pair<std::string, std::string>, std::map<std::string, Series>>;

int curve_plots(const std::filesystem::path& dir, const std::string& file, const char* value_col, bool band,
                const std::string& suffix, const std::string& y_label, std::ostream& log) {
  const auto path = dir / "aggregate" / file;
  if (!std::filesystem::exists(path)) {
    log << "warning: " << path.string() << " missing; plot skipped\n";
    return 0;
  }
  const auto t = csv::read_table(path);
  const auto cols = band ? need(t, {"experiment", "env", "group", "epoch", value_col, "ci_low", "ci_high"}, file, log)
                         : need(t, {"experiment", "env", "group", "epoch", value_col}, file, log);
  if (!cols.ok) return 0;
  SeriesMap m;
  for (const auto& r : t.rows) {
    auto& s = m[{r[cols.idx[0]], r[cols.idx[1]]}][r[cols.idx[2]]];
    s.label = r[cols.idx[2]];
    s.x.push_back(std::stod(r[cols.idx[3]]));
    s.y.push_back(std::stod(r[cols.idx[4]]));
    if (band) {
      s.low.push_back(std::stod(r[cols.idx[5]]));
      s.high.push_back(std::stod(r[cols.idx[6]]));
    }
  }
  int written = 0;
  for (const auto& [key, groups] : m) {
    std::vector<Series> series;
    for (const auto& [_, s] : groups) series.push_back(s);
    const std::string title = key.first + " / " + key.second;
    const auto out = dir / "plots" / (safe(key.first) + "_" + safe(key.second) + "_" + suffix + ".svg");
    if (write_svg(out, line_chart(title, "epoch", y_label, series), log)) ++written;
  }
  return written;
}

}  // namespace

int emit_plots(const std::filesystem::path& out_dir, std::ostream& log) {
  std::filesystem::create_directories(out_dir / "plots");
  int written = curve_plots(out_dir, "curves.csv", "iqm", true, "curves", "normalized IQM return", log);

  const auto auc_path = out_dir / "aggregate" / "auc.csv";
  if (std::filesystem::exists(auc_path)) {
    const auto t = csv::read_table(auc_path);
    const auto cols = need(t, {"experiment", "group", "auc_iqm", "ci_low", "ci_high"}, "auc.csv", log);
    if (cols.ok) {
      std::map<std::string, std::vector<Bar>> by_exp;
      for (const auto& r : t.rows) {
        by_exp[r[cols.idx[0]]].push_back(
            {r[cols.idx[1]], std::stod(r[cols.idx[2]]), std::stod(r[cols.idx[3]]), std::stod(r[cols.idx[4]])});
      }
      for (const auto& [exp, bars] : by_exp) {
        if (write_svg(out_dir / "plots" / (safe(exp) + "_auc.svg"), bar_chart(exp + " AUC", "IQM of normalized AUC", bars), log)) {
          ++written;
        }
      }
    }
  } else {
    log << "warning: " << auc_path.string() << " missing; plot skipped\n";
  }

  if (std::filesystem::exists(out_dir / "aggregate" / "selection.csv")) {
    written += curve_plots(out_dir, "selection.csv", "mean_ratio", false, "selection", "online selection ratio", log);
  }
  return written;
}

}  // namespace minto::plots
