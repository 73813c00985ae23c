#include "wcs/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "wcs/errors.hpp"
#include "wcs/harness.hpp"

namespace wcs::exp {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const char* header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line != header)
    throw IoError("'" + path.string() + "': expected header '" + header + "'");
  const std::size_t cols = split(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != cols) throw IoError("'" + path.string() + "': malformed row '" + line + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("'" + path.string() + "': no data rows");
  return rows;
}

double to_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw IoError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw IoError("bad number '" + s + "'");
  }
}

fs::path companion_csv(const fs::path& svg) {
  fs::path p = svg;
  p.replace_extension(".csv");
  return p;
}

// ---- SVG primitives ------------------------------------------------------

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#e6b800", "#2ca02c", "#d62728",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

std::string color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

struct Frame {
  double left, top, width, height;
  double xmin, xmax, ymin, ymax;

  double px(double x) const { return left + (xmax > xmin ? (x - xmin) / (xmax - xmin) : 0.5) * width; }
  double py(double y) const {
    return top + height - (ymax > ymin ? (y - ymin) / (ymax - ymin) : 0.5) * height;
  }
};

std::pair<double, double> finite_range(const std::vector<double>& v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5 * std::max(1.0, std::abs(lo)), hi + 0.5 * std::max(1.0, std::abs(hi))};
  return {lo, hi};
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void svg_open(std::ostream& os, int w, int h) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void axes(std::ostream& os, const Frame& f, const std::string& title, const std::string& xlabel,
          const std::string& ylabel) {
  const double x0 = f.left, y0 = f.top + f.height;
  os << "<line class=\"axis\" x1=\"" << coord(x0) << "\" y1=\"" << coord(y0) << "\" x2=\""
     << coord(x0 + f.width) << "\" y2=\"" << coord(y0) << "\" stroke=\"black\"/>\n"
     << "<line class=\"axis\" x1=\"" << coord(x0) << "\" y1=\"" << coord(f.top) << "\" x2=\""
     << coord(x0) << "\" y2=\"" << coord(y0) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = f.ymin + (f.ymax - f.ymin) * k / 4.0;
    const double y = f.py(yv);
    os << "<text x=\"" << coord(x0 - 6) << "\" y=\"" << coord(y + 4) << "\" text-anchor=\"end\">"
       << num(yv) << "</text>\n";
    const double xv = f.xmin + (f.xmax - f.xmin) * k / 4.0;
    os << "<text x=\"" << coord(f.px(xv)) << "\" y=\"" << coord(y0 + 16)
       << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
  }
  os << "<text x=\"" << coord(x0 + f.width / 2) << "\" y=\"" << coord(f.top - 8)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
     << "<text x=\"" << coord(x0 + f.width / 2) << "\" y=\"" << coord(y0 + 32)
     << "\" text-anchor=\"middle\">" << xlabel << "</text>\n"
     << "<text transform=\"translate(" << coord(x0 - 52) << ',' << coord(f.top + f.height / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
}

void polyline(std::ostream& os, const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
              const std::string& stroke, const std::string& label) {
  os << "<polyline class=\"series\" data-label=\"" << label << "\" fill=\"none\" stroke=\"" << stroke
     << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(ys[i])) continue;
    os << (i ? " " : "") << coord(f.px(xs[i])) << ',' << coord(f.py(ys[i]));
  }
  os << "\"/>\n";
  if (xs.size() == 1 && std::isfinite(ys[0]))
    os << "<circle cx=\"" << coord(f.px(xs[0])) << "\" cy=\"" << coord(f.py(ys[0])) << "\" r=\"3\" fill=\""
       << stroke << "\"/>\n";
}

}  // namespace

// ---- CSV ------------------------------------------------------------------

void write_train_log_csv(const fs::path& path, const rl::TrainLog& log) {
  auto os = open_out(path);
  os << kTrainLogHeader << '\n';
  for (const auto& r : log)
    os << r.iteration << ',' << format_double(r.mean_cost) << ',' << format_double(r.grad_norm) << ','
       << format_double(r.mean_total_cost) << '\n';
  finish(os, path);
}

void write_timing_csv(const fs::path& path, const rl::TrainLog& log) {
  auto os = open_out(path);
  os << kTimingHeader << '\n';
  for (const auto& r : log) os << r.iteration << ',' << format_double(r.elapsed_s) << '\n';
  finish(os, path);
}

void write_episode_csv(const fs::path& path, const rl::EpisodeTrace& trace) {
  auto os = open_out(path);
  os << kEpisodeHeader << '\n';
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const auto& s = trace.steps[t];
    const auto m = s.state.h.size();
    // Per-plant state shown as its norm so that vector plants fit one column.
    std::vector<double> dev(static_cast<std::size_t>(m));
    const Eigen::Index n = s.state.x.size() / m;
    for (Eigen::Index i = 0; i < m; ++i) dev[static_cast<std::size_t>(i)] = n == 1 ? s.state.x[i] : s.state.x.segment(i * n, n).norm();
    for (Eigen::Index i = 0; i < m; ++i)
      os << t << ',' << i << ',' << format_double(dev[static_cast<std::size_t>(i)]) << ','
         << format_double(s.state.h[i]) << ',' << format_double(s.p[i]) << ','
         << static_cast<int>(s.closed[static_cast<std::size_t>(i)]) << ',' << format_double(s.cost) << '\n';
  }
  finish(os, path);
}

void write_compare_csv(const fs::path& path, const EvalReport& report) {
  auto os = open_out(path);
  os << kCompareHeader << '\n';
  for (std::size_t k = 0; k < report.seeds.size(); ++k)
    for (std::size_t p = 0; p < report.policies.size(); ++p)
      os << report.seeds[k] << ',' << report.policies[p] << ',' << format_double(report.costs[p][k]) << '\n';
  finish(os, path);
}

void write_summary_csv(const fs::path& path, const EvalReport& report) {
  auto os = open_out(path);
  os << kSummaryHeader << '\n';
  for (std::size_t p = 0; p < report.policies.size(); ++p) {
    os << report.policies[p] << ',' << format_double(report.mean(p)) << ',' << format_double(report.median(p))
       << ',';
    if (p > 0) os << format_double(report.win_rate(0, p));
    os << '\n';
  }
  finish(os, path);
}

TrainSeries to_series(const rl::TrainLog& log) {
  TrainSeries s;
  for (const auto& r : log) {
    s.iteration.push_back(r.iteration);
    s.mean_cost.push_back(r.mean_cost);
  }
  return s;
}

EpisodeSeries to_series(const rl::EpisodeTrace& trace) {
  EpisodeSeries s;
  s.steps = static_cast<int>(trace.steps.size());
  s.plants = trace.steps.empty() ? 0 : static_cast<int>(trace.steps.front().state.h.size());
  for (const auto& st : trace.steps) {
    const Eigen::Index m = st.state.h.size();
    const Eigen::Index n = st.state.x.size() / m;
    std::vector<double> x(static_cast<std::size_t>(m)), h(static_cast<std::size_t>(m)),
        p(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(i);
      x[k] = n == 1 ? st.state.x[i] : st.state.x.segment(i * n, n).norm();
      h[k] = st.state.h[i];
      p[k] = st.p[i];
    }
    s.x.push_back(std::move(x));
    s.h.push_back(std::move(h));
    s.p.push_back(std::move(p));
  }
  return s;
}

CompareTable to_table(const EvalReport& report) {
  return {report.policies, report.seeds, report.costs};
}

TrainSeries read_train_csv(const fs::path& path) {
  TrainSeries s;
  for (const auto& row : read_csv(path, kTrainLogHeader)) {
    s.iteration.push_back(static_cast<int>(to_double(row[0])));
    s.mean_cost.push_back(to_double(row[1]));
  }
  return s;
}

EpisodeSeries read_episode_csv(const fs::path& path) {
  const auto rows = read_csv(path, kEpisodeHeader);
  EpisodeSeries s;
  for (const auto& row : rows) {
    s.steps = std::max(s.steps, static_cast<int>(to_double(row[0])) + 1);
    s.plants = std::max(s.plants, static_cast<int>(to_double(row[1])) + 1);
  }
  auto grid = [&] {
    return std::vector<std::vector<double>>(static_cast<std::size_t>(s.steps),
                                            std::vector<double>(static_cast<std::size_t>(s.plants), 0.0));
  };
  s.x = grid();
  s.h = grid();
  s.p = grid();
  for (const auto& row : rows) {
    const auto t = static_cast<std::size_t>(to_double(row[0]));
    const auto i = static_cast<std::size_t>(to_double(row[1]));
    s.x[t][i] = to_double(row[2]);
    s.h[t][i] = to_double(row[3]);
    s.p[t][i] = to_double(row[4]);
  }
  return s;
}

CompareTable read_compare_csv(const fs::path& path) {
  CompareTable t;
  std::map<std::string, std::size_t> pidx;
  std::map<std::uint64_t, std::size_t> sidx;
  const auto rows = read_csv(path, kCompareHeader);
  for (const auto& row : rows) {
    const auto seed = static_cast<std::uint64_t>(to_double(row[0]));
    if (sidx.emplace(seed, t.seeds.size()).second) t.seeds.push_back(seed);
    if (pidx.emplace(row[1], t.policies.size()).second) t.policies.push_back(row[1]);
  }
  t.cost.assign(t.policies.size(), std::vector<double>(t.seeds.size(), 0.0));
  for (const auto& row : rows)
    t.cost[pidx[row[1]]][sidx[static_cast<std::uint64_t>(to_double(row[0]))]] = to_double(row[2]);
  return t;
}

// ---- SVG --------------------------------------------------------------------

void render_train_svg(const fs::path& path, const TrainSeries& s) {
  if (s.iteration.empty()) throw UsageError("render_train_svg: empty training log");
  auto os = open_out(path);
  svg_open(os, 800, 420);
  std::vector<double> xs(s.iteration.begin(), s.iteration.end());
  auto [xlo, xhi] = finite_range(xs);
  auto [ylo, yhi] = finite_range(s.mean_cost);
  const Frame f{80, 40, 680, 310, xlo, xhi, std::min(0.0, ylo), yhi};
  axes(os, f, "Discounted episode cost during training", "iteration", "mean cost");
  polyline(os, f, xs, s.mean_cost, color(0), "mean_cost");
  os << "</svg>\n";
  finish(os, path);
}

void render_episode_svg(const fs::path& path, const EpisodeSeries& s) {
  if (s.steps < 1 || s.plants < 1) throw UsageError("render_episode_svg: empty episode");
  auto os = open_out(path);
  svg_open(os, 900, 960);
  const std::pair<const char*, const std::vector<std::vector<double>>*> panels[] = {
      {"plant states", &s.x}, {"channel fading", &s.h}, {"allocated power", &s.p}};
  std::vector<double> ts(static_cast<std::size_t>(s.steps));
  for (int t = 0; t < s.steps; ++t) ts[static_cast<std::size_t>(t)] = t;
  double top = 40;
  for (const auto& [title, data] : panels) {
    std::vector<double> all;
    for (const auto& row : *data) all.insert(all.end(), row.begin(), row.end());
    auto [lo, hi] = finite_range(all);
    const Frame f{80, top, 760, 230, 0.0, static_cast<double>(std::max(1, s.steps - 1)), lo, hi};
    os << "<g class=\"panel\" data-title=\"" << title << "\">\n";
    axes(os, f, title, "t", title);
    for (int i = 0; i < s.plants; ++i) {
      std::vector<double> ys(ts.size());
      for (std::size_t t = 0; t < ts.size(); ++t) ys[t] = (*data)[t][static_cast<std::size_t>(i)];
      polyline(os, f, ts, ys, color(static_cast<std::size_t>(i)), "plant " + std::to_string(i));
    }
    os << "</g>\n";
    top += 310;
  }
  os << "</svg>\n";
  finish(os, path);
}

void render_compare_svg(const fs::path& path, const CompareTable& t) {
  if (t.policies.empty() || t.seeds.empty()) throw UsageError("render_compare_svg: empty comparison");
  auto os = open_out(path);
  const double group = 14.0 * static_cast<double>(t.policies.size()) + 10.0;
  const int width = static_cast<int>(std::max(600.0, 160 + group * static_cast<double>(t.seeds.size())));
  svg_open(os, width, 460);
  std::vector<double> all;
  for (const auto& c : t.cost) all.insert(all.end(), c.begin(), c.end());
  const double hi = finite_range(all).second;
  const Frame f{80, 40, width - 120.0, 330, 0.0, static_cast<double>(t.seeds.size()), 0.0, std::max(hi, 1e-12)};
  axes(os, f, "Paired test cost per seed", "seed", "total cost");
  const double bar = f.width / static_cast<double>(t.seeds.size()) / (static_cast<double>(t.policies.size()) + 1.0);
  for (std::size_t k = 0; k < t.seeds.size(); ++k) {
    os << "<g class=\"seed\" data-seed=\"" << t.seeds[k] << "\">\n";
    for (std::size_t p = 0; p < t.policies.size(); ++p) {
      const double v = std::isfinite(t.cost[p][k]) ? t.cost[p][k] : 0.0;
      const double x = f.px(static_cast<double>(k)) + bar * (0.5 + static_cast<double>(p));
      const double y = f.py(v);
      os << "<rect class=\"bar\" data-policy=\"" << t.policies[p] << "\" x=\"" << coord(x) << "\" y=\""
         << coord(y) << "\" width=\"" << coord(bar) << "\" height=\"" << coord(f.top + f.height - y)
         << "\" fill=\"" << color(p) << "\"/>\n";
    }
    os << "</g>\n";
  }
  for (std::size_t p = 0; p < t.policies.size(); ++p) {
    const double y = 400 + 16.0 * static_cast<double>(p);
    os << "<rect x=\"90\" y=\"" << coord(y) << "\" width=\"10\" height=\"10\" fill=\"" << color(p) << "\"/>"
       << "<text x=\"106\" y=\"" << coord(y + 9) << "\">" << t.policies[p] << "</text>\n";
  }
  os << "</svg>\n";
  finish(os, path);
}

void emit_plots(const rl::TrainLog& log, const fs::path& out_svg) {
  if (log.empty()) throw UsageError("emit_plots: empty training log");
  write_train_log_csv(companion_csv(out_svg), log);
  render_train_svg(out_svg, to_series(log));
}

void emit_plots(const EvalReport& report, const fs::path& out_svg) {
  write_compare_csv(companion_csv(out_svg), report);
  render_compare_svg(out_svg, to_table(report));
}

void emit_plots(const rl::EpisodeTrace& trace, const fs::path& out_svg) {
  if (trace.steps.empty()) throw UsageError("emit_plots: empty episode");
  write_episode_csv(companion_csv(out_svg), trace);
  render_episode_svg(out_svg, to_series(trace));
}

}  // namespace wcs::exp
