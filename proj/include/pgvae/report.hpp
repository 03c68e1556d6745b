#pragma once

// Aggregation of results.csv files into per-cell means and confidence
// intervals, and minimal SVG line plots.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pgvae/experiment.hpp"
#include "pgvae/mbo.hpp"

namespace pgvae {

/// Input that does not follow the results.csv layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw SchemaError(path + ": header does not match results schema");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 12) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": expected 12 fields, got " + std::to_string(f.size()));
    }
    ResultRow r;
    r.key = CellKey{f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]};
    r.metric = f[9];
    try {
      std::size_t pos = 0;
      r.iteration = std::stoul(f[10], &pos);
      if (pos != f[10].size()) throw std::invalid_argument("iteration");
    } catch (const std::exception&) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": bad iteration '" + f[10] + "'");
    }
    if (!detail::parse_real(f[11], r.value)) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": bad value '" + f[11] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Rebuilds RunMetrics for every (cell, scheme, seed) in the rows. The map is
/// keyed by the full CellKey, so the result does not depend on row order.
inline std::map<CellKey, RunMetrics> runs_from_rows(const std::vector<ResultRow>& rows) {
  std::map<CellKey, std::map<std::pair<std::string, std::size_t>, double>> by_run;
  for (const auto& r : rows) {
    auto& slot = by_run[r.key];
    if (!slot.emplace(std::make_pair(r.metric, r.iteration), r.value).second) {
      throw SchemaError("duplicate row for " + r.key.csv() + " metric " + r.metric + " iteration " +
                        std::to_string(r.iteration));
    }
  }
  std::map<CellKey, RunMetrics> out;
  for (const auto& [key, values] : by_run) {
    RunMetrics m;
    std::size_t t_max = 0;
    for (const auto& [mk, v] : values) {
      if (mk.first == "cum_max") t_max = std::max(t_max, mk.second);
    }
    auto need = [&](const std::string& metric, std::size_t it) {
      const auto f = values.find({metric, it});
      if (f == values.end()) {
        throw SchemaError("missing metric " + metric + " iteration " + std::to_string(it) + " for " + key.csv());
      }
      return f->second;
    };
    for (std::size_t t = 1; t <= t_max; ++t) {
      IterationMetrics it;
      it.iteration = t;
      it.max = need("max", t);
      it.p75 = need("p75", t);
      it.p95 = need("p95", t);
      it.cum_max = need("cum_max", t);
      it.cum_p75 = need("cum_p75", t);
      it.cum_p95 = need("cum_p95", t);
      it.n_eff = need("n_eff", t);
      m.iterations.push_back(it);
    }
    if (m.iterations.empty()) throw SchemaError("no iteration rows for " + key.csv());
    m.base_max = need("base_max", 0);
    m.base_p75 = need("base_p75", 0);
    m.base_p95 = need("base_p95", 0);
    out.emplace(key, std::move(m));
  }
  return out;
}

/// A cell together with its scheme; the seed column is dropped.
inline CellKey without_seed(CellKey k) {
  k.seed.clear();
  return k;
}

struct CellAggregate {
  CellKey key;  // seed empty
  std::vector<std::string> seeds;
  AggregateMetrics metrics;
  bool has_ci = false;
};

/// aggregate_runs per (cell, scheme); a single seed gives means without a CI.
inline std::vector<CellAggregate> aggregate_cells(const std::map<CellKey, RunMetrics>& runs) {
  std::map<CellKey, std::vector<std::pair<std::string, const RunMetrics*>>> groups;
  for (const auto& [key, m] : runs) groups[without_seed(key)].push_back({key.seed, &m});
  std::vector<CellAggregate> out;
  for (const auto& [key, members] : groups) {
    CellAggregate a;
    a.key = key;
    std::vector<RunMetrics> ms;
    for (const auto& [seed, m] : members) {
      a.seeds.push_back(seed);
      ms.push_back(*m);
    }
    if (ms.size() >= 2) {
      a.metrics = aggregate_runs(ms);
      a.has_ci = true;
    } else {
      const auto& m = ms.front();
      a.metrics.runs = 1;
      a.metrics.mean_iterations = m.iterations;
      a.metrics.mean_max = m.final_cum_max();
      a.metrics.mean_base_max = m.base_max;
      a.metrics.mean_base_p75 = m.base_p75;
      a.metrics.mean_base_p95 = m.base_p95;
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline constexpr const char* kAggregateHeader =
    "dataset,scheme,rho,hr,si,delta_mu,sigma1,n_s,seeds,metric,iteration,mean,ci95";

/// aggregate.csv lines: per-iteration means of every metric, the final
/// cumulative max with its 95% half-width, and one "Base" entry per cell.
inline std::vector<std::string> aggregate_lines(const std::vector<CellAggregate>& aggs) {
  auto prefix = [](const CellKey& k, const std::string& scheme, std::size_t seeds) {
    return k.dataset + "," + scheme + "," + k.rho + "," + k.hr + "," + k.si + "," + k.delta_mu + "," + k.sigma1 +
           "," + k.n_s + "," + std::to_string(seeds);
  };
  std::vector<std::string> lines;
  std::set<CellKey> base_done;
  for (const auto& a : aggs) {
    const std::string p = prefix(a.key, a.key.scheme, a.metrics.runs);
    for (const auto& it : a.metrics.mean_iterations) {
      const std::string t = std::to_string(it.iteration);
      const std::pair<const char*, double> fields[] = {{"max", it.max},         {"p75", it.p75},
                                                       {"p95", it.p95},         {"cum_max", it.cum_max},
                                                       {"cum_p75", it.cum_p75}, {"cum_p95", it.cum_p95},
                                                       {"n_eff", it.n_eff}};
      for (const auto& [name, v] : fields) lines.push_back(p + "," + name + "," + t + "," + format_value(v) + ",");
    }
    const std::size_t t_final = a.metrics.mean_iterations.back().iteration;
    lines.push_back(p + ",final_cum_max," + std::to_string(t_final) + "," + format_value(a.metrics.mean_max) + "," +
                    (a.has_ci ? format_value(a.metrics.max_ci_half_width) : ""));
    CellKey cell = a.key;
    cell.scheme.clear();
    if (base_done.insert(cell).second) {
      const std::string b = prefix(a.key, "Base", a.metrics.runs);
      lines.push_back(b + ",max,0," + format_value(a.metrics.mean_base_max) + ",");
      lines.push_back(b + ",p75,0," + format_value(a.metrics.mean_base_p75) + ",");
      lines.push_back(b + ",p95,0," + format_value(a.metrics.mean_base_p95) + ",");
    }
  }
  return lines;
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::vector<double> x;  // category index or numeric value
  std::vector<double> y;
  std::vector<double> err;  // half-width per point, may be empty
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_categories;  // non-empty: categorical x axis
  std::vector<PlotSeries> series;
};

namespace svg_detail {

inline std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> t;
  for (double v = std::floor(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(v);
  return t;
}

}  // namespace svg_detail

inline std::string render_svg(const PlotSpec& spec) {
  using namespace svg_detail;
  const double W = 720, H = 440, left = 70, right = 190, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() || !std::isfinite(s.err[i]) ? 0.0 : s.err[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i] - e);
      ymax = std::max(ymax, s.y[i] + e);
    }
  }
  if (!spec.x_categories.empty()) {
    xmin = -0.5;
    xmax = static_cast<double>(spec.x_categories.size()) - 0.5;
  }
  if (!(xmax > xmin)) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  const auto yt = nice_ticks(ymin, ymax);
  ymin = yt.front();
  ymax = yt.back();
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  auto X = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double v) { return top + (1.0 - (v - ymin) / (ymax - ymin)) * ph; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(spec.title)
    << "</text>\n";
  o << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw) << "\" y2=\""
    << num(top + ph) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\"" << num(top + ph)
    << "\" stroke=\"black\"/>\n";
  for (double v : yt) {
    o << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(Y(v)) << "\" x2=\"" << num(left) << "\" y2=\""
      << num(Y(v)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(left - 8) << "\" y=\"" << num(Y(v) + 4) << "\" text-anchor=\"end\">" << format_number(v)
      << "</text>\n";
  }
  std::vector<std::pair<double, std::string>> xt;
  if (!spec.x_categories.empty()) {
    for (std::size_t i = 0; i < spec.x_categories.size(); ++i) xt.push_back({double(i), spec.x_categories[i]});
  } else {
    std::set<double> xs;
    for (const auto& s : spec.series) xs.insert(s.x.begin(), s.x.end());
    for (double v : xs) xt.push_back({v, format_number(v)});
  }
  for (const auto& [v, label] : xt) {
    o << "<line x1=\"" << num(X(v)) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(X(v)) << "\" y2=\""
      << num(top + ph + 4) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << num(X(v)) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">" << esc(label)
      << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 15) << "\" text-anchor=\"middle\">"
    << esc(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << esc(spec.y_label) << "</text>\n";
  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const bool base = s.label.rfind("Base", 0) == 0;
    const std::string color = base ? "#000000" : palette[si % 10];
    o << "<g>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
      << (base ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << num(X(s.x[i])) << "," << num(Y(s.y[i]));
    o << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.err.empty() && std::isfinite(s.err[i]) && s.err[i] > 0.0) {
        o << "<line x1=\"" << num(X(s.x[i])) << "\" y1=\"" << num(Y(s.y[i] - s.err[i])) << "\" x2=\""
          << num(X(s.x[i])) << "\" y2=\"" << num(Y(s.y[i] + s.err[i])) << "\" stroke=\"" << color << "\"/>\n";
      }
      o << "<circle cx=\"" << num(X(s.x[i])) << "\" cy=\"" << num(Y(s.y[i])) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(si);
    o << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 32)
      << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << num(left + pw + 38) << "\" y=\"" << num(ly + 4) << "\">" << esc(s.label) << "</text>\n</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// One plot per cell axis that takes at least two values: mean final
/// cumulative max (with 95% half-width bars) against that axis, one series
/// per scheme and combination of the other varying axes, plus "Base".
/// When no axis varies, a single cumulative-max-vs-iteration plot.
inline std::vector<std::pair<std::string, std::string>> report_plots(const std::vector<CellAggregate>& aggs) {
  struct Axis {
    const char* name;
    const char* label;
    std::string CellKey::*field;
    bool categorical;
  };
  const Axis axes[] = {{"rho", "imbalance ratio", &CellKey::rho, false},
                       {"hr", "high range", &CellKey::hr, true},
                       {"si", "sampling interval", &CellKey::si, true},
                       {"delta_mu", "mode separation", &CellKey::delta_mu, false},
                       {"sigma1", "first mode sd", &CellKey::sigma1, false},
                       {"n_s", "samples per iteration", &CellKey::n_s, false}};
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<const Axis*> varying;
  for (const auto& ax : axes) {
    std::set<std::string> vals;
    for (const auto& a : aggs) vals.insert(a.key.*(ax.field));
    if (vals.size() >= 2) varying.push_back(&ax);
  }
  const std::string dataset = aggs.empty() ? "" : aggs.front().key.dataset;
  if (varying.empty()) {
    PlotSpec p{dataset + ": cumulative max", "iteration", "cumulative max", {}, {}};
    for (const auto& a : aggs) {
      PlotSeries s{a.key.scheme, {}, {}, {}};
      for (const auto& it : a.metrics.mean_iterations) {
        s.x.push_back(static_cast<double>(it.iteration));
        s.y.push_back(it.cum_max);
      }
      p.series.push_back(std::move(s));
    }
    if (!aggs.empty()) {
      PlotSeries b{"Base", {}, {}, {}};
      for (const auto& it : aggs.front().metrics.mean_iterations) {
        b.x.push_back(static_cast<double>(it.iteration));
        b.y.push_back(aggs.front().metrics.mean_base_max);
      }
      p.series.push_back(std::move(b));
    }
    files.push_back({"max_vs_iteration.svg", render_svg(p)});
    return files;
  }
  for (const Axis* ax : varying) {
    std::vector<std::string> cats;
    {
      std::set<std::string> s;
      for (const auto& a : aggs) s.insert(a.key.*(ax->field));
      if (!ax->categorical) {
        std::vector<std::pair<double, std::string>> sorted;
        for (const auto& v : s) sorted.push_back({std::stod(v), v});
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [d, v] : sorted) cats.push_back(v);
      } else {
        cats.assign(s.begin(), s.end());
      }
    }
    auto x_of = [&](const std::string& v) {
      if (!ax->categorical) return std::stod(v);
      return static_cast<double>(std::find(cats.begin(), cats.end(), v) - cats.begin());
    };
    auto others = [&](const CellKey& k) {
      std::string label;
      for (const Axis* o : varying) {
        if (o == ax) continue;
        label += std::string(" ") + o->name + "=" + k.*(o->field);
      }
      return label;
    };
    std::map<std::string, std::map<double, std::pair<double, double>>> series;
    std::map<std::string, std::map<double, double>> base;
    for (const auto& a : aggs) {
      const double x = x_of(a.key.*(ax->field));
      series[a.key.scheme + others(a.key)][x] = {a.metrics.mean_max,
                                                 a.has_ci ? a.metrics.max_ci_half_width : 0.0};
      base["Base" + others(a.key)][x] = a.metrics.mean_base_max;
    }
    PlotSpec p{dataset + ": max vs " + ax->label, ax->label, "mean cumulative max", {}, {}};
    if (ax->categorical) p.x_categories = cats;
    for (const auto& [label, pts] : series) {
      PlotSeries s{label, {}, {}, {}};
      for (const auto& [x, ye] : pts) {
        s.x.push_back(x);
        s.y.push_back(ye.first);
        s.err.push_back(ye.second);
      }
      p.series.push_back(std::move(s));
    }
    for (const auto& [label, pts] : base) {
      PlotSeries s{label, {}, {}, {}};
      for (const auto& [x, y] : pts) {
        s.x.push_back(x);
        s.y.push_back(y);
      }
      p.series.push_back(std::move(s));
    }
    files.push_back({std::string("max_vs_") + ax->name + ".svg", render_svg(p)});
  }
  return files;
}

}  // namespace pgvae
