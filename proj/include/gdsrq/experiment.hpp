#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "gdsrq/analysis.hpp"
#include "gdsrq/network.hpp"
#include "gdsrq/objectives.hpp"
#include "gdsrq/quantization.hpp"
#include "gdsrq/schedule.hpp"
#include "gdsrq/simulator.hpp"

namespace gdsrq {

// --- number formatting ------------------------------------------------------

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::invalid_argument(what + ": not a number: '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument(what + ": not a non-negative integer: '" + std::string(s) + "'");
  return v;
}

namespace detail {
inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}
}  // namespace detail

// --- configuration files ----------------------------------------------------

/// One experiment; defaults reproduce the 50-agent linear-regression setup.
struct ExperimentConfig {
  std::uint64_t n_agents = 50;
  std::uint64_t dim = 10;
  double radius = 0.3;
  unsigned bits = 4;
  Schedule schedule{};
  std::uint64_t iterations = 10'000;
  std::uint64_t seed = 1;
  std::uint64_t cadence = 10;
  std::string objective = "regression";

  bool operator==(const ExperimentConfig& o) const {
    return n_agents == o.n_agents && dim == o.dim && radius == o.radius && bits == o.bits &&
           schedule.alpha0 == o.schedule.alpha0 &&
           schedule.lambda_alpha == o.schedule.lambda_alpha &&
           schedule.beta0 == o.schedule.beta0 && schedule.lambda_beta == o.schedule.lambda_beta &&
           schedule.lambda_gamma == o.schedule.lambda_gamma && iterations == o.iterations &&
           seed == o.seed && cadence == o.cadence && objective == o.objective;
  }
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "n_agents", "dim",        "radius",      "bits",       "alpha0",
      "lambda_alpha", "beta0",  "lambda_beta", "lambda_gamma", "iterations",
      "seed",     "cadence",    "objective"};
  return keys;
}

using KeyValues = std::map<std::string, std::string>;

/// "key = value" per line; '#' starts a comment; blank lines are ignored.
inline KeyValues parse_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");
    if (!kv.emplace(key, value).second)
      throw std::invalid_argument("config: duplicate key '" + key + "'");
  }
  return kv;
}

/// Builds an ExperimentConfig from parsed pairs. Every config key must be
/// present; keys in `extra_allowed` are skipped, anything else is an error.
inline ExperimentConfig config_from_key_values(const KeyValues& kv,
                                               const std::set<std::string>& extra_allowed = {}) {
  std::vector<std::string> missing, unknown;
  for (const auto& key : config_keys())
    if (!kv.contains(key)) missing.push_back(key);
  for (const auto& [key, value] : kv)
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end() &&
        !extra_allowed.contains(key))
      unknown.push_back(key);
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = "invalid config:";
    if (!missing.empty()) {
      msg += " missing keys";
      for (const auto& k : missing) msg += " '" + k + "'";
      msg += ";";
    }
    if (!unknown.empty()) {
      msg += " unknown keys";
      for (const auto& k : unknown) msg += " '" + k + "'";
      msg += ";";
    }
    throw std::invalid_argument(msg);
  }
  auto num = [&](const char* key) { return parse_double(kv.at(key), std::string("key '") + key + "'"); };
  auto u64 = [&](const char* key) { return parse_u64(kv.at(key), std::string("key '") + key + "'"); };

  ExperimentConfig c;
  c.n_agents = u64("n_agents");
  c.dim = u64("dim");
  c.radius = num("radius");
  c.bits = static_cast<unsigned>(u64("bits"));
  c.schedule.alpha0 = num("alpha0");
  c.schedule.lambda_alpha = num("lambda_alpha");
  c.schedule.beta0 = num("beta0");
  c.schedule.lambda_beta = num("lambda_beta");
  c.schedule.lambda_gamma = num("lambda_gamma");
  c.iterations = u64("iterations");
  c.seed = u64("seed");
  c.cadence = u64("cadence");
  c.objective = kv.at("objective");

  if (c.n_agents < 1) throw std::invalid_argument("key 'n_agents': must be >= 1");
  if (c.dim < 1) throw std::invalid_argument("key 'dim': must be >= 1");
  if (!(c.radius > 0.0)) throw std::invalid_argument("key 'radius': must be > 0");
  if (c.bits > QuantizerConfig::kMaxBits)
    throw std::invalid_argument("key 'bits': must be in [0, 52] (0 = no quantization)");
  if (c.cadence < 1) throw std::invalid_argument("key 'cadence': must be >= 1");
  if (c.objective != "regression" && c.objective != "centers")
    throw std::invalid_argument("key 'objective': expected 'regression' or 'centers', got '" +
                                c.objective + "'");
  return c;
}

inline ExperimentConfig read_config(std::istream& is) {
  return config_from_key_values(parse_key_values(is));
}

inline ExperimentConfig read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  return read_config(in);
}

inline void write_config(std::ostream& os, const ExperimentConfig& c) {
  os << "n_agents = " << c.n_agents << '\n'
     << "dim = " << c.dim << '\n'
     << "radius = " << format_double(c.radius) << '\n'
     << "bits = " << c.bits << '\n'
     << "alpha0 = " << format_double(c.schedule.alpha0) << '\n'
     << "lambda_alpha = " << format_double(c.schedule.lambda_alpha) << '\n'
     << "beta0 = " << format_double(c.schedule.beta0) << '\n'
     << "lambda_beta = " << format_double(c.schedule.lambda_beta) << '\n'
     << "lambda_gamma = " << format_double(c.schedule.lambda_gamma) << '\n'
     << "iterations = " << c.iterations << '\n'
     << "seed = " << c.seed << '\n'
     << "cadence = " << c.cadence << '\n'
     << "objective = " << c.objective << '\n';
}

// --- problem assembly -------------------------------------------------------

/// Topology, data and reference optimum derived from (config, seed). Only the
/// seed and the problem-shape keys matter, so cells of a bit sweep that share
/// a seed share the same problem.
struct Problem {
  Graph graph;
  std::shared_ptr<MixingMatrix> mixing;
  std::shared_ptr<const ObjectiveSpec> objective;
  std::shared_ptr<const ReferenceSolution> reference;
  std::optional<Dataset> dataset;
};

inline Problem build_problem(const ExperimentConfig& c) {
  Problem p;
  p.graph = generate_geometric_graph(c.n_agents, c.radius, c.seed);
  p.mixing = std::make_shared<MixingMatrix>(lazy_metropolis(p.graph));
  second_largest_eigenvalue(*p.mixing);
  if (c.objective == "regression") {
    p.dataset = generate_synthetic_dataset(c.n_agents, c.dim, c.seed);
    p.objective = std::make_shared<const ObjectiveSpec>(linear_regression_objective(*p.dataset));
  } else {
    p.objective =
        std::make_shared<const ObjectiveSpec>(synthetic_centers_objective(c.n_agents, c.dim, c.seed));
  }
  p.reference = std::make_shared<const ReferenceSolution>(reference_optimum(*p.objective));
  return p;
}

inline RunConfig make_run_config(const ExperimentConfig& c, const Problem& p, unsigned threads = 1,
                                 bool waive_validation = false) {
  RunConfig rc;
  rc.objective = p.objective;
  rc.mixing = p.mixing;
  rc.reference = p.reference;
  rc.quantizer = QuantizerConfig::from_bits(c.bits);
  rc.schedule = c.schedule;
  rc.iterations = c.iterations;
  rc.seed = c.seed;
  rc.cadence = c.cadence;
  rc.threads = threads;
  rc.waive_validation = waive_validation;
  return rc;
}

// --- trajectory and reference files -----------------------------------------

inline constexpr const char* kTrajectoryHeader = "k,r_k,consensus_sq,gap_z,gap_xbar";

inline void write_trajectory_csv(std::ostream& os, const RunTrajectory& t) {
  std::string out = kTrajectoryHeader;
  out += '\n';
  for (const auto& r : t.records) {
    out += std::to_string(r.k);
    for (double v : {r.r_k, r.consensus_sq, r.gap_z, r.gap_xbar}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  os << out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(detail::trim(cell));
  return cells;
}

inline std::vector<TrajectoryRecord> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kTrajectoryHeader)
    throw std::invalid_argument("trajectory csv: missing header '" +
                                std::string(kTrajectoryHeader) + "'");
  std::vector<TrajectoryRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = "trajectory csv line " + std::to_string(lineno);
    if (cells.size() != 5) throw std::invalid_argument(where + ": expected 5 columns");
    TrajectoryRecord r;
    r.k = parse_u64(cells[0], where);
    r.r_k = parse_double(cells[1], where);
    r.consensus_sq = parse_double(cells[2], where);
    r.gap_z = parse_double(cells[3], where);
    r.gap_xbar = parse_double(cells[4], where);
    out.push_back(r);
  }
  return out;
}

inline void write_reference(std::ostream& os, const ReferenceSolution& ref) {
  os << "x_star =";
  for (std::size_t i = 0; i < ref.x_star.size(); ++i)
    os << (i == 0 ? " " : ",") << format_double(ref.x_star[i]);
  os << "\nf_star = " << format_double(ref.f_star) << "\ntol = " << format_double(ref.tol)
     << "\niterations = " << ref.iterations << "\nresidual = " << format_double(ref.residual)
     << '\n';
}

inline ReferenceSolution read_reference(std::istream& is) {
  const auto kv = parse_key_values(is);
  for (const char* key : {"x_star", "f_star", "tol", "iterations", "residual"})
    if (!kv.contains(key)) throw std::invalid_argument(std::string("reference: missing '") + key + "'");
  ReferenceSolution ref;
  for (const auto& cell : split_csv_line(kv.at("x_star")))
    ref.x_star.push_back(parse_double(cell, "reference x_star"));
  ref.f_star = parse_double(kv.at("f_star"), "reference f_star");
  ref.tol = parse_double(kv.at("tol"), "reference tol");
  ref.iterations = parse_u64(kv.at("iterations"), "reference iterations");
  ref.residual = parse_double(kv.at("residual"), "reference residual");
  return ref;
}

// --- SVG line chart ---------------------------------------------------------

struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (k, value)
};

/// Static line chart with a log10 y axis. Output depends only on the input.
inline std::string svg_line_chart(const std::vector<ChartSeries>& series, const std::string& title,
                                  const std::string& y_label) {
  constexpr double W = 720, H = 460, left = 80, right = 150, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (!(y > 0.0)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, std::log10(y));
      ymax = std::max(ymax, std::log10(y));
    }
  if (!(xmin < xmax)) { xmin = 0; xmax = std::isfinite(xmax) ? xmax + 1 : 1; }
  double lo = std::isfinite(ymin) ? std::floor(ymin) : 0.0;
  double hi = std::isfinite(ymax) ? std::ceil(ymax) : 1.0;
  if (hi <= lo) hi = lo + 1;

  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double ly) { return top + (hi - ly) / (hi - lo) * ph; };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << title << "</text>\n"
     << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = lo; e <= hi; e += 1.0) {
    os << "<line x1=\"" << left << "\" x2=\"" << fmt(left + pw) << "\" y1=\"" << fmt(sy(e))
       << "\" y2=\"" << fmt(sy(e)) << "\" stroke=\"#dddddd\"/>\n"
       << "<text x=\"" << left - 6 << "\" y=\"" << fmt(sy(e) + 4)
       << "\" text-anchor=\"end\">1e" << static_cast<int>(e) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4.0;
    os << "<text x=\"" << fmt(sx(x)) << "\" y=\"" << fmt(top + ph + 18)
       << "\" text-anchor=\"middle\">" << static_cast<long long>(std::llround(x)) << "</text>\n";
  }
  os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << H - 15
     << "\" text-anchor=\"middle\">iteration k</text>\n"
     << "<text x=\"18\" y=\"" << fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << fmt(top + ph / 2) << ")\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (auto [x, y] : series[s].points) {
      if (!(y > 0.0)) continue;
      os << (first ? "" : " ") << fmt(sx(x)) << ',' << fmt(sy(std::log10(y)));
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 16 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << fmt(left + pw + 12) << "\" x2=\"" << fmt(left + pw + 36) << "\" y1=\""
       << fmt(ly) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << fmt(left + pw + 42) << "\" y=\"" << fmt(ly + 4) << "\">" << series[s].label
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// --- sweeps -----------------------------------------------------------------

struct SweepSpec {
  ExperimentConfig base;
  std::string parameter = "bits";  // bits | lambda_alpha | lambda_beta | seeds
  std::vector<double> values;
  std::uint64_t seeds_per_cell = 10;
  bool waive_validation = false;
};

inline SweepSpec read_sweep_spec(std::istream& is) {
  const auto kv = parse_key_values(is);
  SweepSpec s;
  s.base = config_from_key_values(kv, {"sweep", "values", "seeds_per_cell", "waive_validation"});
  if (!kv.contains("sweep") || !kv.contains("values"))
    throw std::invalid_argument("invalid sweep spec: keys 'sweep' and 'values' are required");
  s.parameter = kv.at("sweep");
  if (s.parameter != "bits" && s.parameter != "lambda_alpha" && s.parameter != "lambda_beta" &&
      s.parameter != "seeds")
    throw std::invalid_argument("key 'sweep': expected bits | lambda_alpha | lambda_beta | seeds");
  for (const auto& cell : split_csv_line(kv.at("values")))
    s.values.push_back(parse_double(cell, "key 'values'"));
  if (s.values.empty()) throw std::invalid_argument("key 'values': empty list");
  if (kv.contains("seeds_per_cell"))
    s.seeds_per_cell = parse_u64(kv.at("seeds_per_cell"), "key 'seeds_per_cell'");
  if (s.seeds_per_cell < 1) throw std::invalid_argument("key 'seeds_per_cell': must be >= 1");
  if (kv.contains("waive_validation")) s.waive_validation = kv.at("waive_validation") == "true";
  return s;
}

struct SweepCell {
  double value = 0.0;
  ExperimentConfig config;
  bool ok = false;
  std::string error;
  RunTrajectory trajectory;
};

struct SweepPoint {
  std::uint64_t k = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct SweepResult {
  std::string parameter;
  std::vector<double> values;
  std::vector<SweepCell> cells;
  std::vector<std::vector<SweepPoint>> averaged_gap_z;  // one series per value

  bool all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const SweepCell& c) { return c.ok; });
  }
};

inline ExperimentConfig cell_config(const SweepSpec& spec, double value, std::uint64_t replicate) {
  ExperimentConfig c = spec.base;
  if (spec.parameter == "bits") {
    if (value < 0 || value != std::floor(value))
      throw std::invalid_argument("sweep: bits values must be non-negative integers");
    c.bits = static_cast<unsigned>(value);
  } else if (spec.parameter == "lambda_alpha") {
    c.schedule.lambda_alpha = value;
  } else if (spec.parameter == "lambda_beta") {
    c.schedule.lambda_beta = value;
  }
  if (spec.parameter == "seeds") {
    c.seed = static_cast<std::uint64_t>(value);
  } else {
    c.seed = spec.base.seed + replicate;
  }
  return c;
}

inline std::string value_label(double v) { return format_double(v); }

/// Runs every (value, seed) cell. Cells sharing a seed share one Problem.
/// Failed cells are recorded and the sweep continues.
inline SweepResult run_sweep(const SweepSpec& spec, unsigned threads = 1) {
  SweepResult res;
  res.parameter = spec.parameter;
  res.values = spec.values;
  const std::uint64_t reps = spec.parameter == "seeds" ? 1 : spec.seeds_per_cell;
  for (double v : spec.values)
    for (std::uint64_t r = 0; r < reps; ++r) {
      SweepCell cell;
      cell.value = v;
      try {
        cell.config = cell_config(spec, v, r);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      res.cells.push_back(std::move(cell));
    }

  std::map<std::uint64_t, std::shared_ptr<const Problem>> problems;
  std::mutex problems_mutex;
  auto problem_for = [&](const ExperimentConfig& c) {
    {
      std::lock_guard lock(problems_mutex);
      if (auto it = problems.find(c.seed); it != problems.end()) return it->second;
    }
    auto p = std::make_shared<const Problem>(build_problem(c));
    std::lock_guard lock(problems_mutex);
    return problems.emplace(c.seed, p).first->second;
  };
  auto run_cell = [&](SweepCell& cell) {
    if (!cell.error.empty()) return;
    try {
      const auto problem = problem_for(cell.config);
      cell.trajectory = run(make_run_config(cell.config, *problem, 1, spec.waive_validation));
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };
  const unsigned team = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(res.cells.size())));
  if (team == 1) {
    for (auto& cell : res.cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < team; ++t)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < res.cells.size(); i = next++) run_cell(res.cells[i]);
      });
  }

  for (double v : spec.values) {
    std::vector<const RunTrajectory*> group;
    for (const auto& cell : res.cells)
      if (cell.value == v && cell.ok) group.push_back(&cell.trajectory);
    std::vector<SweepPoint> pts;
    if (!group.empty()) {
      std::size_t len = group.front()->records.size();
      for (const auto* t : group) len = std::min(len, t->records.size());
      for (std::size_t i = 0; i < len; ++i) {
        double sum = 0.0, sq = 0.0;
        for (const auto* t : group) sum += t->records[i].gap_z;
        const double n = static_cast<double>(group.size());
        const double mean = sum / n;
        for (const auto* t : group) sq += (t->records[i].gap_z - mean) * (t->records[i].gap_z - mean);
        const double se = group.size() > 1 ? std::sqrt(sq / (n - 1.0) / n) : 0.0;
        pts.push_back({group.front()->records[i].k, mean, se});
      }
    }
    res.averaged_gap_z.push_back(std::move(pts));
  }
  return res;
}

inline constexpr const char* kSweepHeader = "value,k,gap_z_mean,gap_z_stderr";

inline void write_sweep_csv(std::ostream& os, const SweepResult& res) {
  std::string out = kSweepHeader;
  out += '\n';
  for (std::size_t v = 0; v < res.values.size(); ++v)
    for (const auto& p : res.averaged_gap_z[v])
      out += format_double(res.values[v]) + ',' + std::to_string(p.k) + ',' +
             format_double(p.mean) + ',' + format_double(p.stderr_) + '\n';
  os << out;
}

/// Rows of a combined sweep CSV as (value, point).
inline std::vector<std::pair<double, SweepPoint>> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kSweepHeader)
    throw std::invalid_argument("sweep csv: missing header");
  std::vector<std::pair<double, SweepPoint>> out;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw std::invalid_argument("sweep csv: expected 4 columns");
    out.emplace_back(parse_double(cells[0], "sweep csv"),
                     SweepPoint{parse_u64(cells[1], "sweep csv"), parse_double(cells[2], "sweep csv"),
                                parse_double(cells[3], "sweep csv")});
  }
  return out;
}

inline std::string sweep_chart(const SweepResult& res) {
  std::vector<ChartSeries> series;
  for (std::size_t v = 0; v < res.values.size(); ++v) {
    ChartSeries s;
    s.label = res.parameter + " = " + value_label(res.values[v]);
    for (const auto& p : res.averaged_gap_z[v]) s.points.emplace_back(static_cast<double>(p.k), p.mean);
    series.push_back(std::move(s));
  }
  return svg_line_chart(series, "seed-averaged f(z_k) - f* by " + res.parameter, "f(z_k) - f*");
}

// --- command-line verbs -----------------------------------------------------

struct CliOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> bits;
  std::optional<std::uint64_t> iterations;
  bool waive_validation = false;
  unsigned threads = 1;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitValidationFailure = 2;

inline void apply_overrides(ExperimentConfig& c, const CliOptions& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.bits) {
    if (*o.bits > QuantizerConfig::kMaxBits) throw std::invalid_argument("--bits must be in [0, 52]");
    c.bits = *o.bits;
  }
  if (o.iterations) c.iterations = *o.iterations;
}

namespace detail {
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

template <class Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}
}  // namespace detail

/// Prints the schedule and weight-condition tables; true iff every
/// hypothesis of the applicable result holds.
inline bool print_validation(std::ostream& out, const ExperimentConfig& c, const Problem& p) {
  const double mu = p.objective->convexity.mu();
  const double sigma2 = p.mixing->sigma2;
  out << "topology: n = " << c.n_agents << ", radius = " << c.radius << ", edges = "
      << p.graph.edges().size() << ", attempts = " << p.graph.attempts()
      << ", sigma2 = " << format_double(sigma2) << '\n';
  out << "objective: " << p.objective->name << ", mu = " << format_double(mu)
      << ", L = " << format_double(p.objective->lipschitz_global) << '\n';
  out << "\nstepsize conditions\n";
  const auto sched = validate_schedule(c.schedule, mu, sigma2);
  out << sched;
  std::vector<std::uint64_t> ladder{100, 1000, 10000};
  if (c.iterations > 10000) ladder.push_back(c.iterations);
  const auto weights = weight_condition_check(c.schedule, sigma2, ladder, mu);
  out << "\ntime-average weight conditions (K = ";
  for (std::size_t i = 0; i < ladder.size(); ++i) out << (i ? ", " : "") << ladder[i];
  out << ")\n" << weights.checks;
  out << "convex weight set: " << (weights.convex_set_holds ? "holds" : "violated")
      << "; strongly convex weight set: " << (weights.strong_set_holds ? "holds" : "violated")
      << '\n';
  const bool weights_ok = weights.convex_set_holds || (mu > 0.0 && weights.strong_set_holds);
  return sched.passed() && weights_ok;
}

inline int cli_validate(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig c = read_config_file(o.config);
    apply_overrides(c, o);
    const Problem p = build_problem(c);
    const bool ok = print_validation(out, c, p);
    return ok ? kExitOk : kExitValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

inline std::string run_summary(const ExperimentConfig& c, const Problem& p, const RunTrajectory& t,
                               const ValidationReport& validation, bool waived) {
  std::ostringstream os;
  const auto& last = t.records.back();
  os << "fingerprint = " << t.fingerprint << '\n'
     << "sigma2 = " << format_double(p.mixing->sigma2) << '\n'
     << "f_star = " << format_double(p.reference->f_star) << '\n'
     << "final_k = " << last.k << '\n'
     << "final_r_k = " << format_double(last.r_k) << '\n'
     << "final_consensus_sq = " << format_double(last.consensus_sq) << '\n'
     << "final_gap_z = " << format_double(last.gap_z) << '\n'
     << "final_gap_xbar = " << format_double(last.gap_xbar) << '\n'
     << "predicted_rate = "
     << format_double(predicted_rate(c.schedule.lambda_alpha, c.schedule.lambda_beta)) << '\n';
  try {
    const auto series = t.series(&TrajectoryRecord::gap_z);
    const auto fit = fit_empirical_rate(series, 0.5);
    os << "fitted_rate_gap_z = " << format_double(fit.slope) << '\n';
  } catch (const std::exception&) {
    os << "fitted_rate_gap_z = n/a\n";
  }
  os << "negative_gap_flags = " << t.negative_gap_flags << '\n'
     << "schedule_validation = "
     << (validation.passed() ? "pass" : (waived ? "fail (waived)" : "fail")) << '\n';
  return os.str();
}

inline int cli_run(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig c = read_config_file(o.config);
    apply_overrides(c, o);
    const Problem p = build_problem(c);
    const auto validation = validate_schedule(c.schedule, p.objective->convexity.mu(), p.mixing->sigma2);
    if (!validation.passed() && !o.waive_validation) {
      err << "schedule validation failed (use --waive-validation to run anyway):\n" << validation;
      return kExitValidationFailure;
    }
    const auto traj = run(make_run_config(c, p, o.threads, o.waive_validation));
    std::filesystem::create_directories(o.out_dir);
    detail::write_file(o.out_dir / "trajectory.csv",
                       detail::to_text([&](std::ostream& os) { write_trajectory_csv(os, traj); }));
    const std::string summary = run_summary(c, p, traj, validation, o.waive_validation);
    detail::write_file(o.out_dir / "summary.txt", summary);
    detail::write_file(o.out_dir / "reference.txt",
                       detail::to_text([&](std::ostream& os) { write_reference(os, *p.reference); }));
    detail::write_file(o.out_dir / "config.txt",
                       detail::to_text([&](std::ostream& os) { write_config(os, c); }));
    detail::write_file(o.out_dir / "graph_edges.txt",
                       detail::to_text([&](std::ostream& os) { write_edge_list(os, p.graph); }));
    detail::write_file(o.out_dir / "graph_coords.txt",
                       detail::to_text([&](std::ostream& os) { write_coordinates(os, p.graph); }));
    detail::write_file(o.out_dir / "mixing.csv",
                       detail::to_text([&](std::ostream& os) { write_matrix_csv(os, *p.mixing); }));
    if (p.dataset)
      detail::write_file(o.out_dir / "dataset.csv",
                         detail::to_text([&](std::ostream& os) { write_dataset_csv(os, *p.dataset); }));
    out << summary;
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

inline int cli_sweep(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(o.config);
    if (!in) throw std::runtime_error("cannot read sweep spec " + o.config.string());
    SweepSpec spec = read_sweep_spec(in);
    apply_overrides(spec.base, o);
    spec.waive_validation = spec.waive_validation || o.waive_validation;
    const SweepResult res = run_sweep(spec, o.threads);

    const auto cell_dir = o.out_dir / "cells";
    std::filesystem::create_directories(cell_dir);
    std::size_t failed = 0;
    for (const auto& cell : res.cells) {
      if (!cell.ok) {
        ++failed;
        err << "cell " << spec.parameter << "=" << value_label(cell.value) << " seed "
            << cell.config.seed << " failed: " << cell.error << '\n';
        continue;
      }
      const auto name = spec.parameter + "-" + value_label(cell.value) + "_seed-" +
                        std::to_string(cell.config.seed) + ".csv";
      detail::write_file(cell_dir / name, detail::to_text([&](std::ostream& os) {
                           write_trajectory_csv(os, cell.trajectory);
                         }));
    }
    detail::write_file(o.out_dir / "sweep_gap_z.csv",
                       detail::to_text([&](std::ostream& os) { write_sweep_csv(os, res); }));
    detail::write_file(o.out_dir / "sweep_gap_z.svg", sweep_chart(res));

    out << "sweep over " << spec.parameter << ": " << res.cells.size() << " cells, " << failed
        << " failed\n";
    for (std::size_t v = 0; v < res.values.size(); ++v) {
      if (res.averaged_gap_z[v].empty()) continue;
      const auto& last = res.averaged_gap_z[v].back();
      out << "  " << spec.parameter << " = " << value_label(res.values[v]) << ": final mean gap_z = "
          << format_double(last.mean) << " (stderr " << format_double(last.stderr_) << ")\n";
    }
    return failed == 0 ? kExitOk : kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace gdsrq
