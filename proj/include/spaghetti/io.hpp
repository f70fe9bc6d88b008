#pragma once

// CSV input, JSON / CSV output, and the end-to-end run used by the CLI.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "spaghetti/ensemble.hpp"
#include "spaghetti/errors.hpp"
#include "spaghetti/fit.hpp"

namespace spaghetti {

inline constexpr std::string_view kVersion = "1.0.0";

enum class OutputFormat { json, csv };

struct EmitFlags {
  bool functions = true;
  bool band = true;
  bool comparators = true;

  /// Comma-separated subset of functions, band, comparators, all.
  static EmitFlags parse(std::string_view spec) {
    EmitFlags flags{false, false, false};
    bool any = false;
    while (!spec.empty()) {
      const auto comma = spec.find(',');
      const auto item = spec.substr(0, comma);
      if (item == "functions") {
        flags.functions = true;
      } else if (item == "band") {
        flags.band = true;
      } else if (item == "comparators") {
        flags.comparators = true;
      } else if (item == "all") {
        flags = EmitFlags{};
      } else {
        throw InvalidConfig("unknown --emit item '" + std::string(item) + "'");
      }
      any = true;
      if (comma == std::string_view::npos) break;
      spec.remove_prefix(comma + 1);
    }
    if (!any) throw InvalidConfig("--emit needs at least one item");
    return flags;
  }
};

inline OutputFormat parse_format(std::string_view name) {
  if (name == "json") return OutputFormat::json;
  if (name == "csv") return OutputFormat::csv;
  throw InvalidConfig("unknown format '" + std::string(name) + "' (expected json or csv)");
}

/// Evaluation grid; unset bounds default to half a span beyond the data.
struct GridSpec {
  std::optional<double> start;
  std::optional<double> end;
  std::size_t count = 401;
};

struct RunConfig {
  std::string input_path;
  std::string output_path;  ///< empty means the output stream passed to run()
  OutputFormat format = OutputFormat::json;
  GridSpec grid;
  FitConfig fit;
  EmitFlags emit;

  void validate() const {
    if (input_path.empty()) throw InvalidConfig("no input path given");
    if (grid.count < 2) throw InvalidConfig("grid count must be >= 2");
    if (grid.start && !std::isfinite(*grid.start)) throw InvalidConfig("grid start must be finite");
    if (grid.end && !std::isfinite(*grid.end)) throw InvalidConfig("grid end must be finite");
    fit.validate();
  }

  std::vector<double> grid_for(const TimeSeries& series) const {
    const auto fallback = default_grid(series, 2);
    return linspace(grid.start.value_or(fallback.front()), grid.end.value_or(fallback.back()), grid.count);
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_number(std::string_view field) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

/// Reads "x,y" lines. A first line whose first field is not a number is a
/// header. Blank lines are skipped. Points are sorted by x.
inline TimeSeries parse_csv(std::istream& in) {
  std::vector<Point> points;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    const bool first = !seen_content;
    seen_content = true;
    const auto comma = line.find(',');
    const auto x = detail::parse_number(line.substr(0, comma));
    if (first && !x) continue;  // header
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError(line_no, std::string(line));
    const auto y = detail::parse_number(line.substr(comma + 1));
    if (!x || !y) throw ParseError(line_no, std::string(line));
    points.push_back({*x, *y});
  }
  return TimeSeries(std::move(points));
}

inline TimeSeries parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file: " + path.string());
  return parse_csv(in);
}

/// 17 significant digits, locale independent. Non-finite values give "nan",
/// "inf" or "-inf".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace detail {

class JsonWriter {
public:
  explicit JsonWriter(std::ostream& os) : os_(os) {}

  void begin_object() { open('{'); }
  void end_object() { close('}'); }
  void begin_array() { open('['); }
  void end_array() { close(']'); }

  void key(std::string_view k) {
    separate();
    string_literal(k);
    os_ << ':';
    after_key_ = true;
  }

  void number(double v) {
    separate();
    os_ << (std::isfinite(v) ? format_number(v) : "null");
  }
  void integer(std::size_t v) {
    separate();
    os_ << v;
  }
  void string(std::string_view s) {
    separate();
    string_literal(s);
  }
  void null() {
    separate();
    os_ << "null";
  }

  void numbers(std::span<const double> values) {
    begin_array();
    for (double v : values) number(v);
    end_array();
  }

private:
  void open(char c) {
    separate();
    os_ << c;
    first_.push_back(true);
  }
  void close(char c) {
    first_.pop_back();
    os_ << c;
  }
  void separate() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (!first_.empty()) {
      if (!first_.back()) os_ << ',';
      first_.back() = false;
    }
  }
  void string_literal(std::string_view s) {
    os_ << '"';
    for (char c : s) {
      switch (c) {
        case '"': os_ << "\\\""; break;
        case '\\': os_ << "\\\\"; break;
        case '\n': os_ << "\\n"; break;
        case '\t': os_ << "\\t"; break;
        default: os_ << c;
      }
    }
    os_ << '"';
  }

  std::ostream& os_;
  std::vector<bool> first_;
  bool after_key_ = false;
};

inline void write_values(JsonWriter& w, std::span<const double> xs, const auto& f) {
  w.key("values");
  w.begin_array();
  for (double x : xs) w.number(f(x));
  w.end_array();
}

}  // namespace detail

inline void write_json(std::ostream& os, const Ensemble& e, const PredictionBand& b, const RunConfig& cfg) {
  detail::JsonWriter w(os);
  w.begin_object();
  w.key("version");
  w.string(kVersion);

  w.key("config");
  w.begin_object();
  w.key("lambda_lo");
  w.number(cfg.fit.lambda_grid.lo);
  w.key("lambda_hi");
  w.number(cfg.fit.lambda_grid.hi);
  w.key("lambda_points_per_decade");
  w.integer(static_cast<std::size_t>(cfg.fit.lambda_grid.points_per_decade));
  w.key("sigma_lo_factor");
  w.number(cfg.fit.sigma_range.lo_factor);
  w.key("sigma_hi_factor");
  w.number(cfg.fit.sigma_range.hi_factor);
  w.key("sigma_grid_points");
  w.integer(static_cast<std::size_t>(cfg.fit.grid_points));
  w.key("refine_iterations");
  w.integer(static_cast<std::size_t>(cfg.fit.refine_iterations));
  w.key("grid_start");
  w.number(b.xs.front());
  w.key("grid_end");
  w.number(b.xs.back());
  w.key("grid_count");
  w.integer(b.xs.size());
  w.end_object();

  w.key("points");
  w.begin_array();
  for (const auto& p : e.series.points()) {
    w.begin_object();
    w.key("x");
    w.number(p.x);
    w.key("y");
    w.number(p.y);
    w.end_object();
  }
  w.end_array();

  if (cfg.emit.functions) {
    w.key("functions");
    w.begin_array();
    for (const auto& f : e.functions) {
      w.begin_object();
      w.key("left_out");
      w.integer(*f.left_out);
      w.key("a");
      w.number(f.line.a);
      w.key("b");
      w.number(f.line.b);
      w.key("sigma");
      w.number(f.basis.sigma());
      w.key("lambda");
      w.number(f.lambda);
      w.key("loo_error");
      w.number(loo_error(e.series, f, *f.left_out));
      w.key("centers");
      w.numbers(f.basis.centers());
      w.key("weights");
      w.numbers(f.weights);
      detail::write_values(w, b.xs, f);
      w.end_object();
    }
    w.end_array();
  }

  if (cfg.emit.band) {
    w.key("band");
    w.begin_object();
    w.key("xs");
    w.numbers(b.xs);
    w.key("mu");
    w.numbers(b.mu);
    w.key("s");
    w.numbers(b.s);
    w.key("lower");
    w.numbers(b.lower);
    w.key("upper");
    w.numbers(b.upper);
    w.key("median");
    w.numbers(b.median);
    w.end_object();
  }

  if (cfg.emit.comparators) {
    const auto& g = e.comparators.g;
    const auto& h = e.comparators.h;
    w.key("comparators");
    w.begin_object();
    w.key("g");
    w.begin_object();
    w.key("a");
    w.number(g.a);
    w.key("b");
    w.number(g.b);
    detail::write_values(w, b.xs, g);
    w.end_object();
    w.key("h");
    w.begin_object();
    w.key("a");
    w.number(h.line.a);
    w.key("b");
    w.number(h.line.b);
    w.key("sigma");
    w.number(h.basis.sigma());
    w.key("roughness");
    w.number(roughness(h));
    w.key("centers");
    w.numbers(h.basis.centers());
    w.key("weights");
    w.numbers(h.weights);
    detail::write_values(w, b.xs, h);
    w.end_object();
    w.end_object();
  }
  w.end_object();
  os << '\n';
}

/// Header "x,mu,s,lower,upper,median", one row per grid point.
inline void write_band_csv(std::ostream& os, const PredictionBand& b) {
  os << "x,mu,s,lower,upper,median\n";
  for (std::size_t k = 0; k < b.xs.size(); ++k) {
    os << format_number(b.xs[k]) << ',' << format_number(b.mu[k]) << ',' << format_number(b.s[k]) << ','
       << format_number(b.lower[k]) << ',' << format_number(b.upper[k]) << ',' << format_number(b.median[k])
       << '\n';
  }
}

enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitNumericalFailure = 2 };

/// Runs the whole pipeline. Errors are reported on `err` and mapped to exit
/// codes: 1 for bad input or configuration, 2 for numerical failure.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    const TimeSeries series = parse_csv(std::filesystem::path(cfg.input_path));
    const Ensemble e = build_ensemble(series, cfg.fit);
    const auto xs = cfg.grid_for(series);
    const PredictionBand b = band(e, xs);

    std::ostringstream doc;
    if (cfg.format == OutputFormat::json)
      write_json(doc, e, b, cfg);
    else
      write_band_csv(doc, b);

    if (cfg.output_path.empty()) {
      out << doc.str();
      out.flush();
    } else {
      std::ofstream file(cfg.output_path, std::ios::binary);
      if (!file || !(file << doc.str()) || !file.flush())
        throw IoError("cannot write output file: " + cfg.output_path);
    }
    return kExitOk;
  } catch (const NotPositiveDefinite& ex) {
    err << "error: numerical failure: " << ex.what() << '\n';
    return kExitNumericalFailure;
  } catch (const ParseError& ex) {
    err << "error: " << cfg.input_path << ": " << ex.what() << '\n';
    return kExitInputError;
  } catch (const DegenerateInput& ex) {
    err << "error: " << cfg.input_path << ": degenerate input: " << ex.what() << '\n';
    return kExitInputError;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& ex) {
    err << "error: numerical failure: " << ex.what() << '\n';
    return kExitNumericalFailure;
  }
}

}  // namespace spaghetti
