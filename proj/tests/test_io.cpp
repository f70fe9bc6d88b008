#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "harness.hpp"
#include "process.hpp"
#include "spaghetti/io.hpp"

using namespace spaghetti;
using spaghetti::test_support::quoted;
using spaghetti::test_support::run_command;

namespace {

const std::string kData = SPAGHETTI_DATA_DIR;
const std::string kCli = SPAGHETTI_CLI;

TimeSeries parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

struct RunOutput {
  int code;
  std::string out;
  std::string err;
};

RunOutput run_with(RunConfig cfg) {
  std::ostringstream out, err;
  const int code = run(cfg, out, err);
  return {code, out.str(), err.str()};
}

RunConfig config_for(const std::string& file) {
  RunConfig cfg;
  cfg.input_path = kData + "/" + file;
  return cfg;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

TEST(ParseCsv, HeaderAndThreePoints) {
  const auto s = parse_text("x,y\n0,1\n1,3\n2,5\n");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[2].y, 5.0);
}

TEST(ParseCsv, NoHeaderBlankLinesAndUnsortedInput) {
  const auto s = parse_text("\n2, 5\r\n0,1\n\n 1 ,3\n");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].x, 0.0);
  EXPECT_EQ(s[1].x, 1.0);
  EXPECT_EQ(s[2].x, 2.0);
}

TEST(ParseCsv, DuplicateXIsDegenerate) {
  try {
    parse_text("0,1\n0,2\n1,3\n");
    FAIL() << "expected DegenerateInput";
  } catch (const DegenerateInput& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate x=0"), std::string::npos);
  }
}

TEST(ParseCsv, BadNumberReportsLine) {
  try {
    parse_text("0,1\n1,abc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.text(), "1,abc");
  }
}

TEST(ParseCsv, WrongFieldCountAndNonFinite) {
  EXPECT_THROW(parse_text("0,1\n1,2,3\n2,2\n"), ParseError);
  EXPECT_THROW(parse_text("0,1\n1\n2,2\n"), ParseError);
  EXPECT_THROW(parse_text("0,1\n1,inf\n2,2\n"), ParseError);
  EXPECT_THROW(parse_text("0,1\nx,y\n2,2\n"), ParseError);  // header only allowed first
}

TEST(ParseCsv, TooFewPoints) { EXPECT_THROW(parse_text("x,y\n0,1\n1,2\n"), DegenerateInput); }

TEST(ParseCsv, MissingFile) {
  EXPECT_THROW(parse_csv(std::filesystem::path("/nonexistent/series.csv")), IoError);
}

TEST(ParseCsv, CommittedDemoFileMatchesHarness) {
  const auto s = parse_csv(std::filesystem::path(kData + "/demo_series.csv"));
  const auto d = harness::demo_series();
  ASSERT_EQ(s.size(), d.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].x, d[i].x);
    EXPECT_EQ(s[i].y, d[i].y);
  }
}

TEST(FormatNumber, SeventeenSignificantDigitsRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.33333333333333331");
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  char ref[64];
  for (int k = 0; k < 200; ++k) {
    const double v = u(gen) * std::pow(10.0, k % 40 - 20);
    std::snprintf(ref, sizeof ref, "%.17g", v);
    EXPECT_EQ(format_number(v), ref);
    EXPECT_EQ(std::strtod(format_number(v).c_str(), nullptr), v);
  }
}

TEST(EmitFlags, ParsesClosedSet) {
  const auto all = EmitFlags::parse("all");
  EXPECT_TRUE(all.functions && all.band && all.comparators);
  const auto some = EmitFlags::parse("band,comparators");
  EXPECT_FALSE(some.functions);
  EXPECT_TRUE(some.band && some.comparators);
  EXPECT_THROW(EmitFlags::parse("bands"), InvalidConfig);
  EXPECT_THROW(EmitFlags::parse(""), InvalidConfig);
  EXPECT_EQ(parse_format("csv"), OutputFormat::csv);
  EXPECT_THROW(parse_format("xml"), InvalidConfig);
}

TEST(Run, DemoJsonDocument) {
  const auto r = run_with(config_for("demo_series.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  for (const char* key : {"points", "functions", "band", "comparators", "config", "version"})
    EXPECT_TRUE(doc.contains(key)) << key;
  ASSERT_EQ(doc["functions"].size(), 7u);
  ASSERT_EQ(doc["points"].size(), 7u);
  const auto& f0 = doc["functions"][0];
  for (const char* key : {"left_out", "a", "b", "sigma", "lambda", "weights", "values"})
    EXPECT_TRUE(f0.contains(key)) << key;
  EXPECT_EQ(f0["weights"].size(), 6u);
  EXPECT_EQ(f0["values"].size(), 401u);
  for (const char* key : {"xs", "mu", "s", "lower", "upper", "median"})
    EXPECT_EQ(doc["band"][key].size(), 401u) << key;
  EXPECT_TRUE(doc["comparators"]["g"].contains("a"));
  EXPECT_TRUE(doc["comparators"]["h"].contains("sigma"));
  EXPECT_EQ(doc["comparators"]["h"]["weights"].size(), 7u);
}

TEST(Run, EmitSubsetAndGridFlags) {
  auto cfg = config_for("demo_series.csv");
  cfg.emit = EmitFlags::parse("band");
  cfg.grid.start = 0.0;
  cfg.grid.end = 8.0;
  cfg.grid.count = 9;
  const auto r = run_with(cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_FALSE(doc.contains("functions"));
  EXPECT_FALSE(doc.contains("comparators"));
  ASSERT_EQ(doc["band"]["xs"].size(), 9u);
  EXPECT_EQ(doc["band"]["xs"][8].get<double>(), 8.0);
}

TEST(Run, CollinearBandHasNoSpread) {
  const auto r = run_with(config_for("collinear.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  for (const auto& s : doc["band"]["s"]) EXPECT_LE(std::abs(s.get<double>()), 1e-9);
}

TEST(Run, InputErrorsExitOne) {
  auto missing = run_with(config_for("does_not_exist.csv"));
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("does_not_exist.csv"), std::string::npos);
  EXPECT_EQ(run_with(config_for("duplicate_x.csv")).code, 1);
  EXPECT_EQ(run_with(config_for("too_short.csv")).code, 1);
  auto bad_grid = config_for("demo_series.csv");
  bad_grid.grid.count = 1;
  EXPECT_EQ(run_with(bad_grid).code, 1);
}

TEST(Run, CsvBandMatchesJsonBand) {
  auto json_cfg = config_for("demo_series.csv");
  json_cfg.grid.count = 41;
  auto csv_cfg = json_cfg;
  csv_cfg.format = OutputFormat::csv;
  const auto j = run_with(json_cfg);
  const auto c = run_with(csv_cfg);
  ASSERT_EQ(j.code, 0);
  ASSERT_EQ(c.code, 0);
  const auto doc = nlohmann::json::parse(j.out);
  std::istringstream lines(c.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "x,mu,s,lower,upper,median");
  const char* cols[] = {"xs", "mu", "s", "lower", "upper", "median"};
  std::size_t row = 0;
  while (std::getline(lines, line)) {
    const auto fields = split(line, ',');
    ASSERT_EQ(fields.size(), 6u);
    for (std::size_t c2 = 0; c2 < 6; ++c2) {
      const double from_json = doc["band"][cols[c2]][row].get<double>();
      EXPECT_EQ(std::strtod(fields[c2].c_str(), nullptr), from_json);
      EXPECT_EQ(fields[c2], format_number(from_json));
      // identical text in both documents
      EXPECT_NE(j.out.find(fields[c2]), std::string::npos);
    }
    ++row;
  }
  EXPECT_EQ(row, 41u);
}

TEST(Run, WritesOutputFile) {
  const auto path = std::filesystem::temp_directory_path() / "spaghetti_run_output.json";
  auto cfg = config_for("demo_series.csv");
  cfg.output_path = path.string();
  cfg.grid.count = 5;
  const auto r = run_with(cfg);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto doc = nlohmann::json::parse(test_support::read_file(path.string()));
  EXPECT_EQ(doc["version"], std::string(kVersion));
  std::filesystem::remove(path);
}

TEST(Cli, DeterministicOutput) {
  const std::string cmd = quoted(kCli) + " --input " + quoted(kData + "/demo_series.csv") + " --grid-count 51";
  const auto a = run_command(cmd);
  const auto b = run_command(cmd);
  ASSERT_EQ(a.exit_code, 0);
  EXPECT_FALSE(a.output.empty());
  EXPECT_EQ(a.output, b.output);
}

TEST(Cli, CsvFormatFlag) {
  const auto r = run_command(quoted(kCli) + " --input " + quoted(kData + "/demo_series.csv") +
                             " --format csv --grid-count 3");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 4);
}

TEST(Cli, ErrorsExitOneWithMessage) {
  const auto missing = run_command(quoted(kCli) + " --input /nonexistent/x.csv", true);
  EXPECT_EQ(missing.exit_code, 1);
  EXPECT_NE(missing.output.find("/nonexistent/x.csv"), std::string::npos);
  const auto dup = run_command(quoted(kCli) + " --input " + quoted(kData + "/duplicate_x.csv"), true);
  EXPECT_EQ(dup.exit_code, 1);
  EXPECT_NE(dup.output.find("duplicate"), std::string::npos);
  EXPECT_EQ(run_command(quoted(kCli) + " --input " + quoted(kData + "/demo_series.csv") + " --format xml").exit_code,
            1);
  EXPECT_EQ(run_command(quoted(kCli) + " --no-such-flag").exit_code, 1);
  EXPECT_EQ(run_command(quoted(kCli)).exit_code, 1);
}
