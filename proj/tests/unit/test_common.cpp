#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "dominet/config.hpp"
#include "dominet/csv.hpp"
#include "dominet/error.hpp"
#include "dominet/normal.hpp"
#include "dominet/parallel.hpp"
#include "dominet/rng.hpp"
#include "dominet/svg.hpp"
#include "test_util.hpp"

using namespace dominet;

namespace {

// Quantile by bisection on the long-double complementary error function.
long double bisect_quantile(long double p) {
  long double lo = -40.0L, hi = 40.0L;
  for (int i = 0; i < 200; ++i) {
    const long double mid = (lo + hi) / 2.0L;
    const long double cdf = 0.5L * std::erfc(-mid / std::sqrt(2.0L));
    (cdf < p ? lo : hi) = mid;
  }
  return (lo + hi) / 2.0L;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Usage;
}

}  // namespace

TEST_CASE("csv: quoted fields, BOM, comments and blank lines") {
  const std::string text =
      "\xEF\xBB\xBF# schema_version=1\n"
      "a,\"b,c\",d\n"
      "\n"
      "1,\"x \"\"q\"\"\",3\r\n"
      "4,5,6\n";
  const CsvTable t = parse_csv(text, "mem");
  REQUIRE(t.header.size() == 3);
  CHECK(t.header[1] == "b,c");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x \"q\"");
  CHECK(t.rows[0][2] == "3");
  CHECK(t.line_numbers[0] == 4);
  CHECK(t.line_numbers[1] == 5);
}

TEST_CASE("csv: field count mismatch names the line") {
  try {
    parse_csv("a,b\n1,2\n3\n", "file.csv");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("file.csv:3") != std::string::npos);
  }
}

TEST_CASE("csv: numeric cells") {
  CHECK(!parse_cell("", "x").has_value());
  CHECK(!parse_cell("  ", "x").has_value());
  CHECK(*parse_cell("+1.5", "x") == 1.5);
  CHECK(*parse_cell(" -2e3 ", "x") == -2000.0);
  CHECK(code_of([] { parse_cell("abc", "x"); }) == ErrorCode::Parse);
  CHECK(code_of([] { parse_cell("nan", "x"); }) == ErrorCode::Parse);
  CHECK(code_of([] { parse_cell("1.5x", "x"); }) == ErrorCode::Parse);
}

TEST_CASE("csv: format_double round-trips") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = standard_normal(rng) * std::pow(10.0, static_cast<int>(uniform_index(rng, 20)) - 10);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("csv: escape") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
}

TEST_CASE("csv: atomic write creates directories and leaves no temp file") {
  testutil::TempDir dir;
  const auto target = dir.path() / "sub" / "out.txt";
  write_file_atomic(target, "hello\n");
  CHECK(read_file(target) == "hello\n");
  write_file_atomic(target, "again\n");
  CHECK(read_file(target) == "again\n");
  CHECK(!std::filesystem::exists(dir.path() / "sub" / "out.txt.tmp"));
}

TEST_CASE("normal quantile matches long-double bisection") {
  for (double p : {1e-12, 1e-8, 1e-4, 0.001, 0.0125, 0.2, 0.5, 0.75, 0.9, 0.975, 0.999, 1 - 1e-9}) {
    const double q = normal_quantile(p);
    const auto ref = static_cast<double>(bisect_quantile(p));
    CHECK(std::fabs(q - ref) <= 1e-9 * std::max(1.0, std::fabs(ref)));
  }
  CHECK(normal_quantile(0.75) == doctest::Approx(0.674490).epsilon(1e-6));
  CHECK(normal_cdf(normal_quantile(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("normal quantile rejects probabilities outside (0, 1)") {
  for (double p : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    CHECK(code_of([p] { normal_quantile(p); }) == ErrorCode::InvalidProbability);
  }
}

TEST_CASE("rng helpers") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2, 0) != derive_seed(1, 2, 1));
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[uniform_index(rng, 7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    sum += z;
    sq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(std::fabs(sq / n - 1.0) < 0.02);
}

TEST_CASE("parallel: lowest-index exception wins") {
  parallel::set_threads(4);
  try {
    parallel::for_each_index(100, [](std::size_t i) {
      if (i == 37 || i == 80) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL("expected exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "fail 37");
  }
  std::vector<int> out(50, 0);
  parallel::for_each_index(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
}

TEST_CASE("error codes map to exit codes") {
  CHECK(exit_code_for(ErrorCode::Usage) == 1);
  CHECK(exit_code_for(ErrorCode::Spec) == 1);
  CHECK(exit_code_for(ErrorCode::Validation) == 2);
  CHECK(exit_code_for(ErrorCode::Parse) == 2);
  CHECK(exit_code_for(ErrorCode::Class) == 2);
  CHECK(exit_code_for(ErrorCode::DegenerateVariance) == 3);
  CHECK(exit_code_for(ErrorCode::InvalidProbability) == 3);
  CHECK(exit_code_for(ErrorCode::Numerical) == 3);
}

TEST_CASE("config: defaults") {
  const RunConfig c = parse_config("", "empty");
  CHECK(c.lasso.c == 1.1);
  CHECK(!c.lasso.gamma.has_value());
  CHECK(c.lasso.max_loading_iters == 15);
  CHECK(c.lasso.loading_tol == 1e-4);
  CHECK(c.lasso.cd_tol == 1e-8);
  CHECK(c.lasso.cd_max_iters == 10000);
  CHECK(c.nzv.freq_ratio_cut == 19.0);
  CHECK(c.nzv.unique_pct_cut == 10.0);
  CHECK(c.correlation_cutoff == 0.85);
  CHECK(c.forest.n_trees == 1500);
  CHECK(c.forest.n_runs == 2000);
  CHECK(c.forest.mtry == 0);
  CHECK(c.forest.top_k == 30);
  CHECK(c.forest.stratified);
  CHECK(c.synth_panel.n_units == 30);
  CHECK(c.synth_class.n_features == 375);
}

TEST_CASE("config: parsing values, lists and comments") {
  const RunConfig c = parse_config(
      "# comment\n"
      "seed = 42\n"
      "lasso.c = 1.5   # inline\n"
      "lasso.gamma = 0.05\n"
      "lasso.method = adaptive\n"
      "lasso.criterion = aic\n"
      "network.exclude_units = a, b ,c\n"
      "forest.n_trees = 10\n"
      "forest.frequency = split_usage\n"
      "tune.grid = 2,4,8\n"
      "tune.enabled = yes\n",
      "cfg");
  CHECK(c.seed == 42);
  CHECK(c.forest.seed == 42);
  CHECK(c.synth_panel.seed == 42);
  CHECK(c.lasso.c == 1.5);
  CHECK(*c.lasso.gamma == 0.05);
  CHECK(c.lasso_method == LassoMethod::Adaptive);
  CHECK(c.criterion == InformationCriterion::Aic);
  CHECK(c.exclude_units == std::vector<std::string>{"a", "b", "c"});
  CHECK(c.forest.n_trees == 10);
  CHECK(c.forest.frequency_mode == FrequencyMode::SplitUsage);
  CHECK(c.tune_grid == std::vector<std::size_t>{2, 4, 8});
  CHECK(c.tune);
}

TEST_CASE("config: rejects unknown keys, duplicates and bad values") {
  CHECK(code_of([] { parse_config("bogus = 1\n", "cfg"); }) == ErrorCode::Usage);
  CHECK(code_of([] { parse_config("seed = 1\nseed = 2\n", "cfg"); }) == ErrorCode::Usage);
  CHECK(code_of([] { parse_config("forest.n_trees = many\n", "cfg"); }) == ErrorCode::Usage);
  CHECK(code_of([] { parse_config("just text\n", "cfg"); }) == ErrorCode::Usage);
  CHECK(code_of([] { parse_config("lasso.c = 0.5\n", "cfg"); }) == ErrorCode::Spec);
  CHECK(code_of([] { parse_config("preprocess.correlation_cutoff = 1.5\n", "cfg"); }) ==
        ErrorCode::Spec);
  try {
    parse_config("\n\nforest.mtry = x\n", "my.cfg");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("my.cfg:3") != std::string::npos);
  }
}

TEST_CASE("config: default tuning grid") {
  CHECK(default_tune_grid(375) == std::vector<std::size_t>{9, 19, 38});
  CHECK(default_tune_grid(1) == std::vector<std::size_t>{1});
  CHECK(default_tune_grid(4) == std::vector<std::size_t>{1, 2, 4});
}

TEST_CASE("svg: schema comment, escaping and skipped non-finite points") {
  LineChart chart;
  chart.title = "a < b & c";
  chart.series.push_back({"s", {1, 2, 3}, {1, std::nan(""), 3}, true});
  chart.vertical_line = 1.5;
  const std::string svg = render_svg(chart);
  CHECK(svg.find("<!-- schema_version=1 -->") != std::string::npos);
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(render_svg(chart) == svg);
}
