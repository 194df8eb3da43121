#include "rdhte/config.hpp"
#include "rdhte/csv.hpp"
#include "rdhte/report.hpp"
#include "rdhte/run.hpp"
#include "rdhte/simulate.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rdhte;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("rdhte_test_" + name);
  std::ofstream(path, std::ios::binary) << content;
  return path.string();
}

std::string sample_csv(const RdSample& s) {
  std::string out = "y,x";
  for (Eigen::Index j = 0; j < s.d(); ++j)
    out += ",w" + std::to_string(j + 1);
  out += "\n";
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    out += format_double(s.y[i]) + "," + format_double(s.x[i]);
    for (Eigen::Index j = 0; j < s.d(); ++j)
      out += "," + format_double(s.w(i, j));
    out += "\n";
  }
  return out;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rdhte");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("csv parsing") {
  const CsvTable t = parse_csv("a,b\n1,2\n3,4\n\"5\",\"x,\"\"y\"\"\"\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[2][1] == "x,\"y\"");

  const CsvTable bom = parse_csv("\xEF\xBB\xBFy,x\r\n1,2\r\n");
  CHECK(bom.header[0] == "y");
  CHECK(bom.rows.size() == 1);

  CHECK(code_of([] { parse_csv("a,b\n1\n"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_csv("a\n\"open\n"); }) == ErrorCode::ParseError);
}

TEST_CASE("typed loading") {
  const RawTable t = load_csv_text("y,x,g\n1,0.5,a\n2,-0.5,b\n3,1e-3,a\n",
                                   {{"y", true}, {"x", true}, {"g", false}});
  CHECK(t.rows() == 3);
  CHECK(t.find("x")->numeric[2] == 1e-3);
  CHECK(t.find("g")->text[1] == "b");

  try {
    load_csv_text("y,x\n1,2\nabc,3\n", {{"y", true}, {"x", true}});
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    const std::string msg = e.what();
    CHECK(msg.find("abc") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'y'") != std::string::npos);
  }
  CHECK(code_of([] { load_csv_text("y,x\n1,\n", {{"y", true}, {"x", true}}); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([] { load_csv_text("y,x\n1,2\n", {{"z", true}}); }) == ErrorCode::MissingColumn);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, -2.5e-300, 1.0 / 3.0, 123456789.0, 0.0}) {
    double back = 0.0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  double out = 0.0;
  CHECK_FALSE(parse_double("nan", out));
  CHECK_FALSE(parse_double("1.5x", out));
  CHECK_FALSE(parse_double("", out));
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("plain") == "plain");
}

TEST_CASE("heterogeneity flags") {
  const CovariateSpec q = parse_hetero("income:q4");
  CHECK(q.kind == CovariateKind::quantile_bins);
  CHECK(q.bins == 4);
  const CovariateSpec c = parse_hetero("income:cont^2");
  CHECK(c.kind == CovariateKind::continuous);
  CHECK(c.power_max == 2);
  const CovariateSpec g = parse_hetero("region:cat@north");
  CHECK(g.kind == CovariateKind::categorical);
  CHECK(g.baseline == "north");
  CHECK(parse_hetero("income").kind == CovariateKind::continuous);
  CHECK(code_of([] { parse_hetero("income:weird"); }) == ErrorCode::Usage);
  CHECK(code_of([] { parse_hetero("income:q1"); }) == ErrorCode::Usage);
}

TEST_CASE("usage errors exit with 2") {
  const CliResult r = cli({"--data", "x.csv", "--running", "x"});
  CHECK(r.code == 2);
  CHECK(r.err.find("outcome") != std::string::npos);
  CHECK(cli({"--data", "x.csv", "--outcome", "y", "--running", "x", "--bw", "0.2",
             "--bw-select", "two"})
            .code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("missing column and estimation errors") {
  const std::string path = temp_file("small.csv", "y,x\n1,-1\n2,1\n");
  CHECK(cli({"--data", path, "--outcome", "nope", "--running", "x"}).code == 2);
  const CliResult r = cli({"--data", path, "--outcome", "y", "--running", "x", "--bw", "5"});
  CHECK(r.code == 3);
  CHECK(r.err.find("hint:") != std::string::npos);
}

TEST_CASE("golden table row") {
  TableRow row;
  row.label = "tau";
  row.point = 0.275;
  row.ci_lower = 0.176;
  row.ci_upper = 0.357;
  row.p_value = 0.0000123;
  row.sample_size = 14622;
  row.h_left = row.h_right = 0.151;
  CHECK(render_rows({row}) == slurp(RDHTE_GOLDEN_DIR "/table_panel_a.txt"));
  CHECK(group_thousands(26099) == "26,099");
  CHECK(group_thousands(956) == "956");
  CHECK(group_thousands(1234567) == "1,234,567");
  CHECK(format_bandwidth(0.14, 0.16) == "0.140/0.160");
}

TEST_CASE("d = 0 run equals the library") {
  DgpConfig cfg = canonical_preset();
  cfg.covariates.clear();
  cfg.lambda_left.clear();
  cfg.lambda_right.clear();
  const RdSample s = gen_sample(cfg, 1500, 12);
  const std::string path = temp_file("d0.csv", sample_csv(s));
  const CliResult r = cli({"--data", path, "--outcome", "y", "--running", "x", "--format", "csv"});
  REQUIRE(r.code == 0);
  const HteResult api = fit_hte(s, FitSpec{});
  CHECK(r.out == render_csv(api));
  const CsvTable t = parse_csv(r.out);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][0] == "tau");
  double point = 0.0;
  REQUIRE(parse_double(t.rows[0][1], point));
  CHECK(point == api.estimates[0].point);

  const CliResult table = cli({"--data", path, "--outcome", "y", "--running", "x"});
  CHECK(table.out == render_table(api));
}

TEST_CASE("json output carries the table fields") {
  const RdSample s = gen_sample(canonical_preset(), 1500, 13);
  const std::string path = temp_file("json.csv", sample_csv(s));
  const CliResult r = cli({"--data", path, "--outcome", "y", "--running", "x", "--hetero",
                           "w1:bin", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["schema"] == "rdhte/1");
  CHECK(j["covariates"] == nlohmann::json::array({"w1=1"}));
  REQUIRE(j["estimates"].size() == 3);
  CHECK(j["estimates"][0]["label"] == "kappa(w1=0)");
  CHECK(j["estimates"][1]["label"] == "kappa(w1=1)");
  CHECK(j["estimates"][2]["label"] == "xi(w1=1)");
  for (const auto& e : j["estimates"])
    for (const char* key : {"point", "ci", "p_value", "rbc_point", "rbc_se", "se"})
      CHECK(e.contains(key));
  CHECK(j["sample_size"]["total"].get<long>() > 0);
  CHECK(j["bandwidth"]["selector"] == "mse_two_sided");

  // deterministic bytes
  CHECK(cli({"--data", path, "--outcome", "y", "--running", "x", "--hetero", "w1:bin", "--format",
             "json"})
            .out == r.out);
}

TEST_CASE("evaluation points") {
  const RdSample s = gen_sample(canonical_preset(), 1500, 16);
  const std::string path = temp_file("at1.csv", sample_csv(s));
  const CliResult r = cli({"--data", path, "--outcome", "y", "--running", "x", "--hetero", "w1",
                           "--at", "0.5", "--at", "3", "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["estimates"].size() == 4);
  CHECK(j["estimates"][0]["label"] == "theta");
  CHECK(j["estimates"][1]["label"] == "xi(w1)");
  CHECK(j["estimates"][2]["label"] == "kappa(w1=0.5)");
  CHECK(j["estimates"][2]["extrapolation"] == false);
  CHECK(j["estimates"][3]["extrapolation"] == true);
  const CliResult t = cli({"--data", path, "--outcome", "y", "--running", "x", "--hetero", "w1",
                           "--at", "3"});
  CHECK(t.out.find("kappa(w1=3) *") != std::string::npos);
}

TEST_CASE("evaluation point of the wrong length") {
  const RdSample s = gen_sample(canonical_preset(), 800, 14);
  const std::string path = temp_file("at.csv", sample_csv(s));
  const CliResult r = cli({"--data", path, "--outcome", "y", "--running", "x", "--hetero", "w1",
                           "--at", "1,2"});
  CHECK(r.code == 3);
  CHECK(r.err.find("DimensionMismatch") != std::string::npos);
}

TEST_CASE("cluster labels from text") {
  std::string csv = "y,x,school\n";
  const RdSample s = gen_sample(canonical_preset(), 1200, 15);
  for (Eigen::Index i = 0; i < s.n(); ++i)
    csv += format_double(s.y[i]) + "," + format_double(s.x[i]) + ",s" + std::to_string(i % 60) +
           "\n";
  const std::string path = temp_file("cluster.csv", csv);
  const CliResult r = cli({"--data", path, "--outcome", "y", "--running", "x", "--cluster",
                           "school", "--format", "json"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["spec"]["vce"] == "cluster");
}

}
