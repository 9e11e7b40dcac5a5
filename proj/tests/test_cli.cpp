#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kedmd/io.hpp"
#include "kedmd/surrogate.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("KEDMD_CLI");
  REQUIRE_MESSAGE(env != nullptr, "KEDMD_CLI must point at the CLI binary");
  return env;
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "kedmd_cli_test.log";
  const std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  result.output = kedmd::io::read_text_file(log);
  return result;
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "kedmd_cli_work";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_config(const fs::path& path, const std::string& body) {
  kedmd::io::write_text_file(path, body);
}

int count_data_rows(const fs::path& csv) {
  std::istringstream in(kedmd::io::read_text_file(csv));
  std::string line;
  int rows = -1; // skip header
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  return rows;
}

} // namespace

TEST_CASE("missing or invalid config exits with 2") {
  CHECK(run("collect --config /nonexistent/config.json").exit_code == 2);

  const fs::path dir = work_dir();
  write_config(dir / "bad_key.json", R"({"data": {"d": 5, "unexpected": 1}})");
  const RunResult bad_key = run("collect --config " + (dir / "bad_key.json").string() +
                                " --out " + (dir / "out").string());
  CHECK(bad_key.exit_code == 2);
  CHECK(bad_key.output.find("unexpected") != std::string::npos);

  write_config(dir / "not_json.json", "{");
  CHECK(run("collect --config " + (dir / "not_json.json").string()).exit_code == 2);
}

TEST_CASE("collect writes the dataset and reports diagnostics") {
  const fs::path dir = work_dir();
  write_config(dir / "config.json",
               R"({"system": "zone_temp", "data": {"d": 5, "d_j": 2, "seed": 1}})");
  const RunResult result = run("collect --config " + (dir / "config.json").string() +
                               " --out " + (dir / "data").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("h_X = 0.25") != std::string::npos);
  CHECK(result.output.find("sigma_min[j=4]") != std::string::npos);
  CHECK(count_data_rows(dir / "data" / "triplets.csv") == 10);
  CHECK(count_data_rows(dir / "data" / "centers.csv") == 5);
}

TEST_CASE("collect warns when the grid misses the origin") {
  const fs::path dir = work_dir();
  write_config(dir / "config.json", R"({"data": {"d": 6, "d_j": 2, "seed": 1}})");
  const RunResult result = run("collect --config " + (dir / "config.json").string() +
                               " --out " + (dir / "data").string());
  CHECK(result.exit_code == 0); // warnings never change the exit code
  CHECK(result.output.find("warning") != std::string::npos);
  CHECK(result.output.find("snapped") != std::string::npos);

  // An even grid whose snapped spacing breaks h < 0.5 scale still errors out.
  write_config(dir / "four.json", R"({"data": {"d": 4, "d_j": 2, "seed": 1}})");
  const RunResult four = run("collect --config " + (dir / "four.json").string() +
                             " --out " + (dir / "data4").string());
  CHECK(four.exit_code == 1);
  CHECK(four.output.find("snapped") != std::string::npos);
}

TEST_CASE("collect rejects fill distances beyond half the support") {
  const fs::path dir = work_dir();
  // d = 3 on [-1, 1] gives h = 0.5 = 0.5 * scale.
  write_config(dir / "config.json", R"({"data": {"d": 3, "d_j": 2, "seed": 1}})");
  const RunResult result = run("collect --config " + (dir / "config.json").string() +
                               " --out " + (dir / "data").string());
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("fill distance") != std::string::npos);
}

TEST_CASE("fit writes a model with the origin estimate pinned to zero") {
  const fs::path dir = work_dir();
  write_config(dir / "config.json", R"({"data": {"d": 5, "d_j": 2, "seed": 1}})");
  REQUIRE(run("collect --config " + (dir / "config.json").string() + " --out " +
              (dir / "data").string())
              .exit_code == 0);

  const RunResult result = run("fit --config " + (dir / "config.json").string() +
                               " --data " + (dir / "data").string() + " --out " +
                               (dir / "model").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("condition(K_X)") != std::string::npos);

  // The printed interpolation residual honors the identity tolerance.
  std::istringstream out(result.output);
  std::string line;
  double printed_residual = 1.0;
  while (std::getline(out, line)) {
    const std::string key = "interpolation residual = ";
    if (line.rfind(key, 0) == 0) printed_residual = std::stod(line.substr(key.size()));
  }
  CHECK(printed_residual < 1e-9);

  const kedmd::LoadedModel loaded = kedmd::load_model(dir / "model" / "model.json");
  REQUIRE_FALSE(loaded.estimates.empty());
  CHECK(loaded.estimates[0].f_hat.norm() == 0.0);
}

TEST_CASE("benchmark rows start from zero error") {
  const fs::path dir = work_dir();
  write_config(dir / "config.json",
               R"({"data": {"d_list": [5], "d_j": 2, "seed": 1},
                   "experiment": {"horizon": 5, "realizations": 3}})");
  const RunResult result = run("benchmark-prediction --config " +
                               (dir / "config.json").string() + " --out " +
                               (dir / "bench").string());
  REQUIRE(result.exit_code == 0);

  std::istringstream csv(kedmd::io::read_text_file(dir / "bench" / "prediction_error.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "method,d,t,mean_err,min_err,max_err");
  int zero_rows = 0;
  while (std::getline(csv, line)) {
    const auto fields = kedmd::io::split_csv_line(line);
    REQUIRE(fields.size() == 6);
    if (fields[2] == "0") {
      CHECK(kedmd::io::parse_double(fields[3]) == 0.0);
      CHECK(kedmd::io::parse_double(fields[5]) == 0.0);
      ++zero_rows;
    }
  }
  CHECK(zero_rows == 3); // one t = 0 row per method
}

TEST_CASE("scaling study emits report and slope") {
  const fs::path dir = work_dir();
  write_config(dir / "config.json",
               R"({"sampling": {"dt": 0.01, "substeps": 20},
                   "data": {"d": 9, "d_j": 2, "seed": 1},
                   "bounds": {"C1": 1.0, "C2": 1.0, "constants_grid": 501},
                   "experiment": {"state_grid": 21, "input_grid": 9, "d_list": [5, 9]}})");
  const RunResult result = run("scaling-study --config " + (dir / "config.json").string() +
                               " --out " + (dir / "report").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("dt slope at centers") != std::string::npos);
  CHECK(result.output.find("calibrated C1") != std::string::npos);
  CHECK(fs::exists(dir / "report" / "report.json"));
  CHECK(fs::exists(dir / "report" / "residual_grid.csv"));
  CHECK(fs::exists(dir / "report" / "dt_scaling.csv"));
  CHECK(fs::exists(dir / "report" / "h_scaling.csv"));

  const auto doc =
      nlohmann::json::parse(kedmd::io::read_text_file(dir / "report" / "report.json"));
  const double slope = doc.at("dt_scaling").at("slope").get<double>();
  CHECK(slope > 1.8);
  CHECK(slope < 2.2);
}
