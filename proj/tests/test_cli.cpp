#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "covindex/cli.hpp"

using namespace covindex;
using nlohmann::json;

namespace {

RunConfig make(const std::string& command, json params, json space = "l2", std::size_t dim = 16) {
  json j = {{"command", command}, {"params", params}, {"seed", 1}};
  if (!space.is_null()) {
    j["space"] = space;
    j["dim"] = dim;
  }
  return config_from_json(j);
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("study,", 0) != 0) out.push_back(line);
  return out;
}

int shell(const std::string& cmd) {
  int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("theta-upper writes one row per n and a slope footer") {
    RunResult r = run(make("theta-upper", {{"n", {2, 4, 8, 16}}}, "l2", 64));
    CHECK(r.exit_code == kExitOk);
    CHECK(data_lines(r.output).size() == 4);
    CHECK(r.output.find("# slope=") != std::string::npos);
    CHECK(r.output.find("# config_hash: ") != std::string::npos);
  }

  TEST_CASE("unknown fields and parameters are config errors") {
    CHECK_THROWS_AS(config_from_json({{"command", "gz"}, {"colour", "red"}}), ConfigError);
    RunResult r = run(make("gz", {{"epsilon", 0.5}}));
    CHECK(r.exit_code == kExitConfig);
    CHECK(r.message.find('\n') == std::string::npos);
    CHECK(json::parse(r.message)["kind"] == "config");
    CHECK(run(make("gz", {{"eps", "big"}})).exit_code == kExitConfig);
    CHECK(run(make("nope", json::object())).exit_code == kExitConfig);
    RunConfig missing;
    missing.command = "moduli";
    CHECK(run(missing).exit_code == kExitConfig);
  }

  TEST_CASE("library errors from bad parameters are config errors") {
    RunResult r = run(make("cover-build", {{"n", 8}}, "l2", 6));  // too few blocks
    CHECK(r.exit_code == kExitConfig);
  }

  TEST_CASE("a gapped cover fails verification with a witness") {
    RunResult r = run(make("cover-verify", {{"strategy", "two-piece"}, {"alpha", 0.3}, {"beta", 0.9}, {"samples", 2000}}, "l2", 8));
    CHECK(r.exit_code == kExitVerification);
    CHECK(r.output.find("witness=[") != std::string::npos);
  }

  TEST_CASE("gz on the c0 model records the overflow") {
    RunResult r = run(make("gz", {{"eps", {0.9}}, {"samples", 100}}, "linf", 16));
    CHECK(r.exit_code == kExitOk);
    CHECK(r.output.find("Overflow(64)") != std::string::npos);
  }

  TEST_CASE("renorm check passes and a broken tolerance is reported") {
    RunResult ok = run(make("renorm-check", {{"lambda", {1.0, 2.0}}, {"n", 4}}));
    CHECK(ok.exit_code == kExitOk);
    RunConfig tight = make("scaling", {{"n", {2, 4, 8}}, {"expect_slope", -2.0}}, "l2", 16);
    CHECK(run(tight).exit_code == kExitAssertion);
  }

  TEST_CASE("json output mirrors the rows") {
    RunConfig c = make("moduli", {{"eps", {0.5, 1.0}}});
    c.format = "json";
    RunResult r = run(c);
    REQUIRE(r.exit_code == kExitOk);
    json j = json::parse(r.output);
    CHECK(j["rows"].size() == 2);
    CHECK(j["config"]["params"]["samples"] == 256);
  }

  TEST_CASE("cover-build output feeds cover-verify") {
    auto dir = std::filesystem::temp_directory_path() / "covindex_cli_test";
    std::filesystem::create_directories(dir);
    RunConfig b = config_from_json({{"command", "cover-build"}, {"space", "lq:3"}, {"dim", 9}, {"params", {{"n", 2}}},
                          {"format", "json"}, {"output", (dir / "cover.json").string()}});
    RunResult built = run(b);
    REQUIRE(built.exit_code == kExitOk);
    RunResult v = run(make("cover-verify", {{"cover_file", (dir / "cover.json").string()}, {"samples", 5000}}, "lq:3", 9));
    CHECK(v.exit_code == kExitOk);
    CHECK(v.output.find("Algebraic") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("same config gives the same bytes") {
    RunConfig c = make("theta-lower", {{"n", {2, 3}}, {"corpus", 12}});
    CHECK(run(c).output == run(c).output);
  }

  TEST_CASE("binary exit codes") {
    const std::string cli = COVINDEX_CLI_PATH;
    CHECK(shell(cli + " moduli --space l2 --dim 8 --eps 0.5") == 0);
    CHECK(shell(cli + " moduli --space l2 --dim 8 --bogus 1") == 2);
    CHECK(shell(cli + " moduli --dim 8") == 2);
    CHECK(shell(cli + " cover-verify --space l2 --dim 8 --strategy two-piece --alpha 0.3 --beta 0.9 --samples 500") == 3);
    CHECK(shell(cli + " scaling --space l2 --dim 16 --n 2..8 --expect-slope -2") == 4);
  }
}
