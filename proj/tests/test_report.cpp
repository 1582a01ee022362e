#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "covindex/report.hpp"

using namespace covindex;

TEST_SUITE("report") {
  TEST_CASE("number formatting") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(1.0 / 3.0) == "0.3333333333");
    CHECK(format_number(1e-12) == "1e-12");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  }

  TEST_CASE("csv quoting") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  }

  TEST_CASE("config hash is FNV-1a of the compact dump") {
    // FNV-1a 64 of the empty string is the offset basis; "{}" is hashed here.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : std::string("{}")) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    CHECK(config_hash(nlohmann::json::object()) == buf);
    CHECK(config_hash({{"seed", 1}}) != config_hash({{"seed", 2}}));
  }

  TEST_CASE("csv layout: provenance, header, rows, footer") {
    Report r;
    r.config = {{"command", "demo"}};
    ReportRow row;
    row.study = "demo";
    row.space = "l2";
    row.N = 4;
    row.k = 1;
    row.n = 2;
    row.upper = 0.25;
    row.kind = "upper/Exact";
    row.seed = 9;
    row.notes = "x=1;y=2";
    r.rows.push_back(row);
    r.footer.push_back("slope=-0.5");
    std::istringstream in(render_csv(r));
    std::string line;
    std::getline(in, line);
    CHECK(line == "# config: {\"command\":\"demo\"}");
    std::getline(in, line);
    CHECK(line == "# config_hash: " + config_hash(r.config));
    std::getline(in, line);
    CHECK(line == "study,space,N,k,n,upper,lower,kind,seed,notes");
    std::getline(in, line);
    CHECK(line == "demo,l2,4,1,2,0.25,,upper/Exact,9,x=1;y=2");
    std::getline(in, line);
    CHECK(line == "# slope=-0.5");
    auto j = nlohmann::json::parse(render_json(r));
    CHECK(j["rows"][0]["upper"] == 0.25);
    CHECK(j["rows"][0]["lower"].is_null());
    CHECK(j["config_hash"] == config_hash(r.config));
  }

  TEST_CASE("atomic write replaces the target") {
    auto dir = std::filesystem::temp_directory_path() / "covindex_report_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "out.csv").string();
    write_atomic(path, "first\n");
    write_atomic(path, "second\n");
    std::ifstream in(path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(s == "second\n");
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    std::filesystem::remove_all(dir);
  }
}
