#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "reach/data_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("REACH_CLI");
  REQUIRE(env != nullptr);
  return env;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("reach_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("synth, train, and audit pipeline") {
  Workspace ws;
  CHECK(run("synth --synth-users 60 --synth-items 40 --synth-d 3 --density 0.3 --seed 1 "
            "--out-ratings " +
            ws.p("r.tsv")) == 0);
  REQUIRE(fs::exists(ws.p("r.tsv")));

  CHECK(run("train --ratings " + ws.p("r.tsv") + " --format tsv -d 3 --lambda 0.05 --sweeps 8 "
            "--seed 2 --out " +
            ws.p("model")) == 0);
  REQUIRE(fs::exists(ws.p("model") + "/manifest.json"));

  CHECK(run("audit-items --model " + ws.p("model") + " --ratings " + ws.p("r.tsv") +
            " --format tsv -N 1 -N 5 --out " + ws.p("audit.json") + " --plot " +
            ws.p("audit.csv")) == 0);
  REQUIRE(fs::exists(ws.p("audit.json")));
  const auto doc = nlohmann::json::parse(slurp(ws.p("audit.json")));
  CHECK(doc["summary"]["per_N"].size() == 2);
  CHECK(doc["config"]["subcommand"] == "audit-items");
  CHECK(doc["records"].size() == 2 * 40);
  const double avail = doc["summary"]["per_N"][0]["availability_lower_bound"].get<double>();
  CHECK(avail >= 0.0);
  CHECK(avail <= 1.0);

  CHECK(run("popularity --model " + ws.p("model") + " --ratings " + ws.p("r.tsv") +
            " --format tsv -N 5 --out " + ws.p("pop.json") + " --plot " + ws.p("pop.csv")) == 0);
  const std::string pop_csv = slurp(ws.p("pop.csv"));
  CHECK(pop_csv.rfind("series,x,y\n", 0) == 0);

  CHECK(run("recourse --model " + ws.p("model") + " --ratings " + ws.p("r.tsv") +
            " --format tsv --mode reaction --policy both --set-size 4 --users 10 --seed 3 -N 3 "
            "--out " +
            ws.p("rec.json") + " --plot " + ws.p("rec.csv")) == 0);
  const auto rec = nlohmann::json::parse(slurp(ws.p("rec.json")));
  CHECK(rec["records"].size() == 2 * 10);  // both policies

  CHECK(run("difficulty --model " + ws.p("model") + " --ratings " + ws.p("r.tsv") +
            " --format tsv --mode reaction --policy random --set-size 4 --users 6 --seed 3 "
            "--out " +
            ws.p("diff.json")) == 0);
  const auto diff = nlohmann::json::parse(slurp(ws.p("diff.json")));
  CHECK(diff["records"].size() == 6);

  CHECK(run("coldstart --model " + ws.p("model") + " --candidate 0,1,2 -N 1 --out " +
            ws.p("cold.json")) == 0);
  const auto cold = nlohmann::json::parse(slurp(ws.p("cold.json")));
  CHECK(cold["summary"]["recourse_count"].is_number());
}

TEST_CASE("identical invocations produce byte-identical reports") {
  Workspace ws;
  REQUIRE(run("synth --synth-users 40 --synth-items 30 --seed 5 --out-ratings " +
              ws.p("r.tsv")) == 0);
  REQUIRE(run("train --ratings " + ws.p("r.tsv") + " --format tsv -d 2 --sweeps 5 --seed 6 "
              "--out " +
              ws.p("model")) == 0);
  for (const char* name : {"a", "b"}) {
    REQUIRE(run("recourse --model " + ws.p("model") + " --ratings " + ws.p("r.tsv") +
                " --format tsv --mode history --users 8 --seed 9 -N 2 --jobs 3 --out " +
                ws.p(std::string(name) + ".json") + " --plot " + ws.p(std::string(name) + ".csv")) ==
            0);
  }
  CHECK(slurp(ws.p("a.json")) == slurp(ws.p("b.json")));
  CHECK(slurp(ws.p("a.csv")) == slurp(ws.p("b.csv")));
}

TEST_CASE("midpoint fixture audits to two-thirds availability") {
  Workspace ws;
  reach::ModelBundle bundle;
  bundle.model.Q = reach::Matrix(3, 2);
  bundle.model.Q << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
  bundle.model.b = reach::Vector::Zero(3);
  bundle.item_ids = {0, 1, 2};
  reach::save_model(bundle, ws.p("mid"));

  REQUIRE(run("audit-items --model " + ws.p("mid") + " -N 1 --exact --out " +
              ws.p("mid.json")) == 0);
  const auto doc = nlohmann::json::parse(slurp(ws.p("mid.json")));
  CHECK(doc["summary"]["per_N"][0]["availability_lower_bound"].get<double>() ==
        Catch::Approx(2.0 / 3.0));
  CHECK(doc["summary"]["per_N"][0]["exact_top1_fraction"].get<double>() ==
        Catch::Approx(2.0 / 3.0));
  bool exact2 = doc["records"][2]["exact_top1"].get<bool>();
  CHECK_FALSE(exact2);
  CHECK(doc["records"][0]["exact_top1"].get<bool>());
}

TEST_CASE("log1p listen counts flow through training") {
  Workspace ws;
  {
    std::ofstream r(ws.p("listens.tsv"));
    for (int u = 0; u < 6; ++u)
      for (int i = 0; i < 5; ++i)
        r << u << "\t" << i << "\t" << (u * 13 + i * 7) % 90 << "\n";
  }
  CHECK(run("train --ratings " + ws.p("listens.tsv") +
            " --format tsv --log1p --bounds 0:inf -d 2 --sweeps 4 --out " + ws.p("lfm")) == 0);
  REQUIRE(fs::exists(ws.p("lfm") + "/manifest.json"));
  CHECK(run("audit-items --model " + ws.p("lfm") + " -N 2 --out " + ws.p("lfm.json")) == 0);
}

TEST_CASE("exit codes follow the contract") {
  Workspace ws;
  // 1: usage problems
  CHECK(run("audit-items") == 1);  // no --model
  CHECK(run("no-such-subcommand") == 1);
  CHECK(run("coldstart --model " + ws.p("nowhere")) == 1);  // empty candidate

  // 2: unreadable / malformed inputs
  CHECK(run("audit-items --model " + ws.p("missing_dir") + " -N 1") == 2);
  {
    std::ofstream bad(ws.p("bad.tsv"));
    bad << "1\t2\tnot_a_number\n";
  }
  REQUIRE(run("synth --synth-users 10 --synth-items 8 --seed 1 --out-ratings " + ws.p("ok.tsv")) ==
          0);
  REQUIRE(run("train --ratings " + ws.p("ok.tsv") + " --format tsv -d 2 --sweeps 3 --out " +
              ws.p("model")) == 0);
  CHECK(run("audit-items --model " + ws.p("model") + " --ratings " + ws.p("bad.tsv") +
            " --format tsv -N 1") == 2);

  // 3: numerical failure (a zero iteration budget starves the simplex)
  CHECK(run("difficulty --model " + ws.p("model") + " --ratings " + ws.p("ok.tsv") +
            " --format tsv --mode history --users 2 --iter-factor 0") == 3);

  // 0 with --help
  CHECK(run("--help") == 0);
}
