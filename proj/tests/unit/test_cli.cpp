#include "helpers.hpp"

#include "rqgnn/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using namespace rqgnn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

// Small, fast training settings shared by the CLI tests.
std::vector<std::string> quick_train(const fs::path& dir) {
  return {"train", "--synthetic", "120", "--fraction", "0.1", "--epochs", "2", "--hidden", "8",
          "--seed", "3", "--out", dir.string()};
}

}  // namespace

TEST_CASE("help and usage errors") {
  const Run help = run({"train", "--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("--lr") != std::string::npos);
  CHECK(help.out.find("0.005") != std::string::npos);
  CHECK(help.out.find("512") != std::string::npos);

  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"train", "--bogus"}).code == cli::kExitUsage);
  CHECK(run({"nosuch"}).code == cli::kExitUsage);
  CHECK(run({"train", "--synthetic", "10", "--data", "x"}).code == cli::kExitUsage);
  CHECK(run({"train", "--dropout", "1.5", "--synthetic", "10"}).code == cli::kExitUsage);
}

TEST_CASE("missing data directory") {
  const auto dir = testing::fresh_dir("cli_missing");
  const Run r = run({"rq-dist", "--data", (dir / "absent").string(), "--out", (dir / "h.json").string()});
  CHECK(r.code == cli::kExitData);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("config file values with command-line precedence") {
  const auto dir = testing::fresh_dir("cli_config");
  testing::write_file(dir / "cfg.ini", "bins = 4\nsynthetic = 40\n");
  const Run r = run({"rq-dist", "--config", (dir / "cfg.ini").string(), "--out", (dir / "h.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  auto doc = nlohmann::json::parse(testing::read_file(dir / "h.json"));
  CHECK(doc["bin_edges"].size() == 5);

  const Run over = run({"rq-dist", "--config", (dir / "cfg.ini").string(), "--bins", "6", "--out",
                        (dir / "h6.json").string()});
  REQUIRE(over.code == cli::kExitOk);
  doc = nlohmann::json::parse(testing::read_file(dir / "h6.json"));
  CHECK(doc["bin_edges"].size() == 7);

  testing::write_file(dir / "bad.ini", "binz = 4\n");
  CHECK(run({"rq-dist", "--config", (dir / "bad.ini").string(), "--synthetic", "40"}).code == cli::kExitUsage);
}

TEST_CASE("rq-dist defaults to ten bins") {
  const auto dir = testing::fresh_dir("cli_rq");
  const Run r = run({"rq-dist", "--synthetic", "60", "--out", (dir / "h.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto doc = nlohmann::json::parse(testing::read_file(dir / "h.json"));
  CHECK(doc["bin_edges"].size() == 11);
  CHECK(doc["freq_normal"].size() == 10);
  CHECK(doc["freq_anomalous"].size() == 10);
}

TEST_CASE("train writes its outputs reproducibly") {
  const auto dir = testing::fresh_dir("cli_train");
  const Run a = run(quick_train(dir / "a"));
  REQUIRE(a.code == cli::kExitOk);
  const Run b = run(quick_train(dir / "b"));
  REQUIRE(b.code == cli::kExitOk);
  for (const char* file : {"history.jsonl", "checkpoint.json", "metrics.json"}) {
    CHECK(fs::exists(dir / "a" / file));
    CHECK(testing::read_file(dir / "a" / file) == testing::read_file(dir / "b" / file));
  }
  const std::string history = testing::read_file(dir / "a" / "history.jsonl");
  CHECK(std::count(history.begin(), history.end(), '\n') == 2);

  const Run e = run({"eval", "--synthetic", "120", "--fraction", "0.1", "--seed", "3", "--split", "test",
                     "--checkpoint", (dir / "a" / "checkpoint.json").string(), "--out",
                     (dir / "eval.json").string()});
  REQUIRE(e.code == cli::kExitOk);
  const auto metrics = nlohmann::json::parse(testing::read_file(dir / "a" / "metrics.json"));
  const auto eval = nlohmann::json::parse(testing::read_file(dir / "eval.json"));
  CHECK(eval["macro_f1"] == metrics["test"]["macro_f1"]);
}

TEST_CASE("perturb output reloads through --data") {
  const auto dir = testing::fresh_dir("cli_perturb");
  const fs::path data = dir / "toy";
  REQUIRE(run({"perturb", "--synthetic", "60", "--seed", "5", "--out", data.string()}).code == cli::kExitOk);
  REQUIRE(run({"rq-dist", "--data", data.string(), "--out", (dir / "a.json").string()}).code == cli::kExitOk);
  REQUIRE(run({"rq-dist", "--synthetic", "60", "--seed", "5", "--out", (dir / "b.json").string()}).code ==
          cli::kExitOk);
  CHECK(testing::read_file(dir / "a.json") == testing::read_file(dir / "b.json"));
}

TEST_CASE("verify and gradcheck subcommands") {
  const auto dir = testing::fresh_dir("cli_verify");
  const Run v = run({"verify", "--trials", "50", "--graphs", "10", "--chebyshev-trials", "5", "--out",
                     (dir / "v.json").string()});
  CHECK(v.code == cli::kExitOk);
  const Run g = run({"gradcheck", "--hidden", "4", "--wavelets", "2", "--out", (dir / "g.json").string()});
  CHECK(g.code == cli::kExitOk);
  const auto doc = nlohmann::json::parse(testing::read_file(dir / "g.json"));
  CHECK(doc["max_relative_error"].get<double>() <= 1e-4);
}
