#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using tabgnn::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tabgnn_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kData = TABGNN_DATA_DIR "/loans7.csv";
const std::string kSchema = TABGNN_DATA_DIR "/loans7.schema.json";
const std::string kRelations = TABGNN_DATA_DIR "/loans7.relations.json";

void ingest_and_build(const fs::path& out) {
  REQUIRE(call({"ingest", "--out", out.string(), "--data", kData, "--schema", kSchema, "--valid-ratio", "0.3",
                "--test-ratio", "0.2", "--temporal"})
              .code == 0);
  REQUIRE(call({"build-graph", "--out", out.string(), "--relations", kRelations}).code == 0);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("build-graph on the seven-row sample writes two layers") {
  const auto out = fresh("build");
  ingest_and_build(out);
  const auto manifest = nlohmann::json::parse(slurp(out / "graph" / "manifest.json"));
  CHECK(manifest["n_nodes"] == 7);
  REQUIRE(manifest["layers"].size() == 2);
  std::size_t edge_files = 0;
  for (const auto& entry : fs::directory_iterator(out / "graph"))
    edge_files += entry.path().filename() != "manifest.json";
  CHECK(edge_files == 2);
  const auto run_manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(run_manifest["stages"].contains("ingest"));
  CHECK(run_manifest["stages"].contains("build-graph"));
  CHECK(run_manifest["stages"]["build-graph"].contains("fingerprint"));
}

TEST_CASE("training twice with one seed writes identical histories and metrics") {
  const auto a = fresh("det_a"), b = fresh("det_b");
  std::string hist[2], metrics[2];
  int i = 0;
  for (const auto& out : {a, b}) {
    ingest_and_build(out);
    REQUIRE(call({"train", "--out", out.string(), "--seed", "7"}).code == 0);
    REQUIRE(call({"evaluate", "--out", out.string()}).code == 0);
    hist[i] = slurp(out / "history.jsonl");
    metrics[i] = slurp(out / "metrics.txt");
    ++i;
  }
  CHECK_FALSE(hist[0].empty());
  CHECK(hist[0] == hist[1]);
  CHECK(metrics[0] == metrics[1]);
  CHECK(metrics[0].find("beta_age: ") != std::string::npos);

  // rerunning a stage in place is idempotent
  REQUIRE(call({"train", "--out", a.string(), "--seed", "7"}).code == 0);
  CHECK(slurp(a / "history.jsonl") == hist[0]);
  CHECK(slurp(a / "checkpoint.json") == slurp(b / "checkpoint.json"));

  REQUIRE(call({"predict", "--out", a.string()}).code == 0);
  REQUIRE(call({"export-embeddings", "--out", a.string()}).code == 0);
  std::ifstream pred(a / "predictions.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(pred, l);) ++lines;
  CHECK(lines == 8);
  CHECK(fs::exists(a / "embeddings.csv"));
}

TEST_CASE("ablation flags select relations and aggregation") {
  const auto out = fresh("ablate");
  ingest_and_build(out);
  REQUIRE(call({"train", "--out", out.string(), "--seed", "1", "--relations", "education", "--agg", "mean"}).code == 0);
  const auto ckpt = nlohmann::json::parse(slurp(out / "checkpoint.json"));
  CHECK(ckpt["relations"] == nlohmann::json::array({"education"}));
  const Result bad = call({"train", "--out", out.string(), "--relations", "nope"});
  CHECK(bad.code == 3);
}

TEST_CASE("evaluate without a checkpoint names the missing artifact") {
  const auto out = fresh("missing");
  ingest_and_build(out);
  const Result r = call({"evaluate", "--out", out.string()});
  CHECK(r.code == 3);
  const auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"] == "validation");
  CHECK(err["message"].get<std::string>().find("checkpoint.json") != std::string::npos);
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"train", "--no-such-flag"}).code == 2);
  CHECK(call({"train", "--agg", "max"}).code == 2);
  const Result r = call({"ingest", "--valid-ratio", "abc"});
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err)["error"] == "usage");
}

TEST_CASE("bad inputs exit with status 3") {
  const auto out = fresh("bad");
  CHECK(call({"ingest", "--out", out.string(), "--data", kData, "--schema", kRelations}).code == 3);
  CHECK(call({"ingest", "--out", out.string(), "--data", "/nonexistent.csv", "--schema", kSchema}).code == 3);
  CHECK(call({"build-graph", "--out", (out / "empty").string(), "--relations", kRelations}).code == 3);
}

TEST_CASE("tune writes an in-range best config") {
  const auto out = fresh("tune");
  ingest_and_build(out);
  const Result r = call({"tune", "--out", out.string(), "--budget", "3", "--seed", "2"});
  REQUIRE(r.code == 0);
  const auto best = nlohmann::json::parse(slurp(out / "best_config.json"));
  const double lr = best["lr"];
  CHECK(lr >= 1e-6);
  CHECK(lr <= 1e-3);
  const std::size_t hidden = best["hidden_dim"];
  CHECK((hidden == 64 || hidden == 128 || hidden == 256));
  std::ifstream trials(out / "trials.jsonl");
  std::size_t n = 0;
  for (std::string l; std::getline(trials, l);) ++n;
  CHECK(n == 3);
}

}
