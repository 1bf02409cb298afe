#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "superglobal/pooling.h"
#include "superglobal/tensor_io.h"
#include "support.h"

namespace fs = std::filesystem;
using namespace superglobal;

namespace {

struct Run {
  int code;
  std::string output;
};

// Runs the CLI with stdout and stderr captured together.
Run cli(const fs::path& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(SUPERGLOBAL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& tag)
      : root(fs::temp_directory_path() / ("sg_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(root);
    fs::create_directories(root / "features");
  }
  ~Workspace() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("pool writes one descriptor per image") {
  Workspace ws("pool");
  std::mt19937_64 rng(211);
  std::map<std::string, ScaleSet> images;
  for (const char* name : {"beta", "alpha"}) {
    for (int s = 0; s < 2; ++s) {
      auto m = sgtest::random_map(rng, 3 + s, 4, 6);
      write_tensor(ws.root / "features" / (std::string(name) + ".s" + std::to_string(s) + ".sgt"), from_feature_map(m));
      images[name].push_back(m);
    }
  }
  write_tensor(ws.root / "w.sgt", from_whitening(WhiteningParams::identity(6)));

  const auto r = cli(ws.root, "--output " + (ws.root / "out").string() + " pool --features " +
                                  (ws.root / "features").string() + " --whitening " + (ws.root / "w.sgt").string());
  REQUIRE(r.code == 0);
  const auto set = to_descriptor_set(read_tensor(ws.root / "out" / "descriptors.sgt"));
  const auto names = read_names(names_sidecar(ws.root / "out" / "descriptors.sgt"));
  CHECK(names == std::vector<std::string>{"alpha", "beta"});
  REQUIRE(set.rows() == 2);
  const PoolingConfig cfg;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto want = extract_descriptor(images[names[i]], cfg, WhiteningParams::identity(6));
    CHECK(set.descriptor(i) == want);
  }
}

TEST_CASE("missing inputs exit with the I/O code and name the path") {
  Workspace ws("missing");
  write_tensor(ws.root / "features" / "a.s0.sgt", from_feature_map(FeatureMap::filled(2, 2, 3, 0.5f)));
  const auto missing = (ws.root / "nowhere.sgt").string();
  const auto r = cli(ws.root, "--output " + ws.root.string() + " pool --features " +
                                  (ws.root / "features").string() + " --whitening " + missing);
  CHECK(r.code == 2);
  CHECK(r.output.find(missing) != std::string::npos);

  CHECK(cli(ws.root, "eval --gt " + missing).code != 0);
  CHECK(cli(ws.root, "--help").code == 0);
  CHECK(cli(ws.root, "frobnicate").code == 3);
}

TEST_CASE("eval of a perfect ranking reports 100") {
  Workspace ws("eval");
  nlohmann::json gt = {{"database", {"a", "b", "c"}},
                       {"queries", {{{"name", "q"}, {"easy", {1}}, {"hard", {2}}, {"junk", nlohmann::json::array()}}}}};
  nlohmann::json results = {{"queries",
                             {{{"name", "q"},
                               {"results",
                                {{{"index", 1}, {"name", "b"}, {"score", 0.9}},
                                 {{"index", 2}, {"name", "c"}, {"score", 0.8}},
                                 {{"index", 0}, {"name", "a"}, {"score", 0.1}}}}}}}};
  std::ofstream(ws.root / "gt.json") << gt.dump();
  std::ofstream(ws.root / "results.json") << results.dump();
  const auto r = cli(ws.root, "--output " + ws.root.string() + " eval --gt " + (ws.root / "gt.json").string() +
                                  " --results " + (ws.root / "results.json").string());
  REQUIRE(r.code == 0);
  CHECK(r.output.find("100.00") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(ws.root / "report.json"));
  CHECK(report["map"] == 1.0);

  const auto bad = cli(ws.root, "eval --gt " + (ws.root / "gt.json").string() + " --results " +
                                    (ws.root / "results.json").string() + " --protocol easy");
  CHECK(bad.code == 3);
}

TEST_CASE("search then no-op rerank keeps the order and reruns are identical") {
  Workspace ws("rerank");
  std::mt19937_64 rng(223);
  std::vector<float> db, qs;
  std::vector<std::string> db_names, q_names;
  for (int i = 0; i < 30; ++i) {
    const auto v = sgtest::random_unit(rng, 8);
    db.insert(db.end(), v.begin(), v.end());
    db_names.push_back("d" + std::to_string(i));
  }
  for (int i = 0; i < 3; ++i) {
    const auto v = sgtest::random_unit(rng, 8);
    qs.insert(qs.end(), v.begin(), v.end());
    q_names.push_back("q" + std::to_string(i));
  }
  write_tensor(ws.root / "db.sgt", from_descriptor_set(DescriptorSet(30, 8, db)));
  write_names(names_sidecar(ws.root / "db.sgt"), db_names);
  write_tensor(ws.root / "q.sgt", from_descriptor_set(DescriptorSet(3, 8, qs)));
  write_names(names_sidecar(ws.root / "q.sgt"), q_names);

  const std::string out = " --output " + ws.root.string() + " ";
  REQUIRE(cli(ws.root, out + "index --descriptors " + (ws.root / "db.sgt").string()).code == 0);
  REQUIRE(cli(ws.root, out + "search --index " + (ws.root / "index.sgt").string() + " --queries " +
                           (ws.root / "q.sgt").string()).code == 0);
  const std::string rerank_args = out + "rerank --index " + (ws.root / "index.sgt").string() + " --queries " +
                                  (ws.root / "q.sgt").string() + " --search " + (ws.root / "search.json").string() +
                                  " --m-top 20 --beta 0 --no-expansion";
  REQUIRE(cli(ws.root, "--threads 1" + rerank_args).code == 0);
  const auto first = slurp(ws.root / "rerank.json");
  REQUIRE(cli(ws.root, "--threads 4" + rerank_args).code == 0);
  CHECK(slurp(ws.root / "rerank.json") == first);

  const auto search = nlohmann::json::parse(slurp(ws.root / "search.json"));
  const auto reranked = nlohmann::json::parse(first);
  REQUIRE(search["queries"].size() == 3);
  for (std::size_t q = 0; q < 3; ++q) {
    const auto& a = search["queries"][q]["results"];
    const auto& b = reranked["queries"][q]["results"];
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]["index"] == b[i]["index"]);
  }
}
