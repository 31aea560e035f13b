#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "relparcel/cli.hpp"

using namespace relparcel;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "relparcel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("relparcel_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

constexpr const char* kTinyConfig = R"([backbone]
input_size = 16
block_channels = [3, 4]
[model]
parcel_channels = 2
relation_channels = 3
head_hidden = 4
[train]
max_epochs = 2
batch_size = 4
)";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    Run r = run({});
    CHECK(r.code == kExitUsage);
    r = run({"frobnicate"});
    CHECK(r.code == kExitUsage);
    CHECK_FALSE(r.err.empty());
    CHECK(r.err.find("gen-data") != std::string::npos);
    CHECK(run({"train", "--out", "x"}).code == kExitUsage);
    CHECK(run({"gen-data", "--n", "abc", "--out", "x"}).code == kExitUsage);
    CHECK(run({"--help"}).code == kExitOk);
  }

  TEST_CASE("pipeline: gen-data, train, eval, predict, visualize") {
    const fs::path dir = scratch("pipeline");
    SUBCASE("runs end to end") {
      const std::string ds = (dir / "ds").string(), runs = (dir / "run").string();
      std::ofstream(dir / "recipe.toml") << R"([recipe]
labels = ["a", "b", "c"]
image_size = 16
[rules]
implies = [["b", "a"]]
[label.a]
primitive = "disk"
[label.b]
primitive = "bar"
[label.c]
primitive = "square"
base_prob = 0.5
)";
      write(dir / "c.toml", kTinyConfig);
      Run r = run({"gen-data", "--n", "10", "--seed", "7", "--config", (dir / "recipe.toml").string(), "--out", ds});
      REQUIRE(r.code == kExitOk);
      CHECK(fs::exists(dir / "ds" / "labels.csv"));

      r = run({"train", "--data", ds, "--config", (dir / "c.toml").string(), "--out", runs});
      REQUIRE(r.code == kExitOk);
      CHECK(fs::exists(dir / "run" / "model.ckpt"));
      const std::string history = slurp(dir / "run" / "history.csv");
      CHECK(history.rfind("epoch,train_loss,val_loss,lr,val_mean_f1\n", 0) == 0);
      CHECK(std::count(history.begin(), history.end(), '\n') == 3);

      r = run({"eval", "--data", ds, "--ckpt", runs + "/model.ckpt"});
      REQUIRE(r.code == kExitOk);
      for (const char* key : {"mean_f1", "mean_f2", "mean_pe", "mean_re", "mean_pl", "mean_rl"}) {
        CHECK(r.out.find(key) != std::string::npos);
      }
      CHECK(r.out == slurp(dir / "run" / "train_metrics.txt"));

      r = run({"predict", "--data", ds, "--ckpt", runs + "/model.ckpt"});
      REQUIRE(r.code == kExitOk);
      CHECK(r.out.rfind("image,a,b,c\n", 0) == 0);
      CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 11);

      r = run({"visualize", "--data", ds, "--ckpt", runs + "/model.ckpt", "--out", (dir / "vis").string(), "--limit",
               "2"});
      REQUIRE(r.code == kExitOk);
      CHECK(fs::exists(dir / "vis" / "img_00001" / "relation.csv"));
      CHECK_FALSE(fs::exists(dir / "vis" / "img_00002"));
    }
    fs::remove_all(dir);
  }

  TEST_CASE("data and config errors exit 2") {
    const fs::path dir = scratch("errors");
    CHECK(run({"eval", "--data", (dir / "none").string(), "--ckpt", (dir / "none.ckpt").string()}).code ==
          kExitDataOrConfig);
    REQUIRE(run({"gen-data", "--n", "4", "--out", (dir / "ds").string()}).code == kExitOk);
    write(dir / "bad.toml", "[train]\nlearning_rate = 3\n");
    const Run r = run({"train", "--data", (dir / "ds").string(), "--config", (dir / "bad.toml").string(), "--out",
                       (dir / "run").string()});
    CHECK(r.code == kExitDataOrConfig);
    CHECK(r.err.find("learning_rate") != std::string::npos);
    write(dir / "labels.toml", "[model]\nnum_labels = 3\n");
    CHECK(run({"train", "--data", (dir / "ds").string(), "--config", (dir / "labels.toml").string(), "--out",
               (dir / "run").string()})
              .code == kExitDataOrConfig);
    fs::remove_all(dir);
  }

  TEST_CASE("environment seed overrides the flag") {
    const fs::path dir = scratch("seed");
    ::setenv("RELPARCEL_SEED", "7", 1);
    REQUIRE(run({"gen-data", "--n", "3", "--seed", "99", "--out", (dir / "env").string()}).code == kExitOk);
    ::unsetenv("RELPARCEL_SEED");
    REQUIRE(run({"gen-data", "--n", "3", "--seed", "7", "--out", (dir / "flag").string()}).code == kExitOk);
    REQUIRE(run({"gen-data", "--n", "3", "--seed", "99", "--out", (dir / "other").string()}).code == kExitOk);
    CHECK(slurp(dir / "env" / "labels.csv") == slurp(dir / "flag" / "labels.csv"));
    CHECK(slurp(dir / "env" / "images" / "img_00000.pgm") == slurp(dir / "flag" / "images" / "img_00000.pgm"));
    CHECK(slurp(dir / "env" / "images" / "img_00000.pgm") != slurp(dir / "other" / "images" / "img_00000.pgm"));

    ::setenv("RELPARCEL_SEED", "seven", 1);
    CHECK(run({"gen-data", "--n", "3", "--out", (dir / "bad").string()}).code == kExitDataOrConfig);
    ::unsetenv("RELPARCEL_SEED");
    fs::remove_all(dir);
  }

  TEST_CASE("grad-check reports the maximum error") {
    const Run r = run({"grad-check", "--seed", "1"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("max relative error") != std::string::npos);
    CHECK(r.out.find("full_model") != std::string::npos);
  }
}
