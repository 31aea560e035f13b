#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "relparcel/checkpoint.hpp"
#include "relparcel/config.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/run_config.hpp"
#include "relparcel/visualize.hpp"

using namespace relparcel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("relparcel_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunConfig tiny_run() {
  RunConfig cfg;
  cfg.model.backbone.input_size = 16;
  cfg.model.backbone.block_channels = {3, 4};
  cfg.model.num_labels = 3;
  cfg.model.parcel_channels = 2;
  cfg.model.relation_channels = 3;
  cfg.model.head_hidden = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parse values and sections") {
    const auto doc = ConfigDocument::parse(R"(
# comment
[train]
lr = 1e-3          # trailing comment
batch_size = 8
name = "run # 1"
flag = true
sizes = [1, 2,
         3]
pairs = [["a", "b"], ["c", "d"]]
)");
    CHECK(doc.get_double("train", "lr", 0) == 1e-3);
    CHECK(doc.get_int("train", "batch_size", 0) == 8);
    CHECK(doc.get_double("train", "batch_size", 0) == 8.0);
    CHECK(doc.get_string("train", "name", "") == "run # 1");
    CHECK(doc.get_bool("train", "flag", false));
    CHECK(doc.get("train", "sizes").as_array().size() == 3);
    CHECK(doc.get("train", "pairs").as_array()[1].as_array()[0].as_string() == "c");
    CHECK(doc.get_int("train", "missing", 42) == 42);
    CHECK(doc.sections() == std::vector<std::string>{"train"});
  }

  TEST_CASE("dump round trip") {
    ConfigDocument doc;
    doc.set("b", "x", {std::int64_t{3}});
    doc.set("a", "y", {0.1});
    doc.set("a", "z", {std::string("q\"uote")});
    const std::string text = doc.dump();
    CHECK(text.find("[b]") < text.find("[a]"));
    const auto back = ConfigDocument::parse(text);
    CHECK(back.get_double("a", "y", 0) == 0.1);
    CHECK(back.get_string("a", "z", "") == "q\"uote");
    CHECK(back.dump() == text);
  }

  TEST_CASE("parse errors") {
    CHECK_THROWS_AS(ConfigDocument::parse("[train\nlr = 1"), ConfigError);
    CHECK_THROWS_AS(ConfigDocument::parse("[train]\nlr = "), ConfigError);
    CHECK_THROWS_AS(ConfigDocument::parse("[train]\nlr = [1, 2"), ConfigError);
    CHECK_THROWS_AS(ConfigDocument::parse("[t]\na = 1\na = 2"), ConfigError);
    CHECK_THROWS_AS(ConfigDocument::load("/nonexistent/cfg.toml"), ConfigError);
    CHECK_THROWS_AS(ConfigDocument::parse("[t]\na = \"s\"").get("t", "a").as_int(), ConfigError);
  }

  TEST_CASE("run config keys") {
    const auto doc = ConfigDocument::parse(R"(
[backbone]
block_channels = [8, 16, 16]
pool_after_block = [true, true, false]
dilation_last_block = 2
[model]
num_labels = 4
relation_variant = "mlp"
head = "independent"
[train]
lr = 0.01
decay_patience = 2
seed = 12
)");
    const RunConfig cfg = run_config_from(doc);
    CHECK(cfg.model.backbone.block_channels == std::vector<std::size_t>{8, 16, 16});
    CHECK(cfg.model.backbone.dilation_last_block == 2);
    CHECK(cfg.model.num_labels == 4);
    CHECK(cfg.model.relation_variant == RelationVariant::mlp);
    CHECK(cfg.model.head == HeadKind::independent);
    CHECK(cfg.train.lr == 0.01);
    CHECK(cfg.train.decay_patience == 2);
    CHECK(cfg.train.seed == 12);
    CHECK(cfg.train.patience == 5);

    const RunConfig again = run_config_from(ConfigDocument::parse(to_config(cfg).dump()));
    CHECK(to_config(again).dump() == to_config(cfg).dump());

    CHECK_THROWS_AS(run_config_from(ConfigDocument::parse("[train]\nlearning_rate = 1")), ConfigError);
    CHECK_THROWS_AS(run_config_from(ConfigDocument::parse("[model]\nrelation_variant = \"lstm\"")), ConfigError);
    CHECK_THROWS_AS(run_config_from(ConfigDocument::parse("[train]\nbatch_size = -1")), ConfigError);
    CHECK_THROWS_AS(run_config_from(ConfigDocument::parse("[model]\nnum_labels = 1")), ConfigError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("save/load round trip is exact") {
    const fs::path dir = scratch("ckpt");
    const RunConfig cfg = tiny_run();
    const Model model = build_model(cfg.model, 5);
    OptimizerState opt;
    opt.step = 7;
    for (const auto& p : model.parameters()) {
      opt.first_moment.emplace_back(p.tensor.numel(), 0.125);
      opt.second_moment.emplace_back(p.tensor.numel(), 0.5);
    }
    const fs::path path = dir / "m.ckpt";
    save_checkpoint(path.string(), cfg, model, opt, 11);
    CHECK(slurp(path).rfind("RELPARCEL1", 0) == 0);
    const Checkpoint ck = load_checkpoint(path.string());
    CHECK(ck.epoch == 11);
    CHECK(ck.optimizer.step == 7);
    CHECK(ck.optimizer.first_moment == opt.first_moment);
    const auto a = model.parameters(), b = ck.model.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      for (std::size_t j = 0; j < a[i].tensor.numel(); ++j) CHECK(a[i].tensor[j] == b[i].tensor[j]);
    }
    const fs::path again = dir / "again.ckpt";
    save_checkpoint(again.string(), ck.config, ck.model, ck.optimizer, ck.epoch);
    CHECK(slurp(again) == slurp(path));

    Tensor image = Tensor::zeros({1, 16, 16});
    CHECK(model.predict(image) == ck.model.predict(image));
    fs::remove_all(dir);
  }

  TEST_CASE("corrupt files are data errors") {
    const fs::path dir = scratch("corrupt_ckpt");
    const RunConfig cfg = tiny_run();
    const fs::path path = dir / "m.ckpt";
    save_checkpoint(path.string(), cfg, build_model(cfg.model, 1), {}, 0);
    const std::string bytes = slurp(path);
    auto write = [&](const std::string& b) {
      std::ofstream out(path, std::ios::binary);
      out << b;
    };
    write("NOTACKPT" + bytes.substr(8));
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
    write(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
    write(bytes + "x");
    CHECK_THROWS_AS(load_checkpoint(path.string()), DataError);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), DataError);
    fs::remove_all(dir);
  }
}

TEST_SUITE("visualize") {
  TEST_CASE("untrained model corners are the identity square") {
    const RunConfig cfg = tiny_run();
    const Model model = build_model(cfg.model, 2);
    const auto records = corner_records(model, Tensor::full({1, 16, 16}, 0.3), {"a", "b", "c"});
    REQUIRE(records.size() == 3);
    for (const auto& r : records) {
      CHECK(r.corners.bottom_left == Point{-1, -1});
      CHECK(r.corners.top_right == Point{1, 1});
    }
    const std::string text = format_corners(records);
    CHECK(text.rfind("label,bl_x,bl_y,tr_x,tr_y\n", 0) == 0);
    CHECK(text.find("a,-1.000000,-1.000000,1.000000,1.000000\n") != std::string::npos);
  }

  TEST_CASE("heatmap picks the strongest channel") {
    const Tensor p = Tensor::from({2, 1, 3}, {0, 1, 2, 5, 3, 4});
    CHECK(parcel_heatmap(p) == std::vector<std::uint8_t>{255, 0, 128});
    CHECK(parcel_heatmap(Tensor::full({1, 2, 2}, 3.0)) == std::vector<std::uint8_t>(4, 0));
  }

  TEST_CASE("export writes the expected files") {
    const fs::path dir = scratch("vis");
    RunConfig cfg = tiny_run();
    const Model model = build_model(cfg.model, 3);
    SceneRecipe recipe = default_recipe();
    recipe.labels.resize(3);
    recipe.implies.clear();
    recipe.excludes.clear();
    recipe.image_size = 16;
    const Dataset ds = generate_dataset(recipe, 2, 1);
    const VisualizationSummary s = export_visualizations(model, ds, dir.string());
    CHECK(s.images == 2);
    CHECK(s.files == 2 * (3 + 3));
    for (const auto& item : ds.items) {
      std::size_t pgm = 0;
      for (const auto& e : fs::directory_iterator(dir / item.id)) pgm += e.path().extension() == ".pgm";
      CHECK(pgm == 3);
      std::ifstream in(dir / item.id / "relation.csv");
      std::vector<std::string> rows;
      for (std::string l; std::getline(in, l);) rows.push_back(l);
      REQUIRE(rows.size() == 3);
      for (std::size_t r = 0; r < 3; ++r) {
        CHECK(std::count(rows[r].begin(), rows[r].end(), ',') == 2);
        // diagonal cell is empty
        std::vector<std::string> cells;
        std::string cell;
        for (char c : rows[r] + ",") {
          if (c == ',') {
            cells.push_back(cell);
            cell.clear();
          } else {
            cell += c;
          }
        }
        CHECK(cells[r].empty());
      }
    }

    // Corner records match the localizer output for each image.
    const auto recs = corner_records(model, ds.items[0].image, ds.label_names);
    CHECK(slurp(dir / ds.items[0].id / "corners.csv") == format_corners(recs));

    cfg.model.head = HeadKind::independent;
    const VisualizationSummary s2 = export_visualizations(build_model(cfg.model, 3), ds, (dir / "ind").string());
    CHECK(s2.files == 2 * (1 + 3));

    SceneRecipe wider = recipe;
    wider.labels = default_recipe().labels;
    CHECK_THROWS_AS(export_visualizations(model, generate_dataset(wider, 1, 1), dir.string()), DataError);
    fs::remove_all(dir);
  }
}
