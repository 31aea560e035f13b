#include "relparcel/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "relparcel/errors.hpp"

namespace fs = std::filesystem;

namespace relparcel {

namespace {

constexpr const char* kPrimitiveNames[] = {"disk", "square", "bar", "cross", "ring", "stripe"};

// Labels reachable from `start` through implications, including start.
std::vector<bool> implication_closure(const SceneRecipe& r, std::size_t start) {
  std::vector<bool> reach(r.num_labels(), false);
  std::vector<std::size_t> stack{start};
  reach[start] = true;
  while (!stack.empty()) {
    const std::size_t a = stack.back();
    stack.pop_back();
    for (const auto& [x, y] : r.implies) {
      if (x == a && !reach[y]) {
        reach[y] = true;
        stack.push_back(y);
      }
    }
  }
  return reach;
}

void close_under_implications(const SceneRecipe& r, MultiHotLabel& set) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [a, b] : r.implies) {
      if (set[a] && !set[b]) {
        set[b] = 1;
        changed = true;
      }
    }
  }
}

// Removes `label` and, transitively, every label that implies it.
void drop_with_antecedents(const SceneRecipe& r, MultiHotLabel& set, std::size_t label) {
  std::vector<std::size_t> stack{label};
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    if (!set[x]) continue;
    set[x] = 0;
    for (const auto& [a, b] : r.implies) {
      if (b == x && set[a]) stack.push_back(a);
    }
  }
}

bool inside(Primitive p, double dx, double dy, double size, double stripe_offset, double x, double y) {
  switch (p) {
    case Primitive::disk:
      return dx * dx + dy * dy <= size * size;
    case Primitive::square:
      return std::abs(dx) <= size && std::abs(dy) <= size;
    case Primitive::bar:
      return std::abs(dx) <= 1.6 * size && std::abs(dy) <= 1.0;
    case Primitive::cross:
      return (std::abs(dx) <= size && std::abs(dy) <= 0.75) || (std::abs(dy) <= size && std::abs(dx) <= 0.75);
    case Primitive::ring:
      return std::abs(std::sqrt(dx * dx + dy * dy) - size) <= 0.8;
    case Primitive::stripe:
      return std::abs((x - y) - stripe_offset) <= 0.5 * size;
  }
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string to_string(Primitive p) { return kPrimitiveNames[static_cast<int>(p)]; }

Primitive primitive_from(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    if (name == kPrimitiveNames[i]) return static_cast<Primitive>(i);
  }
  throw ConfigError("unknown primitive '" + name + "'");
}

std::vector<std::string> SceneRecipe::label_names() const {
  std::vector<std::string> names;
  for (const auto& l : labels) names.push_back(l.name);
  return names;
}

std::size_t SceneRecipe::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].name == name) return i;
  }
  throw ConfigError("recipe has no label '" + name + "'");
}

void SceneRecipe::validate() const {
  const std::size_t n = num_labels();
  if (n < 2) throw ConfigError("recipe needs at least 2 labels");
  if (image_size < 8) throw ConfigError("recipe image_size must be at least 8");
  if (channels == 0) throw ConfigError("recipe channels must be positive");
  for (const auto& l : labels) {
    if (l.base_prob < 0.0 || l.base_prob > 1.0) throw ConfigError("label '" + l.name + "': base_prob outside [0,1]");
    if (l.intensity_lo > l.intensity_hi || l.intensity_lo < 0.0 || l.intensity_hi > 1.0) {
      throw ConfigError("label '" + l.name + "': bad intensity band");
    }
    if (l.size_lo > l.size_hi || l.size_lo <= 0.0) throw ConfigError("label '" + l.name + "': bad size range");
  }
  for (const auto& rules : {implies, excludes}) {
    for (const auto& [a, b] : rules) {
      if (a >= n || b >= n || a == b) throw ConfigError("recipe rule references an invalid label pair");
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    const auto reach = implication_closure(*this, a);
    for (const auto& [x, y] : excludes) {
      if (reach[x] && reach[y]) {
        throw ConfigError("inconsistent recipe: '" + labels[a].name + "' implies both '" + labels[x].name +
                          "' and '" + labels[y].name + "', which exclude each other");
      }
    }
  }
  if (std::none_of(labels.begin(), labels.end(), [](const LabelStyle& l) { return l.base_prob > 0.0; })) {
    throw ConfigError("recipe can never produce a positive label (all base_prob are 0)");
  }
}

ConfigDocument SceneRecipe::to_config() const {
  ConfigDocument doc;
  ConfigValue::Array names;
  for (const auto& l : labels) names.push_back({l.name});
  doc.set("recipe", "labels", {names});
  doc.set("recipe", "image_size", {static_cast<std::int64_t>(image_size)});
  doc.set("recipe", "channels", {static_cast<std::int64_t>(channels)});
  auto pairs = [this](const std::vector<std::pair<std::size_t, std::size_t>>& rules) {
    ConfigValue::Array out;
    for (const auto& [a, b] : rules) out.push_back({ConfigValue::Array{{labels[a].name}, {labels[b].name}}});
    return ConfigValue{out};
  };
  doc.set("rules", "implies", pairs(implies));
  doc.set("rules", "excludes", pairs(excludes));
  for (const auto& l : labels) {
    const std::string s = "label." + l.name;
    doc.set(s, "primitive", {to_string(l.primitive)});
    doc.set(s, "intensity", {ConfigValue::Array{{l.intensity_lo}, {l.intensity_hi}}});
    doc.set(s, "size", {ConfigValue::Array{{l.size_lo}, {l.size_hi}}});
    doc.set(s, "base_prob", {l.base_prob});
  }
  return doc;
}

SceneRecipe SceneRecipe::from_config(const ConfigDocument& doc) {
  SceneRecipe r;
  for (const auto& v : doc.get("recipe", "labels").as_array()) {
    LabelStyle style;
    style.name = v.as_string();
    const std::string s = "label." + style.name;
    style.primitive = primitive_from(doc.get_string(s, "primitive", style.name));
    if (doc.has(s, "intensity")) {
      const auto& band = doc.get(s, "intensity").as_array();
      if (band.size() != 2) throw ConfigError(s + ": intensity must be [lo, hi]");
      style.intensity_lo = band[0].as_double();
      style.intensity_hi = band[1].as_double();
    }
    if (doc.has(s, "size")) {
      const auto& range = doc.get(s, "size").as_array();
      if (range.size() != 2) throw ConfigError(s + ": size must be [lo, hi]");
      style.size_lo = range[0].as_double();
      style.size_hi = range[1].as_double();
    }
    style.base_prob = doc.get_double(s, "base_prob", style.base_prob);
    r.labels.push_back(style);
  }
  r.image_size = static_cast<std::size_t>(doc.get_int("recipe", "image_size", 32));
  r.channels = static_cast<std::size_t>(doc.get_int("recipe", "channels", 1));
  auto read_pairs = [&](const char* key, std::vector<std::pair<std::size_t, std::size_t>>& out) {
    if (!doc.has("rules", key)) return;
    for (const auto& p : doc.get("rules", key).as_array()) {
      const auto& pair = p.as_array();
      if (pair.size() != 2) throw ConfigError(std::string("rules.") + key + ": entries must be [a, b]");
      out.emplace_back(r.index_of(pair[0].as_string()), r.index_of(pair[1].as_string()));
    }
  };
  read_pairs("implies", r.implies);
  read_pairs("excludes", r.excludes);
  r.validate();
  return r;
}

SceneRecipe default_recipe() {
  SceneRecipe r;
  r.labels = {
      {"disk", Primitive::disk, 0.55, 0.75, 2.5, 4.5, 0.30},
      {"square", Primitive::square, 0.75, 0.95, 2.0, 3.5, 0.35},
      {"bar", Primitive::bar, 0.45, 0.65, 3.0, 5.0, 0.30},
      {"cross", Primitive::cross, 0.80, 1.00, 3.0, 5.0, 0.25},
      {"ring", Primitive::ring, 0.60, 0.80, 3.5, 5.5, 0.25},
      {"stripe", Primitive::stripe, 0.40, 0.60, 2.0, 3.0, 0.30},
  };
  r.implies = {{3, 2}, {4, 0}};
  r.excludes = {{1, 5}};
  return r;
}

MultiHotLabel draw_label_set(const SceneRecipe& recipe, Rng& rng) {
  MultiHotLabel set(recipe.num_labels(), 0);
  for (std::size_t i = 0; i < set.size(); ++i) set[i] = rng.bernoulli(recipe.labels[i].base_prob) ? 1 : 0;
  close_under_implications(recipe, set);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [a, b] : recipe.excludes) {
      if (set[a] && set[b]) {
        drop_with_antecedents(recipe, set, std::max(a, b));  // earlier label in the list wins
        changed = true;
      }
    }
  }
  return set;
}

MultiHotLabel sample_label_set(const SceneRecipe& recipe, Rng& rng) {
  recipe.validate();
  while (true) {
    MultiHotLabel set = draw_label_set(recipe, rng);
    if (std::any_of(set.begin(), set.end(), [](int v) { return v != 0; })) return set;
  }
}

RenderResult render(const MultiHotLabel& labels, const SceneRecipe& recipe, Rng& rng, std::size_t size) {
  if (labels.size() != recipe.num_labels()) throw DimensionError("label vector does not match the recipe");
  if (std::none_of(labels.begin(), labels.end(), [](int v) { return v != 0; })) {
    throw ContractError("render needs at least one positive label");
  }
  const std::size_t c = recipe.channels;
  const std::size_t plane = size * size;
  const auto s = static_cast<double>(size);

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<double> pixels(c * plane);
    const double fx = rng.uniform(0.2, 0.6), fy = rng.uniform(0.2, 0.6), phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double base = 0.12 + 0.05 * std::sin(fx * static_cast<double>(x) + fy * static_cast<double>(y) + phase);
        for (std::size_t ch = 0; ch < c; ++ch) pixels[ch * plane + y * size + x] = base + rng.uniform(-0.03, 0.03);
      }
    }

    struct Instance {
      std::size_t label;
      double cx, cy, size, intensity, offset;
    };
    std::vector<Instance> instances;
    for (std::size_t l = 0; l < labels.size(); ++l) {
      if (!labels[l]) continue;
      const auto& style = recipe.labels[l];
      const auto count = rng.integer(1, 3);
      for (std::int64_t i = 0; i < count; ++i) {
        Instance inst{l, 0, 0, rng.uniform(style.size_lo, style.size_hi),
                      rng.uniform(style.intensity_lo, style.intensity_hi), 0};
        const double margin = std::min(style.primitive == Primitive::bar ? 1.6 * inst.size : inst.size, s / 2 - 1);
        inst.cx = rng.uniform(margin, s - 1 - margin);
        inst.cy = rng.uniform(margin, s - 1 - margin);
        inst.offset = rng.uniform(-0.6 * s, 0.6 * s);
        instances.push_back(inst);
      }
    }
    for (std::size_t i = instances.size(); i > 1; --i) {
      std::swap(instances[i - 1], instances[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    }

    std::vector<int> owner(plane, -1);
    for (const auto& inst : instances) {
      const auto prim = recipe.labels[inst.label].primitive;
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const auto fxp = static_cast<double>(x), fyp = static_cast<double>(y);
          if (!inside(prim, fxp - inst.cx, fyp - inst.cy, inst.size, inst.offset, fxp, fyp)) continue;
          owner[y * size + x] = static_cast<int>(inst.label);
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double tint = 1.0 - 0.15 * static_cast<double>(ch) / static_cast<double>(c);
            pixels[ch * plane + y * size + x] = inst.intensity * tint;
          }
        }
      }
    }
    std::vector<std::size_t> visible(labels.size(), 0);
    for (int o : owner) {
      if (o >= 0) ++visible[static_cast<std::size_t>(o)];
    }
    bool all_visible = true;
    for (std::size_t l = 0; l < labels.size(); ++l) {
      if (labels[l] && visible[l] == 0) all_visible = false;
    }
    if (!all_visible) continue;
    for (auto& p : pixels) p = std::clamp(p, 0.0, 1.0);
    RenderResult result;
    result.item.image = Tensor::from({c, size, size}, std::move(pixels));
    result.item.labels = labels;
    result.visible_pixels = std::move(visible);
    return result;
  }
  throw DataError("could not render every positive label visibly after 100 attempts");
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out{label_names, {}, channels, image_size};
  out.items.reserve(indices.size());
  for (auto i : indices) out.items.push_back(items.at(i));
  return out;
}

std::vector<MultiHotLabel> Dataset::labels() const {
  std::vector<MultiHotLabel> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.labels);
  return out;
}

Dataset generate_dataset(const SceneRecipe& recipe, std::size_t n, std::uint64_t seed) {
  recipe.validate();
  if (n == 0) throw ContractError("generate_dataset needs n >= 1");
  Dataset ds{recipe.label_names(), {}, recipe.channels, recipe.image_size};
  ds.items.reserve(n);
  char id[32];
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, "data.image", i);
    MultiHotLabel labels = sample_label_set(recipe, rng);
    RenderResult r = render(labels, recipe, rng, recipe.image_size);
    std::snprintf(id, sizeof id, "img_%05zu", i);
    r.item.id = id;
    ds.items.push_back(std::move(r.item));
  }
  return ds;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_pgm(const std::string& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<std::uint8_t> read_pgm(const std::string& path, std::size_t& width, std::size_t& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing image file '" + path + "'");
  auto token = [&in, &path]() {
    std::string t;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        continue;
      }
      t += ch;
    }
    if (t.empty()) throw DataError("truncated PGM header in '" + path + "'");
    return t;
  };
  if (token() != "P5") throw DataError("'" + path + "' is not a binary PGM (P5)");
  try {
    width = std::stoul(token());
    height = std::stoul(token());
    if (std::stoul(token()) != 255) throw DataError("'" + path + "': only maxval 255 is supported");
  } catch (const std::invalid_argument&) {
    throw DataError("malformed PGM header in '" + path + "'");
  }
  std::vector<std::uint8_t> pixels(width * height);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) throw DataError("truncated pixel data in '" + path + "'");
  return pixels;
}

void save_dataset(const Dataset& ds, const std::string& dir, const SceneRecipe* recipe) {
  fs::create_directories(fs::path(dir) / "images");
  std::ofstream labels(fs::path(dir) / "labels.csv");
  if (!labels) throw DataError("cannot write labels.csv in '" + dir + "'");
  labels << "image";
  for (const auto& n : ds.label_names) labels << ',' << n;
  labels << '\n';
  for (const auto& item : ds.items) {
    const auto& shape = item.image.shape();
    std::vector<std::uint8_t> px(item.image.numel());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize(item.image[i]);
    write_pgm((fs::path(dir) / "images" / (item.id + ".pgm")).string(), shape[2], shape[0] * shape[1], px);
    labels << item.id;
    for (int v : item.labels) labels << ',' << v;
    labels << '\n';
  }
  if (recipe) {
    std::ofstream r(fs::path(dir) / "recipe.toml");
    r << recipe->to_config().dump();
  }
}

Dataset load_dataset(const std::string& dir) {
  const fs::path labels_path = fs::path(dir) / "labels.csv";
  std::ifstream in(labels_path);
  if (!in) throw DataError("missing labels file '" + labels_path.string() + "'");
  Dataset ds;
  ds.channels = 0;  // taken from the recipe, else from the first image's plane stack
  if (fs::exists(fs::path(dir) / "recipe.toml")) {
    const auto doc = ConfigDocument::load((fs::path(dir) / "recipe.toml").string());
    ds.channels = static_cast<std::size_t>(doc.get_int("recipe", "channels", 1));
  }
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty labels file '" + labels_path.string() + "'");
  auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "image") {
    throw DataError("labels.csv header must be 'image,<label_1>,...,<label_L>' with L >= 2");
  }
  ds.label_names.assign(header.begin() + 1, header.end());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = "labels.csv row " + std::to_string(row);
    if (cells.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    LabeledImage item;
    item.id = cells[0];
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i] != "0" && cells[i] != "1") {
        throw DataError(where + ": label cell '" + cells[i] + "' for '" + header[i] + "' is not 0 or 1");
      }
      item.labels.push_back(cells[i] == "1" ? 1 : 0);
    }
    const fs::path image_path = fs::path(dir) / "images" / (item.id + ".pgm");
    if (!fs::exists(image_path)) throw DataError(where + ": no image file '" + image_path.string() + "'");
    std::size_t w = 0, h = 0;
    const auto px = read_pgm(image_path.string(), w, h);
    if (ds.channels == 0) ds.channels = (w > 0 && h % w == 0) ? h / w : 1;
    if (h % ds.channels != 0 || h / ds.channels != w) {
      throw DataError(where + ": image '" + item.id + "' is " + std::to_string(w) + "x" + std::to_string(h) +
                      ", expected square planes for " + std::to_string(ds.channels) + " channel(s)");
    }
    if (ds.items.empty()) {
      ds.image_size = w;
    } else if (w != ds.image_size) {
      throw DataError(where + ": image size " + std::to_string(w) + " differs from " + std::to_string(ds.image_size));
    }
    std::vector<double> values(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) values[i] = px[i] / 255.0;
    item.image = Tensor::from({ds.channels, w, w}, std::move(values));
    ds.items.push_back(std::move(item));
  }
  if (ds.items.empty()) throw DataError("labels.csv in '" + dir + "' lists no images");
  return ds;
}

}  // namespace relparcel
