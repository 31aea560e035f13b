#ifndef RELPARCEL_DATA_HPP
#define RELPARCEL_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relparcel/config.hpp"
#include "relparcel/metrics.hpp"
#include "relparcel/rng.hpp"
#include "relparcel/tensor.hpp"

namespace relparcel {

enum class Primitive { disk, square, bar, cross, ring, stripe };

std::string to_string(Primitive p);
Primitive primitive_from(const std::string& name);

/// How one label is drawn and how often it is drawn by itself.
struct LabelStyle {
  std::string name;
  Primitive primitive = Primitive::disk;
  double intensity_lo = 0.5;
  double intensity_hi = 0.8;
  double size_lo = 3.0;  // characteristic size in pixels (radius / half-extent)
  double size_hi = 5.0;
  double base_prob = 0.3;
};

/// Labels, their renderers and co-occurrence rules. Rules hold label indices.
struct SceneRecipe {
  std::vector<LabelStyle> labels;
  std::vector<std::pair<std::size_t, std::size_t>> implies;   // a => b
  std::vector<std::pair<std::size_t, std::size_t>> excludes;  // a excludes b
  std::size_t image_size = 32;
  std::size_t channels = 1;

  std::size_t num_labels() const { return labels.size(); }
  std::vector<std::string> label_names() const;
  std::size_t index_of(const std::string& name) const;
  /// Throws ConfigError on L < 2, bad indices, a label whose implication
  /// closure contains both sides of an exclusion, or no way to draw a label.
  void validate() const;

  ConfigDocument to_config() const;
  static SceneRecipe from_config(const ConfigDocument& doc);
};

/// Six primitives; cross => bar, ring => disk, square excludes stripe.
SceneRecipe default_recipe();

/// One Bernoulli round closed under implications with exclusions enforced.
/// May be empty.
MultiHotLabel draw_label_set(const SceneRecipe& recipe, Rng& rng);

/// draw_label_set, redrawn until at least one label is positive.
MultiHotLabel sample_label_set(const SceneRecipe& recipe, Rng& rng);

struct LabeledImage {
  Tensor image;  // [C, S, S], values in [0, 1]
  MultiHotLabel labels;
  std::string id;
};

struct RenderResult {
  LabeledImage item;
  std::vector<std::size_t> visible_pixels;  // per label, after occlusion
};

/// Draws 1-3 instances of every positive label over a textured background.
RenderResult render(const MultiHotLabel& labels, const SceneRecipe& recipe, Rng& rng, std::size_t size);

struct Dataset {
  std::vector<std::string> label_names;
  std::vector<LabeledImage> items;
  std::size_t channels = 1;
  std::size_t image_size = 32;

  std::size_t size() const { return items.size(); }
  std::size_t num_labels() const { return label_names.size(); }
  Dataset subset(const std::vector<std::size_t>& indices) const;
  std::vector<MultiHotLabel> labels() const;
};

/// Image i uses the stream substream(seed, "data.image", i).
Dataset generate_dataset(const SceneRecipe& recipe, std::size_t n, std::uint64_t seed);

/// images/<id>.pgm + labels.csv (+ recipe.toml when a recipe is given).
void save_dataset(const Dataset& ds, const std::string& dir, const SceneRecipe* recipe = nullptr);
Dataset load_dataset(const std::string& dir);

/// Binary P5 graymap, maxval 255. Multi-channel images stack channels vertically.
void write_pgm(const std::string& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& pixels);
std::vector<std::uint8_t> read_pgm(const std::string& path, std::size_t& width, std::size_t& height);

std::uint8_t quantize(double v);

}  // namespace relparcel

#endif  // RELPARCEL_DATA_HPP
