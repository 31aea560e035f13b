#ifndef RELPARCEL_VISUALIZE_HPP
#define RELPARCEL_VISUALIZE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "relparcel/attention.hpp"
#include "relparcel/data.hpp"
#include "relparcel/model.hpp"

namespace relparcel {

struct CornerRecord {
  std::string label;
  RegionCorners corners;
};

/// Attention-region corners of every label for one image.
std::vector<CornerRecord> corner_records(const Model& model, const Tensor& image,
                                         const std::vector<std::string>& label_names);

/// "label,bl_x,bl_y,tr_x,tr_y" header then one row per label, 6 decimals.
std::string format_corners(const std::vector<CornerRecord>& records);

/// Channel of a [K,H,W] parcel holding the largest activation, min-max
/// scaled to 0..255 (a constant map becomes all zeros).
std::vector<std::uint8_t> parcel_heatmap(const Tensor& parcel);

struct VisualizationSummary {
  std::size_t images = 0;
  std::size_t files = 0;
};

/// Per image <out>/<id>/: corners.csv, relation.csv (row-normalized),
/// relation_raw.csv, parcel_<label>.pgm for every label. Relation files are
/// skipped for models without a relation head.
VisualizationSummary export_visualizations(const Model& model, const Dataset& ds, const std::string& out_dir);

}  // namespace relparcel

#endif  // RELPARCEL_VISUALIZE_HPP
