#include "relparcel/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "relparcel/errors.hpp"
#include "relparcel/relation.hpp"

namespace fs = std::filesystem;

namespace relparcel {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

std::vector<CornerRecord> corner_records(const Model& model, const Tensor& image,
                                         const std::vector<std::string>& label_names) {
  NoGradGuard no_grad;
  const ModelOutputs out = model.forward(image);
  std::vector<CornerRecord> records;
  for (const auto& a : out.attentional) {
    records.push_back({label_names.at(a.label), region_corners(transform_from(a.theta))});
  }
  return records;
}

std::string format_corners(const std::vector<CornerRecord>& records) {
  std::string out = "label,bl_x,bl_y,tr_x,tr_y\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", r.label.c_str(), r.corners.bottom_left.x,
                  r.corners.bottom_left.y, r.corners.top_right.x, r.corners.top_right.y);
    out += buf;
  }
  return out;
}

std::vector<std::uint8_t> parcel_heatmap(const Tensor& parcel) {
  if (parcel.rank() != 3) throw DimensionError("parcel_heatmap expects [K,H,W]");
  const std::size_t plane = parcel.dim(1) * parcel.dim(2);
  const auto v = parcel.data();
  const auto peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  const double* channel = v.data() + (peak / plane) * plane;
  const auto [lo_it, hi_it] = std::minmax_element(channel, channel + plane);
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::uint8_t> out(plane, 0);
  if (hi > lo) {
    for (std::size_t i = 0; i < plane; ++i) {
      out[i] = static_cast<std::uint8_t>(std::lround((channel[i] - lo) / (hi - lo) * 255.0));
    }
  }
  return out;
}

VisualizationSummary export_visualizations(const Model& model, const Dataset& ds, const std::string& out_dir) {
  if (ds.num_labels() != model.num_labels()) {
    throw DataError("checkpoint has " + std::to_string(model.num_labels()) + " labels, dataset " +
                    std::to_string(ds.num_labels()));
  }
  NoGradGuard no_grad;
  VisualizationSummary summary;
  for (const auto& item : ds.items) {
    const fs::path dir = fs::path(out_dir) / item.id;
    fs::create_directories(dir);
    const ModelOutputs out = model.forward(item.image);

    std::vector<CornerRecord> records;
    for (const auto& a : out.attentional) {
      records.push_back({ds.label_names[a.label], region_corners(transform_from(a.theta))});
    }
    write_text(dir / "corners.csv", format_corners(records));
    ++summary.files;

    if (model.config().head == HeadKind::relation) {
      const RelationMatrix rm = relation_matrix(out.attentional, model.relation());
      write_text(dir / "relation.csv", format_relation_matrix(rm.normalized, rm.size));
      write_text(dir / "relation_raw.csv", format_relation_matrix(rm.raw, rm.size));
      summary.files += 2;
    }

    for (const auto& p : out.parcels) {
      const auto& maps = p.maps;
      write_pgm((dir / ("parcel_" + ds.label_names[p.label] + ".pgm")).string(), maps.dim(2), maps.dim(1),
                parcel_heatmap(maps));
      ++summary.files;
    }
    ++summary.images;
  }
  return summary;
}

}  // namespace relparcel
