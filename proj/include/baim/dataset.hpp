#ifndef BAIM_DATASET_HPP
#define BAIM_DATASET_HPP

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "baim/rng.hpp"
#include "baim/tensor.hpp"
#include "baim/types.hpp"

namespace baim {

// Procedural image families standing in for real photo data at desk
// scale. The three families occupy disjoint mean-intensity bands
// (blobs < rectangles < stripes), which makes the task labels linearly
// separable in mean-pixel statistics; generation asserts the band.
enum class Family { kBlobs, kStripes, kRectangles };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::kBlobs: return "blobs";
    case Family::kStripes: return "stripes";
    case Family::kRectangles: return "rectangles";
  }
  return "?";
}

inline Family family_from_name(const std::string& name) {
  if (name == "blobs") return Family::kBlobs;
  if (name == "stripes") return Family::kStripes;
  if (name == "rectangles") return Family::kRectangles;
  throw config_error("unknown family '" + name + "' (blobs|stripes|rectangles)");
}

struct ParamRange {
  double lo = 0, hi = 0;

  void check(const char* what) const {
    if (!(lo <= hi)) throw config_error(std::string("invalid range for ") + what);
  }

  // Deterministic node-specific sub-interval: each node sees a narrower
  // window inside the family range, positioned by the node id. This is
  // the per-node distribution shift.
  ParamRange node_window(int node_id, double window = 0.5) const {
    RngStream pick(RngStream::mix(0xD157 + static_cast<std::uint64_t>(node_id)));
    const double span = (hi - lo) * window;
    const double start = lo + (hi - lo - span) * pick.uniform();
    return {start, start + span};
  }
};

struct SyntheticTaskSpec {
  int task_id = 0;
  Family family = Family::kBlobs;
  int image_side = 16;
  std::map<std::string, ParamRange> ranges;  // filled with family defaults when empty
  double node_window = 0.5;

  void validate() const {
    if (image_side < 4) throw config_error("task spec: image_side must be at least 4");
    if (!(node_window > 0 && node_window <= 1))
      throw config_error("task spec: node_window must lie in (0,1]");
    for (const auto& [key, r] : ranges) r.check(key.c_str());
  }
};

// Mean-intensity bands per family; disjoint by construction.
inline std::pair<double, double> family_mean_band(Family f) {
  switch (f) {
    case Family::kBlobs: return {0.01, 0.23};
    case Family::kRectangles: return {0.24, 0.50};
    case Family::kStripes: return {0.52, 0.72};
  }
  return {0, 1};
}

inline std::map<std::string, ParamRange> default_ranges(Family f) {
  switch (f) {
    case Family::kBlobs:
      return {{"cx", {0.30, 0.70}}, {"cy", {0.30, 0.70}}, {"radius", {0.10, 0.18}}, {"amp", {0.75, 1.0}}};
    case Family::kStripes:
      return {{"freq", {1.5, 3.5}}, {"angle", {0.0, 3.141592653589793}}, {"phase", {0.0, 6.283185307179586}}};
    case Family::kRectangles:
      return {{"x0", {0.05, 0.45}}, {"y0", {0.05, 0.45}}, {"w", {0.50, 0.70}}, {"h", {0.55, 0.70}},
              {"fill", {0.80, 0.95}}};
  }
  return {};
}

namespace detail {

inline double draw(const std::map<std::string, ParamRange>& ranges, const std::string& key, int node_id,
                   double window, RngStream& rng) {
  ParamRange r = ranges.at(key).node_window(node_id, window);
  return rng.uniform(r.lo, r.hi);
}

}  // namespace detail

// One image from the node's jittered parameter window. Pixels land in
// [0,1]; the family's analytic mean band is asserted.
inline Tensor gen_image(const SyntheticTaskSpec& spec, int node_id, RngStream& rng) {
  const int side = spec.image_side;
  const auto& ranges = spec.ranges;
  Tensor img({static_cast<long>(side) * side});
  auto uv = [&](int p) { return static_cast<double>(p) / static_cast<double>(side - 1); };

  switch (spec.family) {
    case Family::kBlobs: {
      const double cx = detail::draw(ranges, "cx", node_id, spec.node_window, rng);
      const double cy = detail::draw(ranges, "cy", node_id, spec.node_window, rng);
      const double r = detail::draw(ranges, "radius", node_id, spec.node_window, rng);
      const double a = detail::draw(ranges, "amp", node_id, spec.node_window, rng);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double dx = uv(x) - cx;
          const double dy = uv(y) - cy;
          img[y * side + x] = static_cast<real>(a * std::exp(-(dx * dx + dy * dy) / (2 * r * r)));
        }
      break;
    }
    case Family::kStripes: {
      const double f = detail::draw(ranges, "freq", node_id, spec.node_window, rng);
      const double th = detail::draw(ranges, "angle", node_id, spec.node_window, rng);
      const double ph = detail::draw(ranges, "phase", node_id, spec.node_window, rng);
      const double cs = std::cos(th);
      const double sn = std::sin(th);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double t = uv(x) * cs + uv(y) * sn;
          img[y * side + x] =
              static_cast<real>(0.62 + 0.32 * std::sin(6.283185307179586 * f * t + ph));
        }
      break;
    }
    case Family::kRectangles: {
      const double x0 = detail::draw(ranges, "x0", node_id, spec.node_window, rng);
      const double y0 = detail::draw(ranges, "y0", node_id, spec.node_window, rng);
      const double w = detail::draw(ranges, "w", node_id, spec.node_window, rng);
      const double h = detail::draw(ranges, "h", node_id, spec.node_window, rng);
      const double fill = detail::draw(ranges, "fill", node_id, spec.node_window, rng);
      const double bg = 0.05;
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const bool inside = uv(x) >= x0 && uv(x) <= std::min(1.0, x0 + w) && uv(y) >= y0 &&
                              uv(y) <= std::min(1.0, y0 + h);
          img[y * side + x] = static_cast<real>(inside ? fill : bg);
        }
      break;
    }
  }

  double mean = 0;
  for (long i = 0; i < img.size(); ++i) {
    img[i] = std::min(real(1), std::max(real(0), img[i]));
    mean += img[i];
  }
  mean /= static_cast<double>(img.size());
  auto [lo, hi] = family_mean_band(spec.family);
  if (mean < lo || mean > hi)
    throw numeric_error(std::string("generated ") + family_name(spec.family) + " image mean " +
                        std::to_string(mean) + " escaped its separability band");
  return img;
}

// Deterministic per (spec, node_id, n, seed).
inline std::vector<Tensor> gen_dataset(SyntheticTaskSpec spec, int node_id, int n,
                                       std::uint64_t seed) {
  if (n < 1) throw config_error("gen_dataset: n must be >= 1");
  spec.validate();
  if (spec.ranges.empty()) spec.ranges = default_ranges(spec.family);
  for (const auto& [key, r] : spec.ranges) r.check(key.c_str());
  RngStream rng = RngStream(seed)
                      .fork(0xDA7A)
                      .fork(static_cast<std::uint64_t>(spec.task_id))
                      .fork(static_cast<std::uint64_t>(node_id));
  std::vector<Tensor> images;
  images.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) images.push_back(gen_image(spec, node_id, rng));
  return images;
}

}  // namespace baim

#endif  // BAIM_DATASET_HPP
