#pragma once

// Detector-side math for coverage-map detectors: ground-truth grid
// encoding, the coverage (L2) and box-corner (L1) losses with gradients, and
// the threshold-and-cluster decoder.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "annotate.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace synthfridge {

using Corners = std::array<double, 4>;  // x1, y1, x2, y2 in absolute pixels

// Row-major grid of cells `stride` pixels wide. Cell (cx, cy) has its
// center at (cx * stride + stride / 2, cy * stride + stride / 2).
struct CoverageGrid {
  int stride = 16;
  int gw = 0, gh = 0;
  std::vector<double> coverage;  // gw * gh, in [0, 1]
  std::vector<Corners> boxes;    // zero where coverage is zero

  static CoverageGrid zeros(int gw, int gh, int stride = 16) {
    CoverageGrid g;
    g.stride = stride;
    g.gw = gw;
    g.gh = gh;
    g.coverage.assign(static_cast<std::size_t>(gw) * static_cast<std::size_t>(gh), 0.0);
    g.boxes.assign(g.coverage.size(), Corners{});
    return g;
  }

  std::size_t cells() const { return coverage.size(); }
  std::size_t cell(int cx, int cy) const { return static_cast<std::size_t>(cy) * static_cast<std::size_t>(gw) + static_cast<std::size_t>(cx); }
  double center_x(int cx) const { return cx * stride + stride / 2.0; }
  double center_y(int cy) const { return cy * stride + stride / 2.0; }

  bool same_shape(const CoverageGrid& o) const { return stride == o.stride && gw == o.gw && gh == o.gh; }

  friend bool operator==(const CoverageGrid&, const CoverageGrid&) = default;
};

// Cells whose center lies in [x1, x2) x [y1, y2) of a box get coverage 1 and
// that box's corners; a center inside several boxes takes the smallest (ties
// by input order). Ignored annotations are skipped.
inline CoverageGrid encode_coverage(std::span<const ObjectAnnotation> annotations, int stride = 16, int width = 512,
                                    int height = 512) {
  if (stride <= 0 || width <= 0 || height <= 0 || width % stride != 0 || height % stride != 0)
    throw ConfigError("stride " + std::to_string(stride) + " does not divide image size " + std::to_string(width) +
                      "x" + std::to_string(height));
  CoverageGrid g = CoverageGrid::zeros(width / stride, height / stride, stride);
  std::vector<double> best_area(g.cells(), INFINITY);
  for (const ObjectAnnotation& a : annotations) {
    if (a.ignore) continue;
    const BBox2D& b = a.bbox;
    for (int cy = 0; cy < g.gh; ++cy) {
      const double y = g.center_y(cy);
      if (!(b.y1() <= y && y < b.y2())) continue;
      for (int cx = 0; cx < g.gw; ++cx) {
        const double x = g.center_x(cx);
        if (!(b.x1() <= x && x < b.x2())) continue;
        const std::size_t i = g.cell(cx, cy);
        if (b.area() < best_area[i]) {
          best_area[i] = b.area();
          g.coverage[i] = 1.0;
          g.boxes[i] = {b.x1(), b.y1(), b.x2(), b.y2()};
        }
      }
    }
  }
  return g;
}

struct LossWeights {
  double coverage = 1.0;
  double bbox = 2.0;
};

// A batch of N ground-truth / prediction grid pairs.
struct LossBatch {
  std::vector<CoverageGrid> truth;
  std::vector<CoverageGrid> pred;
  LossWeights weights;
};

namespace detail {

inline void check_batch(const LossBatch& b) {
  if (b.truth.empty()) throw DimensionError("batch is empty");
  if (b.truth.size() != b.pred.size())
    throw DimensionError("batch has " + std::to_string(b.truth.size()) + " truth and " +
                         std::to_string(b.pred.size()) + " predicted grids");
  for (std::size_t i = 0; i < b.truth.size(); ++i) {
    const CoverageGrid& t = b.truth[i];
    const CoverageGrid& p = b.pred[i];
    if (!t.same_shape(p) || t.coverage.size() != p.coverage.size() || t.boxes.size() != p.boxes.size() ||
        t.boxes.size() != t.coverage.size())
      throw DimensionError("grid shapes differ at batch index " + std::to_string(i));
  }
}

}  // namespace detail

struct CoverageLoss {
  double value = 0;
  std::vector<std::vector<double>> gradient;  // d value / d pred coverage, per image and cell
};

// (1 / 2N) * sum over images and cells of (truth - pred)^2.
inline CoverageLoss coverage_loss(const LossBatch& batch) {
  detail::check_batch(batch);
  const double n = static_cast<double>(batch.truth.size());
  CoverageLoss out;
  for (std::size_t i = 0; i < batch.truth.size(); ++i) {
    const auto& t = batch.truth[i].coverage;
    const auto& p = batch.pred[i].coverage;
    std::vector<double> g(t.size());
    for (std::size_t c = 0; c < t.size(); ++c) {
      const double d = p[c] - t[c];
      out.value += d * d;
      g[c] = d / n;
    }
    out.gradient.push_back(std::move(g));
  }
  out.value /= 2 * n;
  return out;
}

struct BBoxLoss {
  double value = 0;
  std::vector<std::vector<Corners>> gradient;  // d value / d pred corners
};

// (1 / 2N) * sum over cells with truth coverage 1 of the L1 corner error.
// The subgradient at exact equality is 0.
inline BBoxLoss bbox_loss(const LossBatch& batch) {
  detail::check_batch(batch);
  const double n = static_cast<double>(batch.truth.size());
  const double step = 1.0 / (2 * n);
  BBoxLoss out;
  for (std::size_t i = 0; i < batch.truth.size(); ++i) {
    const CoverageGrid& t = batch.truth[i];
    const CoverageGrid& p = batch.pred[i];
    std::vector<Corners> g(t.cells(), Corners{});
    for (std::size_t c = 0; c < t.cells(); ++c) {
      if (t.coverage[c] != 1.0) continue;
      for (std::size_t k = 0; k < 4; ++k) {
        const double d = p.boxes[c][k] - t.boxes[c][k];
        out.value += std::abs(d);
        g[c][k] = d > 0 ? step : (d < 0 ? -step : 0.0);
      }
    }
    out.gradient.push_back(std::move(g));
  }
  out.value *= step;
  return out;
}

inline double total_loss(const LossBatch& batch) {
  if (!(batch.weights.coverage >= 0 && batch.weights.bbox >= 0))
    throw DomainError("loss weights must be nonnegative");
  return batch.weights.coverage * coverage_loss(batch).value + batch.weights.bbox * bbox_loss(batch).value;
}

struct Detection {
  BBox2D bbox;
  double confidence = 0;  // [0, 1]
};

struct DecodeParams {
  double threshold = 0.6;    // minimum cell coverage for a candidate
  double cluster_iou = 0.5;  // IoU with the cluster seed needed to join
  int min_cluster = 2;       // smaller clusters are discarded
};

inline void validate_decode_params(const DecodeParams& p) {
  if (!(0 < p.threshold && p.threshold < 1)) throw DomainError("coverage threshold must be in (0, 1)");
  if (!(0 < p.cluster_iou && p.cluster_iou < 1)) throw DomainError("cluster IoU must be in (0, 1)");
  if (p.min_cluster < 1) throw DomainError("minimum cluster size must be >= 1");
}

// Greedy clustering of thresholded cells. The highest-coverage unassigned
// candidate seeds a cluster and absorbs every unassigned candidate whose box
// overlaps the seed's by at least `cluster_iou`. Each surviving cluster
// yields the coverage-weighted mean box with the mean coverage as
// confidence. Ties break by row-major cell index throughout; cells whose
// predicted box has no area are not candidates.
inline std::vector<Detection> decode_detections(const CoverageGrid& grid, const DecodeParams& params = {}) {
  validate_decode_params(params);
  struct Candidate {
    std::size_t cell;
    double coverage;
    BBox2D box;
  };
  std::vector<Candidate> cand;
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    if (!(grid.coverage[c] >= params.threshold)) continue;
    const Corners& b = grid.boxes[c];
    if (!BBox2D::valid(b[0], b[1], b[2], b[3])) continue;
    cand.push_back({c, grid.coverage[c], BBox2D(b[0], b[1], b[2], b[3])});
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Candidate& a, const Candidate& b) { return a.coverage > b.coverage; });

  struct Cluster {
    Detection det;
    std::size_t seed_order;
  };
  std::vector<Cluster> clusters;
  std::vector<bool> taken(cand.size(), false);
  for (std::size_t s = 0; s < cand.size(); ++s) {
    if (taken[s]) continue;
    std::vector<std::size_t> members;
    for (std::size_t j = s; j < cand.size(); ++j)
      if (!taken[j] && (j == s || iou(cand[s].box, cand[j].box) >= params.cluster_iou)) {
        taken[j] = true;
        members.push_back(j);
      }
    if (members.size() < static_cast<std::size_t>(params.min_cluster)) continue;
    // Members are visited in row-major cell order so sums are reproducible.
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return cand[a].cell < cand[b].cell; });
    double wsum = 0;
    Corners acc{};
    for (std::size_t m : members) {
      const double w = cand[m].coverage;
      wsum += w;
      acc[0] += w * cand[m].box.x1();
      acc[1] += w * cand[m].box.y1();
      acc[2] += w * cand[m].box.x2();
      acc[3] += w * cand[m].box.y2();
    }
    const double conf = std::clamp(wsum / static_cast<double>(members.size()), 0.0, 1.0);
    clusters.push_back({{BBox2D(acc[0] / wsum, acc[1] / wsum, acc[2] / wsum, acc[3] / wsum), conf}, s});
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.det.confidence > b.det.confidence; });
  std::vector<Detection> out;
  for (const Cluster& c : clusters) out.push_back(c.det);
  return out;
}

// ---------------------------------------------------------------------------
// Binary grid format, little-endian:
//   8 bytes  magic "SFCOVGRD"
//   u32      version (1)
//   u32      stride, gw, gh
//   f32      coverage[gh][gw]
//   f32      boxes[gh][gw][4]   (x1, y1, x2, y2)

inline constexpr char kGridMagic[8] = {'S', 'F', 'C', 'O', 'V', 'G', 'R', 'D'};
inline constexpr std::uint32_t kGridFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError(0, 0, "truncated coverage grid");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline void put_f32(std::ostream& os, double v) { put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
inline double get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

}  // namespace detail

inline void write_coverage_grid(std::ostream& os, const CoverageGrid& g) {
  os.write(kGridMagic, sizeof kGridMagic);
  detail::put_u32(os, kGridFormatVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(g.stride));
  detail::put_u32(os, static_cast<std::uint32_t>(g.gw));
  detail::put_u32(os, static_cast<std::uint32_t>(g.gh));
  for (double c : g.coverage) detail::put_f32(os, c);
  for (const Corners& b : g.boxes)
    for (double v : b) detail::put_f32(os, v);
}

inline CoverageGrid read_coverage_grid(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kGridMagic, 8) != 0) throw ParseError(0, 0, "not a coverage grid");
  const std::uint32_t version = detail::get_u32(is);
  if (version != kGridFormatVersion) throw ParseError(0, 0, "unsupported coverage grid version " + std::to_string(version));
  const auto stride = static_cast<int>(detail::get_u32(is));
  const auto gw = static_cast<int>(detail::get_u32(is));
  const auto gh = static_cast<int>(detail::get_u32(is));
  if (stride <= 0 || gw <= 0 || gh <= 0 || gw > 1 << 16 || gh > 1 << 16) throw ParseError(0, 0, "bad grid header");
  CoverageGrid g = CoverageGrid::zeros(gw, gh, stride);
  for (double& c : g.coverage) c = detail::get_f32(is);
  for (Corners& b : g.boxes)
    for (double& v : b) v = detail::get_f32(is);
  return g;
}

}  // namespace synthfridge
