#pragma once

// Single-class detection scoring: greedy IoU matching with DontCare
// handling, micro-averaged precision / recall, and the simplified
// mAP = precision * recall.

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "annotate.hpp"
#include "detector_math.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace synthfridge {

enum class MatchOutcome { true_positive, false_positive, discarded };

struct MatchResult {
  std::size_t tp = 0, fp = 0, fn = 0;
  // Indexed like the input detections.
  std::vector<MatchOutcome> outcome;
  std::vector<std::optional<std::size_t>> matched_gt;
};

// Detections are taken in descending confidence (ties by input order). Each
// claims the unmatched, non-ignored ground truth it overlaps most, if that
// IoU reaches `iou_thresh`. A detection that cannot claim one but overlaps an
// ignored box by `iou_thresh` is discarded; anything else is a false
// positive. Unclaimed non-ignored ground truths are false negatives.
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const ObjectAnnotation> gts,
                                    double iou_thresh = 0.5) {
  if (!(0 < iou_thresh && iou_thresh < 1)) throw DomainError("IoU threshold must be in (0, 1)");
  MatchResult r;
  r.outcome.assign(dets.size(), MatchOutcome::false_positive);
  r.matched_gt.assign(dets.size(), std::nullopt);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<bool> claimed(gts.size(), false);
  for (std::size_t d : order) {
    double best = -1;
    std::optional<std::size_t> best_gt;
    double best_ignored = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(dets[d].bbox, gts[g].bbox);
      if (gts[g].ignore) {
        best_ignored = std::max(best_ignored, o);
      } else if (!claimed[g] && o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best_gt && best >= iou_thresh) {
      claimed[*best_gt] = true;
      r.outcome[d] = MatchOutcome::true_positive;
      r.matched_gt[d] = best_gt;
      ++r.tp;
    } else if (best_ignored >= iou_thresh) {
      r.outcome[d] = MatchOutcome::discarded;
    } else {
      ++r.fp;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gts[g].ignore && !claimed[g]) ++r.fn;
  return r;
}

inline double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct ImageScore {
  std::string id;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, map = 0;
  double iou_thresh = 0.5;
  std::vector<ImageScore> images;  // sorted by id

  double map_percent() const { return 100.0 * map; }
};

inline EvalReport finalize_report(EvalReport r) {
  r.precision = safe_ratio(r.tp, r.tp + r.fp);
  r.recall = safe_ratio(r.tp, r.tp + r.fn);
  r.map = r.precision * r.recall;
  return r;
}

// Counts are summed over images before the ratios are taken (micro
// average). Both maps must have exactly the same image ids.
inline EvalReport evaluate(const std::map<std::string, std::vector<Detection>>& detections,
                           const std::map<std::string, std::vector<ObjectAnnotation>>& ground_truth,
                           double iou_thresh = 0.5) {
  std::vector<std::string> offenders;
  for (const auto& [id, _] : detections)
    if (!ground_truth.contains(id)) offenders.push_back(id + " (no ground truth)");
  for (const auto& [id, _] : ground_truth)
    if (!detections.contains(id)) offenders.push_back(id + " (no detections)");
  if (!offenders.empty()) {
    std::string msg = "image ids differ:";
    for (const auto& o : offenders) msg += " " + o;
    throw KeyError(msg);
  }

  EvalReport report;
  report.iou_thresh = iou_thresh;
  for (const auto& [id, gts] : ground_truth) {
    const MatchResult m = match_detections(detections.at(id), gts, iou_thresh);
    report.images.push_back({id, m.tp, m.fp, m.fn});
    report.tp += m.tp;
    report.fp += m.fp;
    report.fn += m.fn;
  }
  return finalize_report(std::move(report));
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  return {{"format", "synthfridge-eval"},
          {"version", 1},
          {"iou_thresh", r.iou_thresh},
          {"images", r.images.size()},
          {"tp", r.tp},
          {"fp", r.fp},
          {"fn", r.fn},
          {"precision", r.precision},
          {"recall", r.recall},
          {"map", r.map},
          {"map_percent", r.map_percent()}};
}

inline std::string report_to_csv(const EvalReport& r) {
  std::string out = "image_id,tp,fp,fn,precision,recall,map\n";
  char buf[160];
  for (const ImageScore& s : r.images) {
    const double p = safe_ratio(s.tp, s.tp + s.fp), rc = safe_ratio(s.tp, s.tp + s.fn);
    std::snprintf(buf, sizeof buf, ",%zu,%zu,%zu,%.6f,%.6f,%.6f\n", s.tp, s.fp, s.fn, p, rc, p * rc);
    out += s.id + buf;
  }
  return out;
}

inline std::string report_to_text(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "images     %zu\nIoU        %.2f\nTP FP FN   %zu %zu %zu\nprecision  %.4f\nrecall     %.4f\n"
                "mAP        %.4f (%.2f)\n",
                r.images.size(), r.iou_thresh, r.tp, r.fp, r.fn, r.precision, r.recall, r.map, r.map_percent());
  return buf;
}

}  // namespace synthfridge
