#pragma once

// Independent reference implementations used to cross-check the library.
// Each oracle is a direct transcription of the underlying definition,
// written without reference to the production code paths: the axis-map
// oracle evaluates the quotient formula literally in O(n^2), the AP oracle
// enumerates detection prefixes instead of envelope interpolation, the
// stream oracle replays the policy with a linear scan, and the vanishing
// point oracle solves the 2x2 normal equations by Cramer's rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "ppwarp/eval.hpp"
#include "ppwarp/geometry.hpp"
#include "ppwarp/warp.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Axis map: T^{-1}(x) = sum_j s~[j] k(j-x) j / sum_j s~[j] k(j-x) where s~ is
// s extended by clamping indices, k is a Gaussian of sigma = sigma_frac *
// in_len truncated at 3 sigma, and x runs over pixel-center query points.
// The truncated kernel's own first moment (its centroid minus x, nonzero
// whenever the integer window is not mirror-symmetric about x) is subtracted
// so that a constant s maps every query to itself.
inline std::vector<double> axis_map(const std::vector<double>& s, int in_len,
                                    int out_len, double sigma_frac,
                                    bool endpoint_rescale) {
  const double sigma = sigma_frac * in_len;
  const double radius = 3.0 * sigma;
  std::vector<double> vals(static_cast<size_t>(out_len));
  for (int i = 0; i < out_len; ++i) {
    const double x =
        (i + 0.5) * static_cast<double>(in_len) / static_cast<double>(out_len) -
        0.5;
    double num = 0.0, den = 0.0;
    double knum = 0.0, kden = 0.0;
    for (int j = static_cast<int>(std::ceil(x - radius - 1e-9));
         j <= static_cast<int>(std::floor(x + radius + 1e-9)); ++j) {
      const double sj = s[static_cast<size_t>(std::clamp(j, 0, in_len - 1))];
      const double d = j - x;
      const double k = std::exp(-d * d / (2.0 * sigma * sigma));
      num += sj * k * j;
      den += sj * k;
      knum += k * j;
      kden += k;
    }
    vals[static_cast<size_t>(i)] = num / den - (knum / kden - x);
  }
  if (endpoint_rescale) {
    const double v0 = vals.front();
    const double span = vals.back() - v0;
    for (double& v : vals) v = (v - v0) * (in_len - 1) / span;
    vals.front() = 0.0;
    vals.back() = static_cast<double>(in_len - 1);
  } else {
    for (double& v : vals)
      v = std::min(std::max(v, 0.0), static_cast<double>(in_len - 1));
  }
  return vals;
}

// ---------------------------------------------------------------------------
// COCO-style AP by prefix enumeration.

struct ApOut {
  std::optional<double> ap, ap50, ap75, ap_s, ap_m, ap_l;
  std::map<int, double> per_class;
};

namespace detail {

struct Rec {
  double score;
  size_t frame;
  int idx;
  bool tp;
  bool ignore;
};

inline double box_iou(const ppw::Box& a, const ppw::Box& b) {
  const double w =
      std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h =
      std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = std::max(a.area(), 0.0) + std::max(b.area(), 0.0) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Greedy per-frame matching for one class / threshold / area window, in
// detection score order; each ground truth is used at most once, ignored
// ground truth is offered only after every live one.
inline void match_one(const std::vector<ppw::Box>& dets,
                      const std::vector<ppw::Box>& gts, size_t frame, int cls,
                      double thr, double area_lo, double area_hi,
                      std::vector<Rec>& recs, long& npig) {
  std::vector<std::pair<const ppw::Box*, int>> ds;
  for (size_t i = 0; i < dets.size(); ++i)
    if (dets[i].cls == cls) ds.push_back({&dets[i], static_cast<int>(i)});
  std::stable_sort(ds.begin(), ds.end(), [](const auto& a, const auto& b) {
    return a.first->score > b.first->score;
  });

  std::vector<const ppw::Box*> gs;
  for (const ppw::Box& g : gts)
    if (g.cls == cls) gs.push_back(&g);
  auto ignored = [&](const ppw::Box& b) {
    return !(b.area() >= area_lo && b.area() < area_hi);
  };
  std::vector<size_t> order;
  for (size_t g = 0; g < gs.size(); ++g)
    if (!ignored(*gs[g])) order.push_back(g);
  for (size_t g = 0; g < gs.size(); ++g)
    if (ignored(*gs[g])) order.push_back(g);
  for (const ppw::Box* g : gs)
    if (!ignored(*g)) ++npig;

  std::vector<bool> used(gs.size(), false);
  for (const auto& [d, idx] : ds) {
    double best = thr;
    long chosen = -1;
    for (size_t oi = 0; oi < order.size(); ++oi) {
      const size_t g = order[oi];
      if (used[g]) continue;
      if (chosen >= 0 && !ignored(*gs[static_cast<size_t>(chosen)]) &&
          ignored(*gs[g]))
        break;
      const double v = box_iou(*d, *gs[g]);
      if (v < best) continue;
      best = v;
      chosen = static_cast<long>(g);
    }
    Rec r{d->score, frame, idx, false, false};
    if (chosen >= 0) {
      used[static_cast<size_t>(chosen)] = true;
      r.ignore = ignored(*gs[static_cast<size_t>(chosen)]);
      r.tp = !r.ignore;
    } else {
      r.ignore = ignored(*d);
    }
    recs.push_back(r);
  }
}

// AP over 101 recall thresholds: for each r, the best precision among
// detection-list prefixes whose recall reaches r (prefix enumeration keeps
// tied scores distinct, unlike sweeping score cutoffs).
inline double prefix_ap(std::vector<Rec> recs, long npig) {
  std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.idx < b.idx;
  });
  std::vector<double> prec, rec;
  long tp = 0, fp = 0;
  for (const Rec& r : recs) {
    if (r.ignore) continue;
    (r.tp ? tp : fp) += 1;
    prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    rec.push_back(static_cast<double>(tp) / static_cast<double>(npig));
  }
  double total = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    double best = 0.0;
    for (size_t p = 0; p < prec.size(); ++p)
      if (rec[p] >= r) best = std::max(best, prec[p]);
    total += best;
  }
  return total / 101.0;
}

}  // namespace detail

inline ApOut coco_ap(const std::vector<std::vector<ppw::Box>>& dets,
                     const std::vector<ppw::GroundTruthFrame>& gts) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double windows[4][2] = {
      {0.0, kInf}, {0.0, 1024.0}, {1024.0, 9216.0}, {9216.0, kInf}};

  std::set<int> classes;
  for (const auto& f : gts)
    for (const auto& b : f.boxes) classes.insert(b.cls);

  ApOut out;
  // window index -> per-class mean-over-thresholds AP, classes ascending
  std::map<int, std::vector<double>> window_aps;
  std::vector<double> ap50s, ap75s;
  for (int cls : classes) {
    for (int w = 0; w < 4; ++w) {
      long npig_probe = 0;
      std::vector<detail::Rec> probe;
      for (size_t f = 0; f < gts.size(); ++f)
        detail::match_one(dets[f], gts[f].boxes, f, cls, 0.5, windows[w][0],
                          windows[w][1], probe, npig_probe);
      // npig counts once per threshold pass; the probe ran one pass.
      if (npig_probe == 0) continue;

      double sum = 0.0;
      for (int t = 0; t < 10; ++t) {
        const double thr = 0.5 + 0.05 * t;
        long npig = 0;
        std::vector<detail::Rec> recs;
        for (size_t f = 0; f < gts.size(); ++f)
          detail::match_one(dets[f], gts[f].boxes, f, cls, thr, windows[w][0],
                            windows[w][1], recs, npig);
        const double ap = detail::prefix_ap(std::move(recs), npig);
        sum += ap;
        if (w == 0 && t == 0) ap50s.push_back(ap);
        if (w == 0 && t == 5) ap75s.push_back(ap);
      }
      window_aps[w].push_back(sum / 10);
      if (w == 0) out.per_class[cls] = sum / 10;
    }
  }

  auto mean = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  if (window_aps.count(0)) out.ap = mean(window_aps[0]);
  out.ap50 = mean(ap50s);
  out.ap75 = mean(ap75s);
  if (window_aps.count(1)) out.ap_s = mean(window_aps[1]);
  if (window_aps.count(2)) out.ap_m = mean(window_aps[2]);
  if (window_aps.count(3)) out.ap_l = mean(window_aps[3]);
  return out;
}

// ---------------------------------------------------------------------------
// Streaming schedule replay: returns (start_ms, emit_ms, frame_position) per
// processed frame under the process-latest policy.
struct SimStep {
  double start_ms;
  double emit_ms;
  size_t frame_pos;
};

template <typename LatencyFn>
std::vector<SimStep> stream_schedule(const std::vector<double>& arrivals,
                                     LatencyFn&& latency_of) {
  std::vector<SimStep> steps;
  if (arrivals.empty()) return steps;
  std::vector<bool> started(arrivals.size(), false);
  double now = arrivals.front();
  while (true) {
    long pick = -1;
    for (size_t i = arrivals.size(); i-- > 0;) {
      if (arrivals[i] <= now) {
        if (!started[i]) pick = static_cast<long>(i);
        break;  // newest arrived frame decides; older ones are stale
      }
    }
    if (pick < 0) {
      // Nothing new: sleep until the next arrival, or stop when none remain.
      size_t next = arrivals.size();
      for (size_t i = 0; i < arrivals.size(); ++i)
        if (arrivals[i] > now) {
          next = i;
          break;
        }
      if (next == arrivals.size()) break;
      now = arrivals[next];
      continue;
    }
    const auto i = static_cast<size_t>(pick);
    started[i] = true;
    const double emit = now + latency_of(i);
    steps.push_back({now, emit, i});
    now = emit;
  }
  return steps;
}

// ---------------------------------------------------------------------------
// Vanishing point least squares: minimize sum_i ((v - p_i) . n_i)^2 over all
// segments with unit normals n_i, solved via Cramer on the normal equations.
inline ppw::Point2 vanishing_point(const std::vector<ppw::LineSegment>& segs) {
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (const auto& s : segs) {
    const double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
    const double len = std::sqrt(dx * dx + dy * dy);
    const double nx = -dy / len, ny = dx / len;
    const double c = nx * s.a.x + ny * s.a.y;
    a11 += nx * nx;
    a12 += nx * ny;
    a22 += ny * ny;
    b1 += nx * c;
    b2 += ny * c;
  }
  const double det = a11 * a22 - a12 * a12;
  return {(b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det};
}

}  // namespace oracle
