#include "ppwarp/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "ppwarp/errors.hpp"
#include "ppwarp/rng.hpp"

namespace ppw {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni =
      std::max(a.area(), 0.0) + std::max(b.area(), 0.0) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

constexpr int kNumThr = 10;
constexpr int kNumRec = 101;
constexpr int kThr50 = 0;
constexpr int kThr75 = 5;

double threshold_at(int t) { return 0.5 + 0.05 * t; }

struct AreaBucket {
  double lo, hi;  // area in [lo, hi)
};

// Index 0 is the unrestricted bucket used for ap/ap50/ap75/per_class.
constexpr int kNumBuckets = 4;
const AreaBucket kBuckets[kNumBuckets] = {
    {0.0, std::numeric_limits<double>::infinity()},
    {0.0, 32.0 * 32.0},
    {32.0 * 32.0, 96.0 * 96.0},
    {96.0 * 96.0, std::numeric_limits<double>::infinity()},
};

bool in_bucket(double area, const AreaBucket& b) {
  return area >= b.lo && area < b.hi;
}

struct DetRec {
  double score = 0.0;
  size_t frame = 0;   // position in the frame vector
  int det_index = 0;  // original index within the frame
  bool tp = false;
  bool ignored = false;
};

// Everything accumulated for one (class, bucket) pair.
struct CellAccum {
  long npig = 0;  // non-ignored ground truth
  std::array<std::vector<DetRec>, kNumThr> recs;
};

// One frame restricted to a single class, with the IoU matrix precomputed
// so the 40 threshold/bucket matching passes reuse it.
struct FrameClass {
  std::vector<const Box*> gt;
  std::vector<const Box*> det;  // sorted by score desc, original index asc
  std::vector<int> det_index;
  std::vector<double> iou_dg;  // det-major: iou_dg[d * gt.size() + g]
};

void match_frame(const FrameClass& fc, size_t frame, const AreaBucket& bucket,
                 CellAccum& cell) {
  const size_t ng = fc.gt.size();
  const size_t nd = fc.det.size();

  std::vector<char> gt_ignored(ng);
  for (size_t g = 0; g < ng; ++g)
    gt_ignored[g] = !in_bucket(fc.gt[g]->area(), bucket);

  // Non-ignored ground truth is offered to detections first.
  std::vector<size_t> order;
  order.reserve(ng);
  for (size_t g = 0; g < ng; ++g)
    if (!gt_ignored[g]) order.push_back(g);
  for (size_t g = 0; g < ng; ++g)
    if (gt_ignored[g]) order.push_back(g);

  for (size_t g = 0; g < ng; ++g)
    if (!gt_ignored[g]) ++cell.npig;

  for (int t = 0; t < kNumThr; ++t) {
    const double thr = threshold_at(t);
    std::vector<char> gt_matched(ng, 0);
    for (size_t d = 0; d < nd; ++d) {
      double best = thr;
      long m = -1;
      for (size_t oi = 0; oi < ng; ++oi) {
        const size_t g = order[oi];
        if (gt_matched[g]) continue;
        // Once matched to a real box, never trade it for an ignored one.
        if (m > -1 && !gt_ignored[static_cast<size_t>(m)] && gt_ignored[g])
          break;
        const double ov = fc.iou_dg[d * ng + g];
        if (ov < best) continue;
        best = ov;  // ties fall through, so the later candidate wins
        m = static_cast<long>(g);
      }
      DetRec rec;
      rec.score = fc.det[d]->score;
      rec.frame = frame;
      rec.det_index = fc.det_index[d];
      if (m > -1) {
        gt_matched[static_cast<size_t>(m)] = 1;
        rec.ignored = gt_ignored[static_cast<size_t>(m)] != 0;
        rec.tp = !rec.ignored;
      } else {
        rec.ignored = !in_bucket(fc.det[d]->area(), bucket);
      }
      cell.recs[t].push_back(rec);
    }
  }
}

// 101-point interpolated average precision.
double ap_101(std::vector<DetRec>& recs, long npig) {
  std::sort(recs.begin(), recs.end(), [](const DetRec& a, const DetRec& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.det_index < b.det_index;
  });

  std::vector<double> prec, rec;
  long tp = 0, fp = 0;
  for (const DetRec& r : recs) {
    if (r.ignored) continue;
    if (r.tp)
      ++tp;
    else
      ++fp;
    prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    rec.push_back(static_cast<double>(tp) / static_cast<double>(npig));
  }

  for (size_t i = prec.size(); i-- > 1;)
    prec[i - 1] = std::max(prec[i - 1], prec[i]);

  double sum = 0.0;
  size_t ptr = 0;
  for (int k = 0; k < kNumRec; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    while (ptr < rec.size() && rec[ptr] < r) ++ptr;
    if (ptr < prec.size()) sum += prec[ptr];
  }
  return sum / kNumRec;
}

}  // namespace

ApReport coco_ap(const std::vector<std::vector<Box>>& dets,
                 const std::vector<GroundTruthFrame>& gts) {
  if (dets.size() != gts.size())
    throw ValidationError(
        "detections and ground truth must cover the same frames");

  std::set<int> classes;
  for (const GroundTruthFrame& f : gts)
    for (const Box& b : f.boxes) classes.insert(b.cls);

  std::map<int, std::array<CellAccum, kNumBuckets>> table;
  for (int c : classes) table[c];

  for (size_t f = 0; f < gts.size(); ++f) {
    for (int c : classes) {
      FrameClass fc;
      for (const Box& b : gts[f].boxes)
        if (b.cls == c) fc.gt.push_back(&b);
      for (size_t d = 0; d < dets[f].size(); ++d)
        if (dets[f][d].cls == c) fc.det_index.push_back(static_cast<int>(d));
      if (fc.gt.empty() && fc.det_index.empty()) continue;

      std::stable_sort(fc.det_index.begin(), fc.det_index.end(),
                       [&](int a, int b) {
                         return dets[f][static_cast<size_t>(a)].score >
                                dets[f][static_cast<size_t>(b)].score;
                       });
      fc.det.reserve(fc.det_index.size());
      for (int d : fc.det_index)
        fc.det.push_back(&dets[f][static_cast<size_t>(d)]);

      fc.iou_dg.resize(fc.det.size() * fc.gt.size());
      for (size_t d = 0; d < fc.det.size(); ++d)
        for (size_t g = 0; g < fc.gt.size(); ++g)
          fc.iou_dg[d * fc.gt.size() + g] = iou(*fc.det[d], *fc.gt[g]);

      for (int b = 0; b < kNumBuckets; ++b)
        match_frame(fc, f, kBuckets[b], table[c][b]);
    }
  }

  ApReport report;

  double sum_all = 0.0, sum50 = 0.0, sum75 = 0.0;
  int count_all = 0;
  for (auto& [c, cells] : table) {
    CellAccum& cell = cells[0];
    if (cell.npig == 0) continue;
    std::array<double, kNumThr> per_thr{};
    double mean_thr = 0.0;
    for (int t = 0; t < kNumThr; ++t) {
      per_thr[static_cast<size_t>(t)] = ap_101(cell.recs[t], cell.npig);
      mean_thr += per_thr[static_cast<size_t>(t)];
    }
    mean_thr /= kNumThr;
    report.per_class[c] = mean_thr;
    sum_all += mean_thr;
    sum50 += per_thr[kThr50];
    sum75 += per_thr[kThr75];
    ++count_all;
  }
  if (count_all > 0) {
    report.ap = sum_all / count_all;
    report.ap50 = sum50 / count_all;
    report.ap75 = sum75 / count_all;
  }

  std::optional<double>* size_fields[3] = {&report.ap_s, &report.ap_m,
                                           &report.ap_l};
  for (int b = 1; b < kNumBuckets; ++b) {
    double sum = 0.0;
    int count = 0;
    for (auto& [c, cells] : table) {
      CellAccum& cell = cells[static_cast<size_t>(b)];
      if (cell.npig == 0) continue;
      double mean_thr = 0.0;
      for (int t = 0; t < kNumThr; ++t)
        mean_thr += ap_101(cell.recs[t], cell.npig);
      sum += mean_thr / kNumThr;
      ++count;
    }
    if (count > 0) *size_fields[b - 1] = sum / count;
  }

  return report;
}

std::vector<Box> mock_detect(const GroundTruthFrame& gt, const MockConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.jitter_px < 0.0 || cfg.score_noise < 0.0)
    throw ValidationError("noise magnitudes must be non-negative");
  if (cfg.drop_small_prob < 0.0 || cfg.drop_small_prob > 1.0)
    throw ValidationError("drop_small_prob must lie in [0, 1]");

  const auto frame = static_cast<std::uint64_t>(gt.id);
  std::vector<Box> out;
  out.reserve(gt.boxes.size());
  for (size_t i = 0; i < gt.boxes.size(); ++i) {
    Box b = gt.boxes[i];
    const std::uint64_t c4 = 4 * static_cast<std::uint64_t>(i);
    b.x1 += cfg.jitter_px * rng::gaussian(seed, rng::kJitter, frame, c4 + 0);
    b.y1 += cfg.jitter_px * rng::gaussian(seed, rng::kJitter, frame, c4 + 1);
    b.x2 += cfg.jitter_px * rng::gaussian(seed, rng::kJitter, frame, c4 + 2);
    b.y2 += cfg.jitter_px * rng::gaussian(seed, rng::kJitter, frame, c4 + 3);
    if (b.x2 < b.x1) std::swap(b.x1, b.x2);
    if (b.y2 < b.y1) std::swap(b.y1, b.y2);
    if (b.x2 <= b.x1) b.x2 = b.x1 + 1e-6;
    if (b.y2 <= b.y1) b.y2 = b.y1 + 1e-6;

    if (b.area() < 32.0 * 32.0 &&
        rng::uniform01(seed, rng::kDrop, frame, i) < cfg.drop_small_prob)
      continue;

    const double n = rng::gaussian(seed, rng::kScore, frame, i);
    b.score = std::clamp(1.0 - std::abs(cfg.score_noise * n), 0.0, 1.0);
    out.push_back(b);
  }
  return out;
}

double LatencyModel::sample(std::uint64_t seed, long frame_id) const {
  double v = mean_ms;
  if (kind == Kind::Gaussian)
    v += std_ms * rng::gaussian(seed, rng::kLatency,
                                static_cast<std::uint64_t>(frame_id), 0);
  return std::max(v, 0.1);
}

StreamTimeline simulate_stream(const std::vector<GroundTruthFrame>& gts,
                               const MockConfig& detector,
                               const LatencyModel& latency, std::uint64_t seed,
                               StreamPolicy policy) {
  (void)policy;  // only ProcessLatest exists
  StreamTimeline tl;
  if (gts.empty()) return tl;
  if (latency.mean_ms < 0.0 || latency.std_ms < 0.0)
    throw ValidationError("latency parameters must be non-negative");

  std::vector<double> arrivals(gts.size());
  for (size_t i = 0; i < gts.size(); ++i) {
    arrivals[i] = gts[i].t_ms;
    if (i > 0 && !(arrivals[i] > arrivals[i - 1]))
      throw ValidationError("frame arrivals must be strictly increasing");
  }

  double now = arrivals.front();
  long last_started = -1;
  const long n = static_cast<long>(gts.size());
  while (true) {
    // Latest frame that has arrived by now; arrivals at the decision
    // instant count as arrived.
    const auto it = std::upper_bound(arrivals.begin(), arrivals.end(), now);
    const long cand = static_cast<long>(it - arrivals.begin()) - 1;
    if (cand == last_started) {
      if (last_started == n - 1) break;
      now = arrivals[static_cast<size_t>(last_started + 1)];
      continue;
    }
    const GroundTruthFrame& f = gts[static_cast<size_t>(cand)];
    const double emit = now + latency.sample(seed, f.id);
    tl.events.push_back({emit, f.id, mock_detect(f, detector, seed)});
    last_started = cand;
    now = emit;
  }

  tl.horizon_ms = arrivals.back();
  if (!tl.events.empty())
    tl.horizon_ms = std::max(tl.horizon_ms, tl.events.back().emit_ms);
  return tl;
}

std::vector<std::optional<size_t>> pair_emissions(
    const StreamTimeline& timeline, const std::vector<GroundTruthFrame>& gts) {
  std::vector<double> emits(timeline.events.size());
  for (size_t i = 0; i < emits.size(); ++i)
    emits[i] = timeline.events[i].emit_ms;

  std::vector<std::optional<size_t>> paired(gts.size());
  for (size_t i = 0; i < gts.size(); ++i) {
    const auto it = std::lower_bound(emits.begin(), emits.end(), gts[i].t_ms);
    if (it != emits.begin())
      paired[i] = static_cast<size_t>(it - emits.begin()) - 1;
  }
  return paired;
}

ApReport streaming_ap(const StreamTimeline& timeline,
                      const std::vector<GroundTruthFrame>& gts) {
  const auto paired = pair_emissions(timeline, gts);
  std::vector<std::vector<Box>> dets(gts.size());
  for (size_t i = 0; i < gts.size(); ++i)
    if (paired[i]) dets[i] = timeline.events[*paired[i]].dets;
  return coco_ap(dets, gts);
}

double throughput_fps(const StreamTimeline& timeline) {
  if (timeline.horizon_ms <= 0.0) return 0.0;
  return static_cast<double>(timeline.events.size()) * 1000.0 /
         timeline.horizon_ms;
}

double track_extension(long matched_len, long baseline_len, long gt_len) {
  if (gt_len < 150)
    throw TooShort("ground-truth track must span at least 150 frames");
  if (matched_len < 0 || matched_len > gt_len || baseline_len < 0 ||
      baseline_len > gt_len)
    throw ValidationError("track lengths must lie within [0, gt length]");
  return static_cast<double>(matched_len - baseline_len) /
         static_cast<double>(gt_len);
}

double aggregate_ate(const std::vector<double>& per_track,
                     const std::vector<long>& gt_lengths,
                     AteAggregation mode) {
  if (per_track.empty()) throw ValidationError("no tracks to aggregate");
  if (mode == AteAggregation::Mean) {
    double sum = 0.0;
    for (double e : per_track) sum += e;
    return sum / static_cast<double>(per_track.size());
  }
  if (gt_lengths.size() != per_track.size())
    throw ValidationError("one ground-truth length per track is required");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < per_track.size(); ++i) {
    if (gt_lengths[i] <= 0)
      throw ValidationError("track lengths must be positive");
    num += per_track[i] * static_cast<double>(gt_lengths[i]);
    den += static_cast<double>(gt_lengths[i]);
  }
  return num / den;
}

double min_object_size_tracked(const std::vector<Box>& track_gt,
                               const Box& smallest_tracked) {
  if (track_gt.empty())
    throw ValidationError("track must contain at least one box");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Box& b : track_gt) {
    const double a = b.area();
    if (!(a > 0.0)) throw ValidationError("box areas must be positive");
    lo = std::min(lo, std::log(a));
    hi = std::max(hi, std::log(a));
  }
  const double a = smallest_tracked.area();
  if (!(a > 0.0)) throw ValidationError("box areas must be positive");
  if (hi - lo <= 1e-12)
    throw DegenerateTrack("track areas span no log-area range");
  return (std::log(a) - lo) / (hi - lo);
}

}  // namespace ppw
