#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ppwarp/warp.hpp"

namespace ppw {

struct GroundTruthFrame {
  long id = 0;
  double t_ms = 0.0;  // arrival timestamp, strictly increasing across frames
  std::vector<Box> boxes;
};

// Intersection over union of two xyxy boxes; 0 when either is empty.
double iou(const Box& a, const Box& b);

// COCO-convention average precision. dets[i] are the detections evaluated
// against gts[i]. Matching is greedy in score order per frame and class at
// each IoU threshold in 0.50:0.05:0.95; precision is interpolated at 101
// recall points. Size buckets by ground-truth area: small < 32^2,
// medium in [32^2, 96^2), large >= 96^2; out-of-bucket ground truth is
// ignored rather than counted, as are detections matched to it (and
// unmatched detections whose own area is out of bucket).
// Fields are empty (absent) when the corresponding bucket holds no ground
// truth; with no ground truth at all every field is absent.
struct ApReport {
  std::optional<double> ap;    // mean over classes and thresholds
  std::optional<double> ap50;  // threshold 0.50 only
  std::optional<double> ap75;  // threshold 0.75 only
  std::optional<double> ap_s;
  std::optional<double> ap_m;
  std::optional<double> ap_l;
  std::map<int, double> per_class;  // class id -> AP over thresholds
};

ApReport coco_ap(const std::vector<std::vector<Box>>& dets,
                 const std::vector<GroundTruthFrame>& gts);

// Synthetic detector: copies the ground-truth boxes, jitters each corner with
// Gaussian noise of jitter_px, drops boxes whose (jittered) area falls under
// 32^2 px with probability drop_small_prob, and scores survivors
// 1 - |score_noise * n| with n standard normal. All draws are keyed by
// (seed, frame id, box index), so a frame's detections do not depend on when
// or how often they are computed.
struct MockConfig {
  double jitter_px = 0.0;
  double drop_small_prob = 0.0;
  double score_noise = 0.0;
};

std::vector<Box> mock_detect(const GroundTruthFrame& gt, const MockConfig& cfg,
                             std::uint64_t seed);

// Detector latency per frame, milliseconds. Samples are keyed by
// (seed, frame id) and clamped to >= 0.1 ms.
struct LatencyModel {
  enum class Kind { Constant, Gaussian };
  Kind kind = Kind::Constant;
  double mean_ms = 40.0;
  double std_ms = 0.0;  // Gaussian only

  double sample(std::uint64_t seed, long frame_id) const;
};

enum class StreamPolicy { ProcessLatest };

struct StreamEvent {
  double emit_ms = 0.0;
  long frame_id = 0;        // source frame the detections were computed on
  std::vector<Box> dets;
};

struct StreamTimeline {
  std::vector<StreamEvent> events;  // emit_ms non-decreasing
  double horizon_ms = 0.0;          // max(last arrival, last emission)
};

// Discrete-event simulation on a virtual clock starting at the first frame's
// arrival. Under ProcessLatest the detector, whenever idle, starts on the
// most recently arrived frame it has not processed yet (a frame arriving
// exactly at the decision instant counts as arrived), or sleeps until the
// next arrival when nothing new is pending. Each processed frame emits its
// detections exactly one latency sample after processing starts.
StreamTimeline simulate_stream(const std::vector<GroundTruthFrame>& gts,
                               const MockConfig& detector,
                               const LatencyModel& latency, std::uint64_t seed,
                               StreamPolicy policy = StreamPolicy::ProcessLatest);

// For each frame, the index into timeline.events of the last emission
// strictly before the frame's arrival (emissions at the arrival instant do
// not count), or nullopt when nothing was emitted yet.
std::vector<std::optional<size_t>> pair_emissions(
    const StreamTimeline& timeline, const std::vector<GroundTruthFrame>& gts);

// Streaming AP: every frame is evaluated against the most recent emission
// strictly before its arrival (empty detections when there is none), then
// scored with coco_ap.
ApReport streaming_ap(const StreamTimeline& timeline,
                      const std::vector<GroundTruthFrame>& gts);

// Emissions per second of simulated time.
double throughput_fps(const StreamTimeline& timeline);

// Track extension: (matched_len - baseline_len) / gt_len.
// Lengths are frame counts; gt_len must be at least 150 frames (TooShort)
// and both method lengths must lie in [0, gt_len].
double track_extension(long matched_len, long baseline_len, long gt_len);

enum class AteAggregation { Mean, LengthWeighted };

// Aggregate per-track extensions across a dataset. LengthWeighted weights
// each track by its ground-truth length.
double aggregate_ate(const std::vector<double>& per_track,
                     const std::vector<long>& gt_lengths, AteAggregation mode);

// Normalized position of a box's log-area within the log-area range of a
// ground-truth track: (log a - log a_min) / (log a_max - log a_min).
// Throws DegenerateTrack when the track's areas span no range.
double min_object_size_tracked(const std::vector<Box>& track_gt,
                               const Box& smallest_tracked);

}  // namespace ppw
