#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ppwarp/saliency.hpp"

namespace ppw {

// Monotone map from output axis samples to input coordinates. values[i] is
// the input coordinate sampled by output index i; in_len is the input axis
// length in samples, so every value lies in [0, in_len-1].
// Flat or decreasing segments (adjacent difference <= 1e-9) are rejected at
// construction so the numeric inverse never divides by a vanishing step.
class AxisMap {
 public:
  AxisMap(std::vector<double> values, int in_len);

  const std::vector<double>& values() const { return values_; }
  int in_len() const { return in_len_; }
  int out_len() const { return static_cast<int>(values_.size()); }

  // Warped coordinate -> input coordinate, linear between samples.
  // Throws OutOfBounds outside [0, out_len-1].
  double sample(double out_coord) const;

  // Input coordinate -> warped coordinate: binary search for the bracketing
  // segment, then linear inversion. Throws OutOfBounds outside
  // [values.front(), values.back()].
  double invert(double in_coord) const;

 private:
  std::vector<double> values_;
  int in_len_ = 0;
};

struct WarpField {
  AxisMap tx;       // output column -> source x
  AxisMap ty;       // output row -> source y
  ImageSize in_size{};  // source image the axis values index into
};

// Planar float image, channel-major storage, intensities in [0, 1].
struct Image {
  ImageSize size{};
  int channels = 1;  // 1 or 3
  std::vector<float> data;

  static Image make(ImageSize size, int channels);
  float at(int c, int x, int y) const {
    return data[(static_cast<size_t>(c) * static_cast<size_t>(size.h) +
                 static_cast<size_t>(y)) * static_cast<size_t>(size.w) +
                static_cast<size_t>(x)];
  }
  float& at(int c, int x, int y) {
    return data[(static_cast<size_t>(c) * static_cast<size_t>(size.h) +
                 static_cast<size_t>(y)) * static_cast<size_t>(size.w) +
                static_cast<size_t>(x)];
  }
};

// Axis-aligned detection or ground-truth box, xyxy corners in pixels.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double score = 1.0;
  int cls = 0;
  std::optional<long> track;

  double area() const { return (x2 - x1) * (y2 - y1); }
};

// Column sums (first, length grid_w) and row sums (second, length grid_h).
std::pair<std::vector<double>, std::vector<double>> marginalize(
    const SaliencyMap& S);

// Separable inverse warp along one axis. s holds the saliency marginal with
// one sample per input position (s.size() == in_len). Output index i queries
// the input-domain coordinate x = (i + 0.5) * in_len / out_len - 0.5 and the
// map value is the kernel-weighted centroid
//   sum_j s[j] k(j - x) j / sum_j s[j] k(j - x)
// with a Gaussian k of sigma = sigma_frac * in_len, truncated at radius
// 3 sigma. The saliency is edge-extended by ceil(3 sigma) samples on both
// sides so every query sees a full window, and the truncated kernel's own
// first moment is subtracted from the centroid (the integer window is
// mirror-symmetric about x only at integer and half-integer phases, and the
// leftover moment would otherwise bend the map at every other phase); a
// constant marginal therefore yields the exact uniform resize map at any
// output length. With endpoint_rescale the values are
// affinely rescaled to cover [0, in_len-1] exactly (the default); without it
// raw centroids are only clamped into range, which is useful for diagnosing
// how much the rescale moves the endpoints.
// Throws NonPositiveSaliency unless every s[j] > 0, BadParam on a length
// mismatch, MonotonicityViolation if the resulting map is not increasing.
AxisMap inverse_axis_map(const std::vector<double>& s, int in_len, int out_len,
                         double sigma_frac, bool endpoint_rescale = true);

// Axis maps for both dimensions at the requested output size. Grid-domain
// values are scaled onto the source axes of S.target_size, so the field can
// drive warp_image directly.
WarpField build_warp(const SaliencyMap& S, ImageSize out_size,
                     double sigma_frac, bool endpoint_rescale = true);

// Backward warp with bilinear sampling: out(x, y) = in(tx[x], ty[y]).
// Rows are split across threads; every pixel is a pure function of the
// inputs, so the result is identical for any thread count.
Image warp_image(const Image& in, const WarpField& wf, int threads = 1);

// Original -> warped coordinates (numeric inversion per axis).
std::vector<Point2> warp_points(const std::vector<Point2>& pts,
                                const WarpField& wf);

// Warped -> original coordinates (direct map lookup per axis).
std::vector<Point2> unwarp_points(const std::vector<Point2>& pts,
                                  const WarpField& wf);

// Box corners through the corresponding point maps. Monotone axis maps keep
// boxes axis-aligned; scores, classes, and track ids pass through.
std::vector<Box> warp_boxes(const std::vector<Box>& boxes, const WarpField& wf);
std::vector<Box> unwarp_boxes(const std::vector<Box>& boxes,
                              const WarpField& wf);

enum class ParamId {
  Vx,
  Vy,
  Theta1,
  Theta2,
  Theta3,
  Theta4,
  Alpha1,
  Alpha2,
  Alpha3,
  Alpha4,
  Nu,
  NuHat,
  Lambda,
  KernelSigmaFrac,
};

// Scalar objective for finite-difference sensitivity checks.
//   SumS:   sum of all two-plane saliency cells
//   SumTx:  sum of the tx axis-map values built from that saliency
//   WarpL2: sum of squared differences between the warped image and reference
struct SensitivityObjective {
  enum class Kind { SumS, SumTx, WarpL2 };
  Kind kind = Kind::SumTx;
  ImageSize size{};
  GridSize grid{};
  ImageSize out_size{};          // SumTx / WarpL2
  const Image* image = nullptr;      // WarpL2
  const Image* reference = nullptr;  // WarpL2
};

struct SensitivityResult {
  double grad = 0.0;            // central difference at step h/2
  double richardson_gap = 0.0;  // |g_h - g_{h/2}| / max(|g_{h/2}|, 1e-8)
};

// Central differences at steps h and h/2 on one parameter. step must lie in
// [1e-6, 1e-2] and the parameter must sit at least 2*step inside its legal
// interval (ClampBoundary otherwise), so the perturbed evaluations never
// clamp.
SensitivityResult param_sensitivity(const WarpParams& params,
                                    const SensitivityObjective& objective,
                                    ParamId id, double step);

}  // namespace ppw
