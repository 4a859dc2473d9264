#include "ppwarp/warp.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace ppw {

namespace {

constexpr double kFlatTol = 1e-9;
constexpr double kBoundsTol = 1e-9;

double clamp_into_range(double v, double hi) {
  return std::clamp(v, 0.0, hi);
}

}  // namespace

AxisMap::AxisMap(std::vector<double> values, int in_len)
    : values_(std::move(values)), in_len_(in_len) {
  if (in_len_ < 2 || values_.size() < 2) {
    throw ValidationError("axis map needs at least 2 samples on both axes");
  }
  const double hi = static_cast<double>(in_len_ - 1);
  for (double& v : values_) {
    if (!std::isfinite(v) || v < -kBoundsTol || v > hi + kBoundsTol) {
      throw OutOfBounds("axis map value outside the input axis");
    }
    v = clamp_into_range(v, hi);
  }
  for (size_t i = 0; i + 1 < values_.size(); ++i) {
    if (!(values_[i + 1] - values_[i] > kFlatTol)) {
      throw MonotonicityViolation("axis map has a flat or decreasing segment");
    }
  }
}

double AxisMap::sample(double out_coord) const {
  const double hi = static_cast<double>(values_.size() - 1);
  if (out_coord < -kBoundsTol || out_coord > hi + kBoundsTol) {
    throw OutOfBounds("warped coordinate outside the output axis");
  }
  const double x = std::clamp(out_coord, 0.0, hi);
  const size_t i0 = static_cast<size_t>(x);
  const size_t i1 = std::min(i0 + 1, values_.size() - 1);
  const double t = x - static_cast<double>(i0);
  return (1.0 - t) * values_[i0] + t * values_[i1];
}

double AxisMap::invert(double in_coord) const {
  const double lo = values_.front();
  const double hi = values_.back();
  if (in_coord < lo - kBoundsTol || in_coord > hi + kBoundsTol) {
    throw OutOfBounds("original coordinate outside the mapped input range");
  }
  const double x = std::clamp(in_coord, lo, hi);
  // First segment whose upper endpoint reaches x.
  const auto it = std::lower_bound(values_.begin() + 1, values_.end(), x);
  const size_t i1 = static_cast<size_t>(it - values_.begin());
  const size_t i0 = i1 - 1;
  return static_cast<double>(i0) +
         (x - values_[i0]) / (values_[i1] - values_[i0]);
}

Image Image::make(ImageSize size, int channels) {
  if (size.w < 2 || size.h < 2 || (channels != 1 && channels != 3)) {
    throw ValidationError("image must be at least 2x2 with 1 or 3 channels");
  }
  Image img;
  img.size = size;
  img.channels = channels;
  img.data.assign(static_cast<size_t>(channels) * static_cast<size_t>(size.w) *
                      static_cast<size_t>(size.h),
                  0.0f);
  return img;
}

std::pair<std::vector<double>, std::vector<double>> marginalize(
    const SaliencyMap& S) {
  std::vector<double> sx(static_cast<size_t>(S.grid_w), 0.0);
  std::vector<double> sy(static_cast<size_t>(S.grid_h), 0.0);
  for (int y = 0; y < S.grid_h; ++y) {
    for (int x = 0; x < S.grid_w; ++x) {
      const double c = S.at(x, y);
      sx[static_cast<size_t>(x)] += c;
      sy[static_cast<size_t>(y)] += c;
    }
  }
  return {std::move(sx), std::move(sy)};
}

AxisMap inverse_axis_map(const std::vector<double>& s, int in_len, int out_len,
                         double sigma_frac, bool endpoint_rescale) {
  if (in_len < 2 || static_cast<size_t>(in_len) != s.size()) {
    throw BadParam("inverse_axis_map: marginal length must equal in_len");
  }
  if (out_len < 2) {
    throw BadParam("inverse_axis_map: out_len must be at least 2");
  }
  if (!(sigma_frac > 0.0) || !(sigma_frac <= 0.5)) {
    throw BadParam("kernel_sigma_frac must lie in (0, 0.5]");
  }
  for (double v : s) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw NonPositiveSaliency("inverse_axis_map: marginal must be > 0");
    }
  }

  const double sigma = sigma_frac * static_cast<double>(in_len);
  const double radius = 3.0 * sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  // Edge extension: clamp-indexing stands in for physically padding s, so the
  // window below never runs off the array.
  const auto s_ext = [&](int j) {
    return s[static_cast<size_t>(std::clamp(j, 0, in_len - 1))];
  };

  std::vector<double> vals(static_cast<size_t>(out_len));
  std::vector<double> w;  // kernel weights for the current window
  const double ratio = static_cast<double>(in_len) / static_cast<double>(out_len);
  for (int i = 0; i < out_len; ++i) {
    // Pixel-center mapping of the output index into the input domain.
    const double x = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    // The epsilon keeps inclusion of the boundary samples symmetric when
    // x - radius lands within rounding of an integer.
    const int lo = static_cast<int>(std::ceil(x - radius - kFlatTol));
    const int hi = static_cast<int>(std::floor(x + radius + kFlatTol));
    w.resize(static_cast<size_t>(hi - lo + 1));
    for (int j = lo; j <= hi; ++j) {
      const double d = static_cast<double>(j) - x;
      w[static_cast<size_t>(j - lo)] = std::exp(-d * d * inv2s2);
    }

    // The window holds integers, so it is mirror-symmetric about x only when
    // x sits on an integer or half-integer. Elsewhere the truncated kernel
    // has a nonzero first moment of its own, which would bend even a
    // constant marginal away from the uniform map. Measure that moment from
    // the weights alone and subtract it from every tap offset; both passes
    // walk the window from the ends inward so that at symmetric phases the
    // mirrored pairs cancel exactly and the bias term is exactly zero,
    // keeping the uniform and half-scale maps bitwise.
    double bias_num = 0.0;  // sum of w * (j - x)
    double bias_den = 0.0;
    for (int a = lo, b = hi; a <= b; ++a, --b) {
      const double da = static_cast<double>(a) - x;
      const double wa = w[static_cast<size_t>(a - lo)];
      if (a == b) {
        bias_num += wa * da;
        bias_den += wa;
        break;
      }
      const double db = static_cast<double>(b) - x;
      const double wb = w[static_cast<size_t>(b - lo)];
      bias_num += wa * da + wb * db;
      bias_den += wa + wb;
    }
    const double bias = bias_num / bias_den;

    double num = 0.0;  // sum of s * w * ((j - x) - bias)
    double den = 0.0;
    for (int a = lo, b = hi; a <= b; ++a, --b) {
      const double da = (static_cast<double>(a) - x) - bias;
      const double wa = s_ext(a) * w[static_cast<size_t>(a - lo)];
      if (a == b) {
        num += wa * da;
        den += wa;
        break;
      }
      const double db = (static_cast<double>(b) - x) - bias;
      const double wb = s_ext(b) * w[static_cast<size_t>(b - lo)];
      num += wa * da + wb * db;
      den += wa + wb;
    }
    vals[static_cast<size_t>(i)] = x + num / den;
  }

  const double in_hi = static_cast<double>(in_len - 1);
  if (endpoint_rescale) {
    const double v0 = vals.front();
    const double span = vals.back() - v0;
    if (!(span > kFlatTol)) {
      throw MonotonicityViolation("inverse_axis_map: degenerate value span");
    }
    for (double& v : vals) v = (v - v0) * in_hi / span;
    // Pin the endpoints bit-exactly; interior values already land in range
    // for a monotone map.
    vals.front() = 0.0;
    vals.back() = in_hi;
  } else {
    for (double& v : vals) v = clamp_into_range(v, in_hi);
  }

  return AxisMap(std::move(vals), in_len);
}

WarpField build_warp(const SaliencyMap& S, ImageSize out_size,
                     double sigma_frac, bool endpoint_rescale) {
  if (out_size.w < 2 || out_size.h < 2) {
    throw BadParam("build_warp: output size must be at least 2x2");
  }
  auto [sx, sy] = marginalize(S);
  AxisMap tx_grid =
      inverse_axis_map(sx, S.grid_w, out_size.w, sigma_frac, endpoint_rescale);
  AxisMap ty_grid =
      inverse_axis_map(sy, S.grid_h, out_size.h, sigma_frac, endpoint_rescale);

  // Grid coordinates -> source pixel coordinates (corner-aligned scaling).
  const auto to_pixels = [](const AxisMap& m, int grid_len, int px_len) {
    const double scale = static_cast<double>(px_len - 1) /
                         static_cast<double>(grid_len - 1);
    std::vector<double> v = m.values();
    for (double& e : v) e *= scale;
    return AxisMap(std::move(v), px_len);
  };
  return WarpField{to_pixels(tx_grid, S.grid_w, S.target_size.w),
                   to_pixels(ty_grid, S.grid_h, S.target_size.h),
                   S.target_size};
}

Image warp_image(const Image& in, const WarpField& wf, int threads) {
  if (wf.in_size.w != in.size.w || wf.in_size.h != in.size.h) {
    throw ValidationError("warp_image: field was built for a different size");
  }
  const int ow = wf.tx.out_len();
  const int oh = wf.ty.out_len();
  Image out = Image::make({ow, oh}, in.channels);

  const auto& tx = wf.tx.values();
  const auto& ty = wf.ty.values();
  const int iw = in.size.w;
  const int ih = in.size.h;

  const auto run_rows = [&](int y_begin, int y_end) {
    for (int y = y_begin; y < y_end; ++y) {
      const double sy = ty[static_cast<size_t>(y)];
      const int y0 = std::min(static_cast<int>(sy), ih - 1);
      const int y1 = std::min(y0 + 1, ih - 1);
      const double fy = sy - static_cast<double>(y0);
      for (int x = 0; x < ow; ++x) {
        const double sx = tx[static_cast<size_t>(x)];
        const int x0 = std::min(static_cast<int>(sx), iw - 1);
        const int x1 = std::min(x0 + 1, iw - 1);
        const double fx = sx - static_cast<double>(x0);
        for (int c = 0; c < in.channels; ++c) {
          const double top = (1.0 - fx) * in.at(c, x0, y0) + fx * in.at(c, x1, y0);
          const double bot = (1.0 - fx) * in.at(c, x0, y1) + fx * in.at(c, x1, y1);
          out.at(c, x, y) = static_cast<float>((1.0 - fy) * top + fy * bot);
        }
      }
    }
  };

  const int n_threads = std::clamp(threads, 1, oh);
  if (n_threads == 1) {
    run_rows(0, oh);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    const int chunk = (oh + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int b = t * chunk;
      const int e = std::min(oh, b + chunk);
      if (b >= e) break;
      pool.emplace_back(run_rows, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<Point2> warp_points(const std::vector<Point2>& pts,
                                const WarpField& wf) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    out.push_back({wf.tx.invert(p.x), wf.ty.invert(p.y)});
  }
  return out;
}

std::vector<Point2> unwarp_points(const std::vector<Point2>& pts,
                                  const WarpField& wf) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    out.push_back({wf.tx.sample(p.x), wf.ty.sample(p.y)});
  }
  return out;
}

namespace {

template <typename MapFn>
std::vector<Box> map_boxes(const std::vector<Box>& boxes, MapFn&& fn) {
  std::vector<Box> out;
  out.reserve(boxes.size());
  for (const Box& b : boxes) {
    const std::vector<Point2> corners =
        fn({Point2{b.x1, b.y1}, Point2{b.x2, b.y2}});
    Box m = b;
    m.x1 = corners[0].x;
    m.y1 = corners[0].y;
    m.x2 = corners[1].x;
    m.y2 = corners[1].y;
    out.push_back(m);
  }
  return out;
}

}  // namespace

std::vector<Box> warp_boxes(const std::vector<Box>& boxes,
                            const WarpField& wf) {
  return map_boxes(boxes,
                   [&](const std::vector<Point2>& p) { return warp_points(p, wf); });
}

std::vector<Box> unwarp_boxes(const std::vector<Box>& boxes,
                              const WarpField& wf) {
  return map_boxes(boxes, [&](const std::vector<Point2>& p) {
    return unwarp_points(p, wf);
  });
}

namespace {

double* param_slot(WarpParams& p, ParamId id) {
  switch (id) {
    case ParamId::Vx: return &p.v.x;
    case ParamId::Vy: return &p.v.y;
    case ParamId::Theta1: return &p.theta[0];
    case ParamId::Theta2: return &p.theta[1];
    case ParamId::Theta3: return &p.theta[2];
    case ParamId::Theta4: return &p.theta[3];
    case ParamId::Alpha1: return &p.alpha[0];
    case ParamId::Alpha2: return &p.alpha[1];
    case ParamId::Alpha3: return &p.alpha[2];
    case ParamId::Alpha4: return &p.alpha[3];
    case ParamId::Nu: return &p.nu;
    case ParamId::NuHat: return &p.nu_hat;
    case ParamId::Lambda: return &p.lambda;
    case ParamId::KernelSigmaFrac: return &p.kernel_sigma_frac;
  }
  throw ValidationError("unknown parameter id");
}

// Margin to the nearest legal bound, or infinity for unbounded parameters.
double interval_margin(const WarpParams& p, ParamId id) {
  const double inf = std::numeric_limits<double>::infinity();
  const double theta_lim = 1.5697963267948966;  // pi/2 - 1e-3
  switch (id) {
    case ParamId::Vx:
    case ParamId::Vy:
      return inf;
    case ParamId::Theta1: return theta_lim - std::abs(p.theta[0]);
    case ParamId::Theta2: return theta_lim - std::abs(p.theta[1]);
    case ParamId::Theta3: return theta_lim - std::abs(p.theta[2]);
    case ParamId::Theta4: return theta_lim - std::abs(p.theta[3]);
    case ParamId::Alpha1: return std::min(p.alpha[0], 1.0 - p.alpha[0]);
    case ParamId::Alpha2: return std::min(p.alpha[1], 1.0 - p.alpha[1]);
    case ParamId::Alpha3: return std::min(p.alpha[2], 1.0 - p.alpha[2]);
    case ParamId::Alpha4: return std::min(p.alpha[3], 1.0 - p.alpha[3]);
    case ParamId::Nu: return p.nu - 1.0;
    case ParamId::NuHat: return p.nu_hat - 1.0;
    case ParamId::Lambda: return p.lambda;
    case ParamId::KernelSigmaFrac:
      return std::min(p.kernel_sigma_frac, 0.5 - p.kernel_sigma_frac);
  }
  return 0.0;
}

double evaluate_objective(const WarpParams& p,
                          const SensitivityObjective& obj) {
  switch (obj.kind) {
    case SensitivityObjective::Kind::SumS: {
      const SaliencyMap S = two_plane_saliency(p, obj.size, obj.grid);
      double sum = 0.0;
      for (double c : S.cells) sum += c;
      return sum;
    }
    case SensitivityObjective::Kind::SumTx: {
      const SaliencyMap S = two_plane_saliency(p, obj.size, obj.grid);
      const WarpField wf = build_warp(S, obj.out_size, p.kernel_sigma_frac);
      double sum = 0.0;
      for (double v : wf.tx.values()) sum += v;
      return sum;
    }
    case SensitivityObjective::Kind::WarpL2: {
      if (obj.image == nullptr || obj.reference == nullptr) {
        throw ValidationError("WarpL2 objective needs image and reference");
      }
      const SaliencyMap S = two_plane_saliency(p, obj.size, obj.grid);
      const WarpField wf = build_warp(S, obj.out_size, p.kernel_sigma_frac);
      const Image warped = warp_image(*obj.image, wf);
      if (warped.data.size() != obj.reference->data.size()) {
        throw ValidationError("WarpL2 reference size mismatch");
      }
      double ssd = 0.0;
      for (size_t i = 0; i < warped.data.size(); ++i) {
        const double d = static_cast<double>(warped.data[i]) -
                         static_cast<double>(obj.reference->data[i]);
        ssd += d * d;
      }
      return ssd;
    }
  }
  throw ValidationError("unknown objective kind");
}

}  // namespace

SensitivityResult param_sensitivity(const WarpParams& params,
                                    const SensitivityObjective& objective,
                                    ParamId id, double step) {
  if (!(step >= 1e-6 && step <= 1e-2)) {
    throw BadParam("sensitivity step must lie in [1e-6, 1e-2]");
  }
  const WarpParams base = checked(params);
  if (!(interval_margin(base, id) >= 2.0 * step)) {
    throw ClampBoundary(
        "parameter too close to its clamp boundary for this step");
  }

  const auto eval_at = [&](double delta) {
    WarpParams p = base;
    *param_slot(p, id) += delta;
    return evaluate_objective(p, objective);
  };

  const auto central = [&](double h) {
    return (eval_at(h) - eval_at(-h)) / (2.0 * h);
  };

  const double g_h = central(step);
  const double g_h2 = central(step / 2.0);
  const double gap = std::abs(g_h - g_h2) / std::max(std::abs(g_h2), 1e-8);
  return SensitivityResult{g_h2, gap};
}

}  // namespace ppw
