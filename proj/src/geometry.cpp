#include "ppwarp/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ppw {

namespace {

constexpr double kMinSegmentLen = 1e-9;       // px
constexpr double kParallelTol = 1e-6;         // rad
constexpr double kMinTripleArea = 1e-6;       // px^2
constexpr double kMinDet = 1e-12;
constexpr double kCornerReprojTol = 1e-6;     // px

double triple_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

// Hartley normalization: translate the centroid to the origin and scale the
// mean distance to sqrt(2). Returns the 3x3 similarity.
Eigen::Matrix3d normalizing_transform(const std::array<Point2, 4>& pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= 4.0;
  cy /= 4.0;
  double mean_dist = 0.0;
  for (const auto& p : pts) {
    mean_dist += std::hypot(p.x - cx, p.y - cy);
  }
  mean_dist /= 4.0;
  const double s =
      mean_dist > 0.0 ? std::numbers::sqrt2 / mean_dist : 1.0;
  Eigen::Matrix3d T;
  T << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return T;
}

}  // namespace

Homography::Homography(const std::array<double, 9>& m) : m_(m) {
  // Scale-normalize: first entry of largest magnitude becomes exactly 1.
  size_t pivot = 0;
  for (size_t i = 1; i < 9; ++i) {
    if (std::abs(m_[i]) > std::abs(m_[pivot])) pivot = i;
  }
  const double p = m_[pivot];
  if (!(std::abs(p) > 0.0) || !std::isfinite(p)) {
    throw ValidationError("homography: zero or non-finite matrix");
  }
  for (double& e : m_) e /= p;

  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> M(m_.data());
  if (std::abs(M.determinant()) <= kMinDet) {
    throw ValidationError("homography: singular matrix");
  }
}

Homography Homography::inverse() const {
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> M(m_.data());
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> inv = M.inverse();
  std::array<double, 9> out;
  std::copy(inv.data(), inv.data() + 9, out.begin());
  return Homography(out);
}

Point2 vp_from_lines(const std::vector<LineSegment>& lines) {
  if (lines.size() < 2) {
    throw ValidationError("vp_from_lines: need at least 2 segments");
  }

  // Represent each line as n . p = c with unit normal n.
  std::vector<Eigen::Vector2d> normals;
  std::vector<double> offsets;
  std::vector<Eigen::Vector2d> dirs;
  normals.reserve(lines.size());
  for (const auto& seg : lines) {
    const double dx = seg.b.x - seg.a.x;
    const double dy = seg.b.y - seg.a.y;
    const double len = std::hypot(dx, dy);
    if (len <= kMinSegmentLen) {
      throw DegenerateSegment("vp_from_lines: segment endpoints coincide");
    }
    dirs.emplace_back(dx / len, dy / len);
    normals.emplace_back(-dy / len, dx / len);
    offsets.push_back(normals.back().x() * seg.a.x +
                      normals.back().y() * seg.a.y);
  }

  // Lines (not rays): parallel when |sin(angle)| is tiny.
  bool any_crossing = false;
  for (size_t i = 0; i < dirs.size() && !any_crossing; ++i) {
    for (size_t j = i + 1; j < dirs.size(); ++j) {
      const double s =
          std::abs(dirs[i].x() * dirs[j].y() - dirs[i].y() * dirs[j].x());
      if (s >= kParallelTol) {
        any_crossing = true;
        break;
      }
    }
  }
  if (!any_crossing) {
    throw AllParallel("vp_from_lines: all segments mutually parallel");
  }

  // Least squares over perpendicular distances: (sum n n^T) p = sum c n.
  // With exactly two non-parallel lines this is their exact intersection.
  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < normals.size(); ++i) {
    A += normals[i] * normals[i].transpose();
    b += offsets[i] * normals[i];
  }
  const Eigen::Vector2d p = A.ldlt().solve(b);
  return {p.x(), p.y()};
}

PlaneQuad plane_quad(Point2 v, double theta_a, double theta_b, double alpha_a,
                     double alpha_b, PlaneKind kind, ImageSize size) {
  const double theta_lim = std::numbers::pi / 2.0 - 1e-3;
  theta_a = std::clamp(theta_a, -theta_lim, theta_lim);
  theta_b = std::clamp(theta_b, -theta_lim, theta_lim);
  alpha_a = std::clamp(alpha_a, 0.0, 1.0);
  alpha_b = std::clamp(alpha_b, 0.0, 1.0);

  const double w = static_cast<double>(size.w);
  const double h = static_cast<double>(size.h);

  // Edge points where the plane boundary meets the image sides. Ground
  // extends below the vanishing point, Top above it.
  const double dir = (kind == PlaneKind::Ground) ? 1.0 : -1.0;
  const Point2 edge_l{0.0, v.y + dir * v.x * std::tan(theta_a)};
  const Point2 edge_r{w, v.y + dir * (w - v.x) * std::tan(theta_b)};

  const Point2 far_l{alpha_a * edge_l.x + (1.0 - alpha_a) * v.x,
                     alpha_a * edge_l.y + (1.0 - alpha_a) * v.y};
  const Point2 far_r{alpha_b * edge_r.x + (1.0 - alpha_b) * v.x,
                     alpha_b * edge_r.y + (1.0 - alpha_b) * v.y};

  PlaneQuad q;
  q.kind = kind;
  if (kind == PlaneKind::Ground) {
    q.corners = {Point2{0.0, h}, Point2{w, h}, far_l, far_r};
  } else {
    q.corners = {Point2{0.0, 0.0}, Point2{w, 0.0}, far_l, far_r};
  }

  const auto& c = q.corners;
  const std::array<std::array<int, 3>, 4> triples{
      {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
  for (const auto& t : triples) {
    if (triple_area(c[t[0]], c[t[1]], c[t[2]]) <= kMinTripleArea) {
      throw DegenerateQuad("plane_quad: collinear or coincident corners");
    }
  }
  return q;
}

Homography homography_from_quad(const PlaneQuad& quad, ImageSize bev) {
  const double bw = static_cast<double>(bev.w);
  const double bh = static_cast<double>(bev.h);
  const std::array<Point2, 4>& src = quad.corners;
  const std::array<Point2, 4> dst{
      Point2{0.0, bh}, Point2{bw, bh}, Point2{0.0, 0.0}, Point2{bw, 0.0}};

  const Eigen::Matrix3d Ts = normalizing_transform(src);
  const Eigen::Matrix3d Td = normalizing_transform(dst);

  // Standard DLT rows for x' x H = 0, two per correspondence.
  Eigen::Matrix<double, 8, 9> A;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d s =
        Ts * Eigen::Vector3d(src[static_cast<size_t>(i)].x,
                             src[static_cast<size_t>(i)].y, 1.0);
    const Eigen::Vector3d d =
        Td * Eigen::Vector3d(dst[static_cast<size_t>(i)].x,
                             dst[static_cast<size_t>(i)].y, 1.0);
    A.row(2 * i) << 0, 0, 0, -d.z() * s.x(), -d.z() * s.y(), -d.z() * s.z(),
        d.y() * s.x(), d.y() * s.y(), d.y() * s.z();
    A.row(2 * i + 1) << d.z() * s.x(), d.z() * s.y(), d.z() * s.z(), 0, 0, 0,
        -d.x() * s.x(), -d.x() * s.y(), -d.x() * s.z();
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(A, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> hv = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

  const Eigen::Matrix3d Hm = Td.inverse() * Hn * Ts;
  std::array<double, 9> raw;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) raw[static_cast<size_t>(r) * 3 + c] = Hm(r, c);
  Homography H(raw);

  for (int i = 0; i < 4; ++i) {
    const Point2 p = apply_homography(H, src[static_cast<size_t>(i)]);
    const double err = std::hypot(p.x - dst[static_cast<size_t>(i)].x,
                                  p.y - dst[static_cast<size_t>(i)].y);
    if (!(err <= kCornerReprojTol)) {
      throw ValidationError("homography_from_quad: corner reprojection failed");
    }
  }
  return H;
}

Point2 apply_homography(const Homography& H, Point2 p) {
  const auto& m = H.m();
  const double wp = m[6] * p.x + m[7] * p.y + m[8];
  if (std::abs(wp) <= 1e-12) {
    throw AtInfinity("apply_homography: point maps to infinity");
  }
  return {(m[0] * p.x + m[1] * p.y + m[2]) / wp,
          (m[3] * p.x + m[4] * p.y + m[5]) / wp};
}

}  // namespace ppw
