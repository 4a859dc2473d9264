#pragma once

#include <array>
#include <vector>

#include "ppwarp/errors.hpp"

namespace ppw {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct ImageSize {
  int w = 0;  // pixels, >= 2
  int h = 0;  // pixels, >= 2
};

// Annotated segment in image coordinates. Endpoints must be distinct.
struct LineSegment {
  Point2 a;
  Point2 b;
};

enum class PlaneKind { Ground, Top };

// Perspective plane quad. Corner order is fixed:
//   [0] near-left, [1] near-right, [2] far-left, [3] far-right
// where "near" is the image edge the plane is anchored to
// (bottom row for Ground, top row for Top) and "far" is the
// vanishing-point side.
struct PlaneQuad {
  std::array<Point2, 4> corners{};
  PlaneKind kind = PlaneKind::Ground;
};

// 3x3 projective map, row major, scale-normalized so the entry with the
// largest magnitude equals 1 (first such entry in row-major order on ties).
class Homography {
 public:
  // Normalizes and rejects singular matrices (|det| <= 1e-12 after
  // normalization).
  explicit Homography(const std::array<double, 9>& m);

  const std::array<double, 9>& m() const { return m_; }
  double at(int r, int c) const { return m_[static_cast<size_t>(r) * 3 + c]; }

  Homography inverse() const;

 private:
  std::array<double, 9> m_{};
};

// Intersects the infinite lines through the given segments.
// Two lines: exact intersection. More: least-squares point minimizing the
// sum of squared perpendicular distances (2x2 normal equations).
// Throws DegenerateSegment when a segment is shorter than 1e-9 px and
// AllParallel when every pair of lines is parallel within 1e-6 rad.
Point2 vp_from_lines(const std::vector<LineSegment>& lines);

// Plane quad from the vanishing point and per-side edge angles and
// interpolation factors. alpha values are clamped to [0, 1], thetas to
// [-pi/2 + 1e-3, pi/2 - 1e-3]. For Ground the far corners interpolate
// between v and the image-edge points
//   u_L = (0, v_y + v_x tan(theta_a)),  u_R = (w, v_y + (w - v_x) tan(theta_b))
// with near corners pinned at (0, h) and (w, h). Top mirrors the vertical
// direction (edge points at v_y - ... , near corners at y = 0).
// Throws DegenerateQuad when any corner triple spans area <= 1e-6 px^2.
PlaneQuad plane_quad(Point2 v, double theta_a, double theta_b, double alpha_a,
                     double alpha_b, PlaneKind kind, ImageSize size);

// Homography sending the quad corners to the axis-aligned BEV rectangle:
//   near-left -> (0, bev.h), near-right -> (bev.w, bev.h),
//   far-left  -> (0, 0),     far-right  -> (bev.w, 0)
// so distance from the camera grows as the BEV row coordinate z = bev.h - y
// grows. Solved with the normalized (Hartley) DLT; corner reprojection is
// verified to 1e-6 px.
Homography homography_from_quad(const PlaneQuad& quad, ImageSize bev);

// Applies H to p. Throws AtInfinity when |w'| <= 1e-12.
Point2 apply_homography(const Homography& H, Point2 p);

}  // namespace ppw
