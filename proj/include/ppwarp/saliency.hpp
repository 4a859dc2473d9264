#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ppwarp/geometry.hpp"

namespace ppw {

// Saliency grid resolution. Coarser than the image; 8x8 is the minimum that
// keeps the axis marginals meaningful.
struct GridSize {
  int w = 96;
  int h = 60;
};

// Full parameter bundle for the two-plane prior. theta/alpha index the four
// plane edges: [0], [1] are the ground left/right edges, [2], [3] the top
// plane left/right edges.
struct WarpParams {
  Point2 v{};                                        // vanishing point, px
  std::array<double, 4> theta{0.15, 0.15, 0.15, 0.15};  // rad
  std::array<double, 4> alpha{0.5, 0.5, 0.5, 0.5};      // [0, 1]
  double nu = 2.0;                // ground falloff rate, > 1
  double nu_hat = 2.0;            // top falloff rate, > 1
  double lambda = 0.3;            // top plane weight, >= 0
  double kernel_sigma_frac = 0.06;  // warp kernel sigma as fraction of axis length
};

// Clamps alpha into [0, 1] and theta into [-pi/2 + 1e-3, pi/2 - 1e-3], then
// validates the remaining fields. Throws BadParam naming the violated bound.
WarpParams checked(WarpParams p);

// Cell (x, y) holds the saliency of the image region
// [x, x+1) * target_w / grid_w  by  [y, y+1) * target_h / grid_h.
struct SaliencyMap {
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> cells;  // row-major, strictly positive
  ImageSize target_size{};
  std::array<std::uint8_t, 32> param_hash{};

  double at(int x, int y) const {
    return cells[static_cast<size_t>(y) * static_cast<size_t>(grid_w) + static_cast<size_t>(x)];
  }
};

// Direction of the favored (value 1) end of the exponential profile along the
// BEV distance coordinate z in [0, rows-1]. Far peaks at z = rows-1, Near at
// z = 0. Ground planes use Far (distant objects shrink and need the samples),
// the top plane uses Near.
enum class ProfileDirection { Far, Near };

// Exponential BEV profile, length rows:
//   Far:  s[z] = exp(nu * (z / (rows-1) - 1))
//   Near: s[z] = exp(-nu * z / (rows-1))
// Throws BadParam if nu <= 1 or rows < 2.
std::vector<double> bev_profile(double nu, int rows, ProfileDirection dir);

// Saliency floor for grid cells that fall outside the BEV rectangle (and a
// global lower bound so marginals stay strictly positive).
inline constexpr double kSaliencyFloor = 1e-4;

// Single-plane saliency: build the BEV profile on the grid rows, then pull it
// back through the plane homography. Each camera grid cell center is mapped
// to BEV coordinates and the (column-constant) BEV map is sampled linearly
// along its row axis; cells mapping outside the BEV rectangle, or behind the
// camera (homogeneous sign flip), receive kSaliencyFloor.
SaliencyMap plane_saliency(const WarpParams& params, PlaneKind kind,
                           ImageSize size, GridSize grid);

// S = S_ground + lambda * S_top, cell-wise.
SaliencyMap two_plane_saliency(const WarpParams& params, ImageSize size,
                               GridSize grid);

// One vanishing point hypothesis with its blend weight.
struct VpEntry {
  WarpParams params;
  double weight = 1.0;  // >= 0
};

// Weighted combination of per-vanishing-point two-plane maps. Weights must be
// nonnegative with at least one positive; a uniform prior over N hypotheses
// uses weight 1/N each.
struct MultiVpConfig {
  std::vector<VpEntry> entries;
};

SaliencyMap multi_vp_saliency(const MultiVpConfig& cfg, ImageSize size,
                              GridSize grid);

// SHA-256 over the canonical little-endian serialization of the (clamped)
// parameters plus target and grid sizes. Identifies cache entries.
std::array<std::uint8_t, 32> param_digest(const WarpParams& params,
                                          ImageSize size, GridSize grid);
std::array<std::uint8_t, 32> param_digest(const MultiVpConfig& cfg,
                                          ImageSize size, GridSize grid);

std::string hash_hex(const std::array<std::uint8_t, 32>& h);

// Directory-backed saliency cache. One file per parameter digest:
//   8B magic "PPSAL1\0\0", u32 grid_w/grid_h/target_w/target_h,
//   32B digest, grid_w*grid_h float32 cells row-major,
//   u32 CRC32 of all preceding bytes. All fields little-endian.
// Writes go to a temp file in the same directory followed by a rename, so
// concurrent readers never observe partial entries.
class CacheStore {
 public:
  explicit CacheStore(std::filesystem::path dir);

  // nullopt when the entry does not exist. Throws CacheCorrupt on bad magic,
  // size/digest mismatch, CRC failure, or nonpositive cells.
  std::optional<SaliencyMap> get(const std::array<std::uint8_t, 32>& hash) const;

  void put(const SaliencyMap& map) const;

  std::filesystem::path entry_path(const std::array<std::uint8_t, 32>& hash) const;

 private:
  std::filesystem::path dir_;
};

// Cache-aware build. On a hit the stored map is returned as-is. On a miss the
// map is built, persisted, and returned in its persisted form. Cells round
// through the file format's float32 on both routes, so hit and miss yield
// bit-identical grids for identical parameters.
SaliencyMap cache_get_or_build(const CacheStore& store, const WarpParams& params,
                               ImageSize size, GridSize grid);
SaliencyMap cache_get_or_build(const CacheStore& store, const MultiVpConfig& cfg,
                               ImageSize size, GridSize grid);

// Staleness policy for streaming callers: re-key the cache on a fresh
// vanishing point every n_v frames (frame 0 always refreshes).
struct VpRefresh {
  int n_v = 30;
  bool due(long frame_index) const {
    return n_v > 0 && frame_index % n_v == 0;
  }
};

}  // namespace ppw
