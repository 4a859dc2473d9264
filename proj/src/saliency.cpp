#include "ppwarp/saliency.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace ppw {

namespace {

void require_sizes(ImageSize size, GridSize grid) {
  if (size.w < 2 || size.h < 2) {
    throw BadParam("image size must be at least 2x2");
  }
  if (grid.w < 8 || grid.h < 8) {
    throw BadParam("saliency grid must be at least 8x8");
  }
}

// Little-endian canonical serialization helpers for the parameter digest.
void push_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void push_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
  }
}

void push_params(std::vector<std::uint8_t>& out, const WarpParams& p) {
  push_f64(out, p.v.x);
  push_f64(out, p.v.y);
  for (double t : p.theta) push_f64(out, t);
  for (double a : p.alpha) push_f64(out, a);
  push_f64(out, p.nu);
  push_f64(out, p.nu_hat);
  push_f64(out, p.lambda);
  push_f64(out, p.kernel_sigma_frac);
}

void push_sizes(std::vector<std::uint8_t>& out, ImageSize size, GridSize grid) {
  push_u32(out, static_cast<std::uint32_t>(size.w));
  push_u32(out, static_cast<std::uint32_t>(size.h));
  push_u32(out, static_cast<std::uint32_t>(grid.w));
  push_u32(out, static_cast<std::uint32_t>(grid.h));
}

std::array<std::uint8_t, 32> sha256(const std::vector<std::uint8_t>& data) {
  std::array<std::uint8_t, 32> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != md.size()) {
    throw IoError("sha256 digest failed");
  }
  return md;
}

constexpr std::array<std::uint8_t, 8> kCacheMagic{'P', 'P', 'S', 'A',
                                                  'L', '1', 0, 0};

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

// Round the double grid through the file format's float32 so cache hits and
// misses return identical cells.
SaliencyMap quantized(SaliencyMap m) {
  for (double& c : m.cells) c = static_cast<double>(static_cast<float>(c));
  return m;
}

template <typename Params>
SaliencyMap get_or_build_impl(const CacheStore& store, const Params& params,
                              ImageSize size, GridSize grid,
                              SaliencyMap (*build)(const Params&, ImageSize,
                                                   GridSize)) {
  const auto hash = param_digest(params, size, grid);
  if (auto hit = store.get(hash)) {
    return std::move(*hit);
  }
  SaliencyMap fresh = quantized(build(params, size, grid));
  store.put(fresh);
  return fresh;
}

}  // namespace

WarpParams checked(WarpParams p) {
  const double theta_lim = std::numbers::pi / 2.0 - 1e-3;
  for (double& t : p.theta) t = std::clamp(t, -theta_lim, theta_lim);
  for (double& a : p.alpha) a = std::clamp(a, 0.0, 1.0);

  if (!std::isfinite(p.v.x) || !std::isfinite(p.v.y)) {
    throw BadParam("vanishing point must be finite");
  }
  if (!(p.nu > 1.0) || !std::isfinite(p.nu)) {
    throw BadParam("nu must exceed 1");
  }
  if (!(p.nu_hat > 1.0) || !std::isfinite(p.nu_hat)) {
    throw BadParam("nu_hat must exceed 1");
  }
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) {
    throw BadParam("lambda must be >= 0");
  }
  if (!(p.kernel_sigma_frac > 0.0) || !(p.kernel_sigma_frac <= 0.5)) {
    throw BadParam("kernel_sigma_frac must lie in (0, 0.5]");
  }
  return p;
}

std::vector<double> bev_profile(double nu, int rows, ProfileDirection dir) {
  if (!(nu > 1.0) || !std::isfinite(nu)) {
    throw BadParam("nu must exceed 1");
  }
  if (rows < 2) {
    throw BadParam("profile needs at least 2 rows");
  }
  std::vector<double> s(static_cast<size_t>(rows));
  const double denom = static_cast<double>(rows - 1);
  for (int z = 0; z < rows; ++z) {
    const double zn = static_cast<double>(z) / denom;
    s[static_cast<size_t>(z)] =
        dir == ProfileDirection::Far ? std::exp(nu * (zn - 1.0))
                                     : std::exp(-nu * zn);
  }
  return s;
}

SaliencyMap plane_saliency(const WarpParams& raw, PlaneKind kind,
                           ImageSize size, GridSize grid) {
  require_sizes(size, grid);
  const WarpParams p = checked(raw);

  const int ta = kind == PlaneKind::Ground ? 0 : 2;
  const PlaneQuad quad =
      plane_quad(p.v, p.theta[static_cast<size_t>(ta)],
                 p.theta[static_cast<size_t>(ta + 1)],
                 p.alpha[static_cast<size_t>(ta)],
                 p.alpha[static_cast<size_t>(ta + 1)], kind, size);
  const Homography H = homography_from_quad(quad, size);

  const double nu = kind == PlaneKind::Ground ? p.nu : p.nu_hat;
  const ProfileDirection dir = kind == PlaneKind::Ground
                                   ? ProfileDirection::Far
                                   : ProfileDirection::Near;
  const std::vector<double> profile = bev_profile(nu, grid.h, dir);

  // BEV image row r (top-down) carries profile index z = grid_h-1-r, because
  // the distance coordinate z runs bottom-up.
  std::vector<double> bev_rows(static_cast<size_t>(grid.h));
  for (int r = 0; r < grid.h; ++r) {
    bev_rows[static_cast<size_t>(r)] =
        profile[static_cast<size_t>(grid.h - 1 - r)];
  }

  // Homogeneous sign at the quad centroid fixes the in-front orientation;
  // cells whose sign flips lie beyond the horizon and get the floor.
  const auto& m = H.m();
  Point2 centroid{0.0, 0.0};
  for (const auto& c : quad.corners) {
    centroid.x += c.x / 4.0;
    centroid.y += c.y / 4.0;
  }
  const double wref = m[6] * centroid.x + m[7] * centroid.y + m[8];

  const double w = static_cast<double>(size.w);
  const double h = static_cast<double>(size.h);

  SaliencyMap out;
  out.grid_w = grid.w;
  out.grid_h = grid.h;
  out.target_size = size;
  out.cells.assign(static_cast<size_t>(grid.w) * static_cast<size_t>(grid.h),
                   kSaliencyFloor);

  for (int j = 0; j < grid.h; ++j) {
    const double cy = (static_cast<double>(j) + 0.5) * h /
                      static_cast<double>(grid.h);
    for (int i = 0; i < grid.w; ++i) {
      const double cx = (static_cast<double>(i) + 0.5) * w /
                        static_cast<double>(grid.w);
      const double wp = m[6] * cx + m[7] * cy + m[8];
      if (!(wp * wref > 0.0)) continue;
      const double xb = (m[0] * cx + m[1] * cy + m[2]) / wp;
      const double yb = (m[3] * cx + m[4] * cy + m[5]) / wp;
      if (xb < 0.0 || xb > w || yb < 0.0 || yb > h) continue;

      // Linear interpolation between BEV row centers, clamped at the ends.
      const double rf = std::clamp(
          yb / h * static_cast<double>(grid.h) - 0.5, 0.0,
          static_cast<double>(grid.h - 1));
      const int r0 = static_cast<int>(rf);
      const int r1 = std::min(r0 + 1, grid.h - 1);
      const double tr = rf - static_cast<double>(r0);
      const double val = (1.0 - tr) * bev_rows[static_cast<size_t>(r0)] +
                         tr * bev_rows[static_cast<size_t>(r1)];
      out.cells[static_cast<size_t>(j) * static_cast<size_t>(grid.w) +
                static_cast<size_t>(i)] = std::max(val, kSaliencyFloor);
    }
  }
  out.param_hash = param_digest(p, size, grid);
  return out;
}

SaliencyMap two_plane_saliency(const WarpParams& raw, ImageSize size,
                               GridSize grid) {
  const WarpParams p = checked(raw);
  SaliencyMap ground = plane_saliency(p, PlaneKind::Ground, size, grid);
  const SaliencyMap top = plane_saliency(p, PlaneKind::Top, size, grid);
  for (size_t i = 0; i < ground.cells.size(); ++i) {
    ground.cells[i] += p.lambda * top.cells[i];
  }
  ground.param_hash = param_digest(p, size, grid);
  return ground;
}

SaliencyMap multi_vp_saliency(const MultiVpConfig& cfg, ImageSize size,
                              GridSize grid) {
  require_sizes(size, grid);
  if (cfg.entries.empty()) {
    throw BadParam("multi-vp config needs at least one entry");
  }
  bool any_positive = false;
  for (const auto& e : cfg.entries) {
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw BadParam("multi-vp weights must be finite and >= 0");
    }
    any_positive = any_positive || e.weight > 0.0;
  }
  if (!any_positive) {
    throw BadParam("multi-vp weights must include a positive entry");
  }

  SaliencyMap out;
  out.grid_w = grid.w;
  out.grid_h = grid.h;
  out.target_size = size;
  out.cells.assign(static_cast<size_t>(grid.w) * static_cast<size_t>(grid.h),
                   0.0);
  for (const auto& e : cfg.entries) {
    const SaliencyMap part = two_plane_saliency(e.params, size, grid);
    for (size_t i = 0; i < out.cells.size(); ++i) {
      out.cells[i] += e.weight * part.cells[i];
    }
  }
  for (double& c : out.cells) {
    if (!(c > 0.0)) {
      throw BadParam("multi-vp combination produced a nonpositive cell");
    }
  }
  out.param_hash = param_digest(cfg, size, grid);
  return out;
}

std::array<std::uint8_t, 32> param_digest(const WarpParams& params,
                                          ImageSize size, GridSize grid) {
  const WarpParams p = checked(params);
  std::vector<std::uint8_t> buf;
  buf.reserve(1 + 14 * 8 + 16);
  buf.push_back('S');
  push_params(buf, p);
  push_sizes(buf, size, grid);
  return sha256(buf);
}

std::array<std::uint8_t, 32> param_digest(const MultiVpConfig& cfg,
                                          ImageSize size, GridSize grid) {
  std::vector<std::uint8_t> buf;
  buf.reserve(1 + 4 + cfg.entries.size() * 15 * 8 + 16);
  buf.push_back('M');
  push_u32(buf, static_cast<std::uint32_t>(cfg.entries.size()));
  for (const auto& e : cfg.entries) {
    push_params(buf, checked(e.params));
    push_f64(buf, e.weight);
  }
  push_sizes(buf, size, grid);
  return sha256(buf);
}

std::string hash_hex(const std::array<std::uint8_t, 32>& h) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : h) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

CacheStore::CacheStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec && !std::filesystem::is_directory(dir_)) {
    throw IoError("cache: cannot create directory " + dir_.string());
  }
}

std::filesystem::path CacheStore::entry_path(
    const std::array<std::uint8_t, 32>& hash) const {
  return dir_ / (hash_hex(hash) + ".ppsal");
}

std::optional<SaliencyMap> CacheStore::get(
    const std::array<std::uint8_t, 32>& hash) const {
  const auto path = entry_path(hash);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;

  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  constexpr size_t kHeader = 8 + 16 + 32;
  if (bytes.size() < kHeader + 4) {
    throw CacheCorrupt("cache: entry too short: " + path.string());
  }
  if (!std::equal(kCacheMagic.begin(), kCacheMagic.end(), bytes.begin())) {
    throw CacheCorrupt("cache: bad magic: " + path.string());
  }

  const std::uint32_t crc_stored = read_u32le(bytes.data() + bytes.size() - 4);
  const std::uint32_t crc_actual = static_cast<std::uint32_t>(
      crc32(0, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (crc_stored != crc_actual) {
    throw CacheCorrupt("cache: crc mismatch: " + path.string());
  }

  SaliencyMap m;
  m.grid_w = static_cast<int>(read_u32le(bytes.data() + 8));
  m.grid_h = static_cast<int>(read_u32le(bytes.data() + 12));
  m.target_size.w = static_cast<int>(read_u32le(bytes.data() + 16));
  m.target_size.h = static_cast<int>(read_u32le(bytes.data() + 20));
  std::copy(bytes.begin() + 24, bytes.begin() + 56, m.param_hash.begin());
  if (m.param_hash != hash) {
    throw CacheCorrupt("cache: digest mismatch: " + path.string());
  }
  if (m.grid_w < 8 || m.grid_h < 8 || m.target_size.w < 2 ||
      m.target_size.h < 2) {
    throw CacheCorrupt("cache: implausible dimensions: " + path.string());
  }
  const size_t n = static_cast<size_t>(m.grid_w) * static_cast<size_t>(m.grid_h);
  if (bytes.size() != kHeader + 4 * n + 4) {
    throw CacheCorrupt("cache: payload size mismatch: " + path.string());
  }
  m.cells.resize(n);
  for (size_t i = 0; i < n; ++i) {
    std::uint32_t u = read_u32le(bytes.data() + kHeader + 4 * i);
    float f;
    std::memcpy(&f, &u, 4);
    if (!(f > 0.0f) || !std::isfinite(f)) {
      throw CacheCorrupt("cache: nonpositive cell: " + path.string());
    }
    m.cells[i] = static_cast<double>(f);
  }
  return m;
}

void CacheStore::put(const SaliencyMap& map) const {
  std::vector<std::uint8_t> bytes;
  const size_t n = map.cells.size();
  bytes.reserve(8 + 16 + 32 + 4 * n + 4);
  bytes.insert(bytes.end(), kCacheMagic.begin(), kCacheMagic.end());
  push_u32(bytes, static_cast<std::uint32_t>(map.grid_w));
  push_u32(bytes, static_cast<std::uint32_t>(map.grid_h));
  push_u32(bytes, static_cast<std::uint32_t>(map.target_size.w));
  push_u32(bytes, static_cast<std::uint32_t>(map.target_size.h));
  bytes.insert(bytes.end(), map.param_hash.begin(), map.param_hash.end());
  for (double c : map.cells) {
    const float f = static_cast<float>(c);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    push_u32(bytes, u);
  }
  push_u32(bytes, static_cast<std::uint32_t>(
                      crc32(0, bytes.data(), static_cast<uInt>(bytes.size()))));

  static std::atomic<std::uint64_t> counter{0};
  const auto final_path = entry_path(map.param_hash);
  const auto tmp_path =
      final_path.string() + ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cache: cannot open temp file " + tmp_path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw IoError("cache: short write to " + tmp_path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp_path);
    throw IoError("cache: rename failed for " + final_path.string());
  }
}

SaliencyMap cache_get_or_build(const CacheStore& store, const WarpParams& params,
                               ImageSize size, GridSize grid) {
  return get_or_build_impl<WarpParams>(store, params, size, grid,
                                       &two_plane_saliency);
}

SaliencyMap cache_get_or_build(const CacheStore& store, const MultiVpConfig& cfg,
                               ImageSize size, GridSize grid) {
  return get_or_build_impl<MultiVpConfig>(store, cfg, size, grid,
                                          &multi_vp_saliency);
}

}  // namespace ppw
