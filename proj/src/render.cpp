#include "wbs/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wbs/error.hpp"
#include "wbs/rng.hpp"

namespace wbs::render {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHitTolerance = 1e-10;

// Lattice hash -> [0, 1).
double lattice(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
  std::uint64_t h = seed;
  h = splitmix64(h ^ static_cast<std::uint64_t>(x));
  h = splitmix64(h ^ static_cast<std::uint64_t>(y));
  h = splitmix64(h ^ static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Vec3& p, std::uint64_t seed) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
  double c[2][2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int d = 0; d < 2; ++d) c[a][b][d] = lattice(ix + a, iy + b, iz + d, seed);
  auto lerp = [](double u, double v, double t) { return u + (v - u) * t; };
  const double x00 = lerp(c[0][0][0], c[1][0][0], tx), x10 = lerp(c[0][1][0], c[1][1][0], tx);
  const double x01 = lerp(c[0][0][1], c[1][0][1], tx), x11 = lerp(c[0][1][1], c[1][1][1], tx);
  return lerp(lerp(x00, x10, ty), lerp(x01, x11, ty), tz);
}

double fbm(const Vec3& p, std::uint64_t seed) {
  double sum = 0.0, amp = 0.5, norm = 0.0;
  Vec3 q = p;
  for (int octave = 0; octave < 3; ++octave) {
    sum += amp * value_noise(q, seed + octave);
    norm += amp;
    amp *= 0.5;
    q *= 2.03;
  }
  return sum / norm;
}

Vec3 mix(const Vec3& a, const Vec3& b, double t) { return a + (b - a) * t; }

double spots(const Vec3& p, std::uint64_t seed) {
  const Vec3 cell(std::floor(p.x()), std::floor(p.y()), std::floor(p.z()));
  double best = 1e9;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const Vec3 c = cell + Vec3(dx, dy, dz);
        const auto ix = static_cast<std::int64_t>(c.x()), iy = static_cast<std::int64_t>(c.y()),
                   iz = static_cast<std::int64_t>(c.z());
        const Vec3 jitter(lattice(ix, iy, iz, seed), lattice(ix, iy, iz, seed + 1),
                          lattice(ix, iy, iz, seed + 2));
        best = std::min(best, (c + jitter - p).norm());
      }
  return std::clamp((0.45 - best) / 0.12 + 0.5, 0.0, 1.0);
}

Vec3 random_color(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
  } while (v.norm() < 0.1 || v.norm() > 1.0);
  return v.normalized();
}

double surface_lipschitz(const SurfaceSpec& s) {
  const double rmin = s.radii.minCoeff() - s.bumpAmplitude;
  const double slope = s.bumpAmplitude * kPi * s.bumpFrequency * std::sqrt(3.0) + s.radii.maxCoeff();
  return 1.0 + slope / std::max(rmin, 1e-3);
}

}  // namespace

void SceneSpec::validate() const {
  require((surface.radii.array() > 0).all(), ErrorKind::InvalidArgument, "scene: radii must be > 0");
  require(surface.bumpAmplitude >= 0 && surface.bumpAmplitude < surface.radii.minCoeff(),
          ErrorKind::InvalidArgument, "scene: bump amplitude must be below the minimum radius");
  require(surface.e1 > 0 && surface.e2 > 0, ErrorKind::InvalidArgument, "scene: exponents must be > 0");
  require(std::abs(lightDirection.norm() - 1.0) < 1e-9, ErrorKind::InvalidArgument,
          "scene: light direction must be unit length");
  require(ambient >= 0 && ambient <= 1, ErrorKind::InvalidArgument, "scene: ambient outside [0,1]");
  require(background.distance > bounding_radius(surface) - surface.center.z(),
          ErrorKind::InvalidArgument, "scene: background plane intersects the surface");
}

bool SceneSpec::operator==(const SceneSpec& o) const {
  auto tex_eq = [](const TextureSpec& a, const TextureSpec& b) {
    return a.kind == b.kind && a.frequency == b.frequency && a.colorA == b.colorA &&
           a.colorB == b.colorB && a.direction == b.direction && a.seed == b.seed;
  };
  const auto& s = surface;
  const auto& t = o.surface;
  return seed == o.seed && s.center == t.center && s.radii == t.radii && s.e1 == t.e1 &&
         s.e2 == t.e2 && s.bumpAmplitude == t.bumpAmplitude &&
         s.bumpFrequency == t.bumpFrequency && s.bumpPhase == t.bumpPhase &&
         tex_eq(foregroundTexture, o.foregroundTexture) &&
         background.distance == o.background.distance &&
         tex_eq(background.texture, o.background.texture) &&
         lightDirection == o.lightDirection && ambient == o.ambient;
}

SceneSpec generate_scene(std::uint64_t seed, Difficulty difficulty, TextureFamily family) {
  Rng rng(substream(seed, "scene"));
  SceneSpec scene;
  scene.seed = seed;

  auto& s = scene.surface;
  s.center = {uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05)};
  s.radii = {uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.5)};
  s.e1 = uniform(rng, 0.6, 1.0);
  s.e2 = uniform(rng, 0.6, 1.0);
  s.bumpFrequency = uniform(rng, 2.0, 8.0);
  s.bumpAmplitude = uniform(rng, 0.01, 0.05);
  s.bumpPhase = {uniform(rng, 0, 2 * kPi), uniform(rng, 0, 2 * kPi), uniform(rng, 0, 2 * kPi)};

  auto& fg = scene.foregroundTexture;
  fg.seed = rng();
  if (family == TextureFamily::Standard) {
    const bool checker = coin(rng, 0.4);
    fg.kind = checker ? TextureKind::Checker : TextureKind::Noise;
    fg.frequency = checker ? uniform(rng, 25.0, 50.0) : uniform(rng, 20.0, 40.0);
    fg.colorA = random_color(rng, 0.1, 0.5);
    fg.colorB = random_color(rng, 0.5, 0.95);
  } else {
    const bool stripes = coin(rng, 0.5);
    fg.kind = stripes ? TextureKind::Stripes : TextureKind::Spots;
    fg.frequency = stripes ? uniform(rng, 12.0, 25.0) : uniform(rng, 20.0, 35.0);
    // Saturated two-hue palette.
    const int hue = uniform_int(rng, 0, 2);
    fg.colorA = Vec3::Constant(uniform(rng, 0.05, 0.25));
    fg.colorA[hue] = uniform(rng, 0.7, 0.95);
    fg.colorB = Vec3::Constant(uniform(rng, 0.55, 0.8));
    fg.colorB[(hue + 1) % 3] = uniform(rng, 0.05, 0.3);
    fg.direction = random_unit(rng);
  }

  auto& bg = scene.background;
  bg.distance = uniform(rng, 1.0, 1.5);
  bg.texture.seed = rng();
  if (difficulty == Difficulty::PlainBackground) {
    bg.texture.kind = TextureKind::Constant;
    bg.texture.colorA = random_color(rng, 0.2, 0.8);
    bg.texture.colorB = bg.texture.colorA;
  } else {
    bg.texture.kind = TextureKind::Noise;
    bg.texture.frequency = uniform(rng, 40.0, 70.0);
    bg.texture.colorA = random_color(rng, 0.0, 0.4);
    bg.texture.colorB = random_color(rng, 0.6, 1.0);
  }

  Vec3 light(uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7), uniform(rng, 0.3, 1.0));
  scene.lightDirection = light.normalized();
  scene.ambient = uniform(rng, 0.25, 0.5);
  scene.validate();
  return scene;
}

double surface_radius(const SurfaceSpec& s, const Vec3& u) {
  const double ax = std::pow(std::abs(u.x() / s.radii.x()), 2.0 / s.e2);
  const double ay = std::pow(std::abs(u.y() / s.radii.y()), 2.0 / s.e2);
  const double az = std::pow(std::abs(u.z() / s.radii.z()), 2.0 / s.e1);
  const double F = std::pow(ax + ay, s.e2 / s.e1) + az;
  const double omega = kPi * s.bumpFrequency;
  const double bump = std::sin(omega * u.x() + s.bumpPhase.x()) *
                      std::sin(omega * u.y() + s.bumpPhase.y()) *
                      std::sin(omega * u.z() + s.bumpPhase.z());
  return std::pow(F, -0.5 * s.e1) + s.bumpAmplitude * bump;
}

double bounding_radius(const SurfaceSpec& s) { return s.radii.norm() + s.bumpAmplitude; }

double surface_function(const SurfaceSpec& s, const Vec3& p) {
  const Vec3 q = p - s.center;
  const double r = q.norm();
  if (r < 1e-12) return -s.radii.minCoeff();
  return r - surface_radius(s, q / r);
}

Vec3 surface_normal(const SurfaceSpec& s, const Vec3& p) {
  constexpr double h = 1e-6;
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = p, b = p;
    a[i] += h;
    b[i] -= h;
    g[i] = surface_function(s, a) - surface_function(s, b);
  }
  return g.normalized();
}

namespace {

std::optional<double> intersect_surface(const SurfaceSpec& s, const geometry::Ray& ray) {
  const Vec3 oc = ray.origin - s.center;
  const double rb = bounding_radius(s);
  const double b = oc.dot(ray.direction);
  const double disc = b * b - (oc.squaredNorm() - rb * rb);
  if (disc <= 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = std::max(-b - sq, 0.0);
  const double tEnd = -b + sq;
  if (tEnd <= 0) return std::nullopt;

  const double lipschitz = surface_lipschitz(s);
  constexpr double kMinStep = 1e-4;
  double g = surface_function(s, ray.origin + t * ray.direction);
  if (g <= 0) return t;
  while (t < tEnd) {
    const double step = std::max(g / lipschitz, kMinStep);
    const double tn = t + step;
    const double gn = surface_function(s, ray.origin + tn * ray.direction);
    if (gn <= 0) {
      double lo = t, hi = tn;
      while (hi - lo > kHitTolerance) {
        const double mid = 0.5 * (lo + hi);
        if (surface_function(s, ray.origin + mid * ray.direction) > 0) lo = mid;
        else hi = mid;
      }
      return hi;
    }
    t = tn;
    g = gn;
  }
  return std::nullopt;
}

}  // namespace

Hit cast_ray(const SceneSpec& scene, const geometry::Ray& ray) {
  Hit hit;
  if (auto t = intersect_surface(scene.surface, ray)) {
    hit.kind = HitKind::Foreground;
    hit.t = *t;
    hit.point = ray.origin + *t * ray.direction;
    hit.normal = surface_normal(scene.surface, hit.point);
    return hit;
  }
  if (ray.direction.z() < -1e-12) {
    const double t = (-scene.background.distance - ray.origin.z()) / ray.direction.z();
    if (t > 0) {
      hit.kind = HitKind::Background;
      hit.t = t;
      hit.point = ray.origin + t * ray.direction;
      hit.point.z() = -scene.background.distance;
      hit.normal = Vec3::UnitZ();
    }
  }
  return hit;
}

Vec3 texture_color(const TextureSpec& tex, const Vec3& p) {
  const Vec3 q = p * tex.frequency;
  switch (tex.kind) {
    case TextureKind::Constant:
      return tex.colorA;
    case TextureKind::Noise: {
      const double v = std::clamp((fbm(q, tex.seed) - 0.5) * 2.2 + 0.5, 0.0, 1.0);
      return mix(tex.colorA, tex.colorB, v);
    }
    case TextureKind::Checker: {
      const auto parity = static_cast<std::int64_t>(std::floor(q.x())) +
                          static_cast<std::int64_t>(std::floor(q.y())) +
                          static_cast<std::int64_t>(std::floor(q.z()));
      // Low-amplitude noise keeps cells distinguishable from one another.
      const double n = 0.35 * (fbm(q * 0.5, tex.seed) - 0.5);
      return mix(tex.colorA, tex.colorB, std::clamp((parity & 1 ? 1.0 : 0.0) + n, 0.0, 1.0));
    }
    case TextureKind::Stripes: {
      const double warp = 3.0 * fbm(q * 0.35, tex.seed);
      const double v = 0.5 + 0.5 * std::sin(2.0 * kPi * (q.dot(tex.direction) + warp));
      return mix(tex.colorA, tex.colorB, v);
    }
    case TextureKind::Spots:
      return mix(tex.colorA, tex.colorB, spots(q, tex.seed));
  }
  return tex.colorA;
}

Vec3 shade(const SceneSpec& scene, const Hit& hit) {
  if (hit.kind == HitKind::None) return Vec3::Zero();
  const bool fg = hit.kind == HitKind::Foreground;
  const TextureSpec& tex = fg ? scene.foregroundTexture : scene.background.texture;
  const Vec3 local = fg ? Vec3(hit.point - scene.surface.center) : hit.point;
  const double lambert = std::max(0.0, hit.normal.dot(scene.lightDirection));
  const double k = scene.ambient + (1.0 - scene.ambient) * lambert;
  return (texture_color(tex, local) * k).cwiseMin(1.0).cwiseMax(0.0);
}

RenderedView render_view(const SceneSpec& scene, const CameraModel& cam, Backend backend,
                         bool allowEmpty) {
  RenderedView view;
  view.image = ImageBuffer(cam.width, cam.height, 3);
  view.depth = DepthMap(cam.width, cam.height, kInvalidDepth);
  view.backgroundDepth = DepthMap(cam.width, cam.height, kInvalidDepth);
  view.mask = SemanticMask(cam.width, cam.height, 0);

  parallel_for(backend, cam.height, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    for (int x = 0; x < cam.width; ++x) {
      const Hit hit = cast_ray(scene, geometry::pixel_ray(cam, Vec2(x, y)));
      const Vec3 color = shade(scene, hit);
      for (int c = 0; c < 3; ++c) view.image.at(x, y, c) = static_cast<float>(color[c]);
      if (hit.kind == HitKind::Foreground) {
        view.depth.at(x, y) = static_cast<float>(geometry::depth_of(cam, hit.point));
        view.mask.at(x, y) = 1;
      } else if (hit.kind == HitKind::Background) {
        view.backgroundDepth.at(x, y) = static_cast<float>(geometry::depth_of(cam, hit.point));
      }
    }
  });

  if (!allowEmpty &&
      std::none_of(view.mask.values.begin(), view.mask.values.end(), [](auto v) { return v; })) {
    fail(ErrorKind::FrustumMiss, "render_view: foreground surface not visible");
  }
  return view;
}

bool visible_from(const SceneSpec& scene, const CameraModel& cam, const Vec3& point,
                  double tolerance) {
  const double z = geometry::depth_of(cam, point);
  if (z <= 1e-9) return false;
  const Vec3 origin = cam.center();
  const Hit hit = cast_ray(scene, {origin, (point - origin).normalized()});
  if (hit.kind == HitKind::None) return false;
  return std::abs(geometry::depth_of(cam, hit.point) - z) < tolerance;
}

std::vector<Correspondence> exact_correspondences(const SceneSpec& scene,
                                                  const CameraModel& camL,
                                                  const CameraModel& camR, int count,
                                                  std::uint64_t seed, SurfaceSelect surface) {
  std::vector<Correspondence> out;
  if (count <= 0) return out;
  out.reserve(count);
  Rng rng(seed);
  const HitKind wanted =
      surface == SurfaceSelect::Foreground ? HitKind::Foreground : HitKind::Background;
  const long maxDraws = std::max<long>(2000, 200L * count);
  for (long draw = 0; draw < maxDraws && static_cast<int>(out.size()) < count; ++draw) {
    const Vec2 pl(uniform_int(rng, 0, camL.width - 1), uniform_int(rng, 0, camL.height - 1));
    const Hit hit = cast_ray(scene, geometry::pixel_ray(camL, pl));
    if (hit.kind != wanted) continue;
    if (geometry::depth_of(camR, hit.point) <= 1e-9) continue;
    const Vec2 pr = geometry::project(camR, hit.point);
    if (pr.x() < 0 || pr.y() < 0 || pr.x() > camR.width - 1 || pr.y() > camR.height - 1) continue;
    if (!visible_from(scene, camR, hit.point)) continue;
    out.push_back({pl, pr, hit.point});
  }
  if (static_cast<int>(out.size()) < count) {
    fail(ErrorKind::InsufficientVisibility,
         "exact_correspondences: found " + std::to_string(out.size()) + " of " +
             std::to_string(count) + " mutually visible points");
  }
  return out;
}

}  // namespace wbs::render
