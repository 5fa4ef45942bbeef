#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wbs/geometry.hpp"
#include "wbs/image.hpp"
#include "wbs/parallel.hpp"

namespace wbs::render {

using geometry::CameraModel;
using geometry::Vec2;
using geometry::Vec3;

enum class TextureKind { Noise, Checker, Stripes, Spots, Constant };

// Solid (3-D) texture evaluated in object space, so colour is independent of
// the viewing camera.
struct TextureSpec {
  TextureKind kind = TextureKind::Constant;
  double frequency = 20.0;  // cycles per metre
  Vec3 colorA = Vec3::Constant(0.5);
  Vec3 colorB = Vec3::Constant(0.5);
  Vec3 direction = Vec3::UnitX();  // stripes only
  std::uint64_t seed = 0;
};

// Star-shaped bumpy superellipsoid:
//   rho(u) = F(u)^(-e1/2) + amplitude * bump(u)
// where F is the superellipsoid inside-outside function with the given radii.
struct SurfaceSpec {
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Constant(0.3);
  double e1 = 1.0, e2 = 1.0;
  double bumpAmplitude = 0.02;
  double bumpFrequency = 4.0;  // cycles across the unit sphere
  Vec3 bumpPhase = Vec3::Zero();
};

// Plane z = -distance facing the cameras.
struct BackgroundSpec {
  double distance = 1.2;
  TextureSpec texture;
};

enum class Difficulty { PlainBackground, ClutteredBackground };
enum class TextureFamily { Standard, Mismatched };

struct SceneSpec {
  std::uint64_t seed = 0;
  SurfaceSpec surface;
  TextureSpec foregroundTexture;
  BackgroundSpec background;
  Vec3 lightDirection = Vec3::UnitZ();
  double ambient = 0.3;

  // Throws InvalidArgument on violated invariants.
  void validate() const;
  bool operator==(const SceneSpec& other) const;
};

// Standard family: noise and checker textures. Mismatched family: stripes and
// spots with a different palette, used as a held-out texture domain.
SceneSpec generate_scene(std::uint64_t seed, Difficulty difficulty,
                         TextureFamily family = TextureFamily::Standard);

enum class HitKind : std::uint8_t { None = 0, Foreground = 1, Background = 2 };

struct Hit {
  HitKind kind = HitKind::None;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
};

// Signed radial distance of a point to the foreground surface (> 0 outside).
double surface_function(const SurfaceSpec& s, const Vec3& p);
Vec3 surface_normal(const SurfaceSpec& s, const Vec3& p);
// Radial extent of the surface along unit direction u from its centre.
double surface_radius(const SurfaceSpec& s, const Vec3& u);
double bounding_radius(const SurfaceSpec& s);

Hit cast_ray(const SceneSpec& scene, const geometry::Ray& ray);
Vec3 texture_color(const TextureSpec& tex, const Vec3& p);
Vec3 shade(const SceneSpec& scene, const Hit& hit);

struct RenderedView {
  ImageBuffer image;          // RGB
  DepthMap depth;             // foreground only
  DepthMap backgroundDepth;   // background plane only
  SemanticMask mask;          // 1 where the foreground surface was hit
};

// Throws FrustumMiss when no foreground pixel is rendered (unless
// allowEmpty is set).
RenderedView render_view(const SceneSpec& scene, const CameraModel& cam,
                         Backend backend = Backend::Parallel, bool allowEmpty = false);

enum class SurfaceSelect { Foreground, Background };

struct Correspondence {
  Vec2 pixelL;
  Vec2 pixelR;
  Vec3 point;
};

// Samples integer pixels in camL whose primary ray hits the selected surface
// and whose 3-D point is also the first hit along the camR ray through its
// projection (depth test tolerance 1e-4 m). Throws InsufficientVisibility if
// `count` pairs cannot be found within a bounded number of draws.
std::vector<Correspondence> exact_correspondences(
    const SceneSpec& scene, const CameraModel& camL, const CameraModel& camR, int count,
    std::uint64_t seed, SurfaceSelect surface = SurfaceSelect::Foreground);

// True when a world point is the first surface hit along camR's ray to it.
bool visible_from(const SceneSpec& scene, const CameraModel& cam, const Vec3& point,
                  double tolerance = 1e-4);

}  // namespace wbs::render
