#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "wbs/image.hpp"
#include "wbs/parallel.hpp"

namespace wbs::geometry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Intrinsics {
  double fx = 300.0, fy = 300.0;
  double cx = 159.5, cy = 119.5;
  int width = 320, height = 240;

  Intrinsics scaled(double s) const;
};

// Pinhole camera; R and t map world points into the camera frame
// (x right, y down, z forward).
struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int width = 1, height = 1;

  CameraModel() = default;
  CameraModel(const Intrinsics& k, const Mat3& rot, const Vec3& trans);

  Intrinsics intrinsics() const { return {fx, fy, cx, cy, width, height}; }
  Mat3 K() const;
  Vec3 center() const { return -R.transpose() * t; }
  Vec3 optical_axis() const { return R.row(2).transpose(); }

  // Throws InvalidArgument when the rotation or intrinsics invariants fail.
  void validate() const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

// Throws BehindCamera when the point is at or behind the image plane.
Vec2 project(const CameraModel& cam, const Vec3& point_world);
// Camera-frame depth of a world point.
double depth_of(const CameraModel& cam, const Vec3& point_world);
Vec3 backproject(const CameraModel& cam, const Vec2& pixel, double depth);
Ray pixel_ray(const CameraModel& cam, const Vec2& pixel);

// Two cameras on a circle of radius `distance` about the world origin, both
// aimed at it, with optical axes `theta_deg` apart. Cameras look down -z
// with image y along world +y; the left camera sits at +theta/2 about the
// y axis so the right camera lies along its +x image direction.
std::pair<CameraModel, CameraModel> build_rig(double distance, double theta_deg,
                                              const Intrinsics& intrinsics);

double axis_angle_deg(const CameraModel& a, const CameraModel& b);

// Rectified rig: both cameras share rotation and focal length; rows align.
// Principal points keep each original image centre in view, so their x
// coordinates differ by doffs and depth = f*B/(d + doffs) for pixel
// disparity d = xL - xR.
struct RectifiedRig {
  CameraModel left, right;
  Mat3 Hleft, Hright;  // original pixel -> rectified pixel
  double f = 0.0;
  double B = 0.0;
  double doffs = 0.0;
};

RectifiedRig rectify_rig(const CameraModel& camL, const CameraModel& camR);

struct RectifiedStereoPair {
  ImageBuffer left, right;
  SemanticMask leftValid, rightValid;  // 0 where the warp sampled outside the source
  RectifiedRig rig;
  int dMin = 0, dMax = 0;

  double f() const { return rig.f; }
  double B() const { return rig.B; }
  int width() const { return left.width; }
  int height() const { return left.height; }
  int disparity_count() const { return dMax - dMin + 1; }
  double true_disparity(double pixel_disparity) const { return pixel_disparity + rig.doffs; }
};

// Warps both images into the rectified frame. The disparity range is left
// at [0, 0]; callers set it from scene knowledge or flags.
RectifiedStereoPair rectify(const CameraModel& camL, const CameraModel& camR,
                            const ImageBuffer& imgL, const ImageBuffer& imgR,
                            Backend backend = Backend::Parallel);

// Inverse-mapped bilinear warp; `valid` receives 0 where the source sample
// fell outside the input (filled with 0).
ImageBuffer warp_homography(const ImageBuffer& src, const Mat3& H, int width, int height,
                            SemanticMask* valid, Backend backend = Backend::Parallel);
// Nearest-neighbour variant for label maps.
SemanticMask warp_mask(const SemanticMask& src, const Mat3& H, int width, int height);

// Pixel disparity range covering depths [zMin, zMax] in the rectified frame.
std::pair<int, int> disparity_range_for_depths(const RectifiedRig& rig, double zMin,
                                               double zMax);

// Z = f*B/d for d > 0, kInvalidDepth otherwise.
double disparity_to_depth(double d, double f, double B);
double depth_to_disparity(double z, double f, double B);

// Camera-frame points, one per valid pixel, row-major order.
std::vector<Vec3> depth_to_points(const DepthMap& depth, const Intrinsics& k);

}  // namespace wbs::geometry
