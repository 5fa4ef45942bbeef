#include "wbs/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "wbs/error.hpp"

namespace wbs::geometry {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

Intrinsics Intrinsics::scaled(double s) const {
  Intrinsics k;
  k.width = static_cast<int>(std::lround(width * s));
  k.height = static_cast<int>(std::lround(height * s));
  k.fx = fx * s;
  k.fy = fy * s;
  // Pixel-centre convention: continuous coordinate u maps to (u + 0.5) * s - 0.5.
  k.cx = (cx + 0.5) * s - 0.5;
  k.cy = (cy + 0.5) * s - 0.5;
  return k;
}

CameraModel::CameraModel(const Intrinsics& k, const Mat3& rot, const Vec3& trans)
    : fx(k.fx), fy(k.fy), cx(k.cx), cy(k.cy), R(rot), t(trans),
      width(k.width), height(k.height) {}

Mat3 CameraModel::K() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraModel::validate() const {
  require(fx > 0 && fy > 0, ErrorKind::InvalidArgument, "camera: focal lengths must be positive");
  require(width > 0 && height > 0, ErrorKind::InvalidArgument, "camera: empty image size");
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  require(ortho < 1e-9, ErrorKind::InvalidArgument, "camera: rotation is not orthonormal");
  require(R.determinant() > 0.0, ErrorKind::InvalidArgument, "camera: rotation has det -1");
  require(R.allFinite() && t.allFinite(), ErrorKind::InvalidArgument, "camera: non-finite pose");
}

Vec2 project(const CameraModel& cam, const Vec3& p) {
  const Vec3 pc = cam.R * p + cam.t;
  if (!(pc.z() > 1e-9)) fail(ErrorKind::BehindCamera, "project: point behind camera");
  return {cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy};
}

double depth_of(const CameraModel& cam, const Vec3& p) {
  return cam.R.row(2).dot(p) + cam.t.z();
}

Vec3 backproject(const CameraModel& cam, const Vec2& pixel, double depth) {
  const Vec3 pc((pixel.x() - cam.cx) / cam.fx * depth, (pixel.y() - cam.cy) / cam.fy * depth,
                depth);
  return cam.R.transpose() * (pc - cam.t);
}

Ray pixel_ray(const CameraModel& cam, const Vec2& pixel) {
  const Vec3 dc((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy, 1.0);
  return {cam.center(), (cam.R.transpose() * dc).normalized()};
}

std::pair<CameraModel, CameraModel> build_rig(double distance, double theta_deg,
                                              const Intrinsics& k) {
  require(distance > 0, ErrorKind::InvalidArgument, "build_rig: distance must be positive");
  require(theta_deg >= 0 && theta_deg < 180, ErrorKind::InvalidArgument,
          "build_rig: theta outside [0, 180)");
  auto make = [&](double alpha) {
    const Vec3 c(distance * std::sin(alpha), 0.0, distance * std::cos(alpha));
    const Vec3 z = -c.normalized();
    const Vec3 y(0.0, 1.0, 0.0);
    const Vec3 x = y.cross(z).normalized();
    Mat3 R;
    R.row(0) = x.transpose();
    R.row(1) = z.cross(x).transpose();
    R.row(2) = z.transpose();
    return CameraModel(k, R, -R * c);
  };
  const double half = 0.5 * theta_deg * kDeg;
  return {make(half), make(-half)};
}

double axis_angle_deg(const CameraModel& a, const CameraModel& b) {
  const Vec3 za = a.optical_axis(), zb = b.optical_axis();
  return std::atan2(za.cross(zb).norm(), za.dot(zb)) / kDeg;
}

RectifiedRig rectify_rig(const CameraModel& camL, const CameraModel& camR) {
  const Vec3 cl = camL.center(), cr = camR.center();
  const Vec3 baseline = cr - cl;
  if (baseline.norm() < 1e-9) fail(ErrorKind::DegenerateRig, "rectify: zero baseline");
  const Vec3 e1 = baseline.normalized();
  const Vec3 zsum = camL.optical_axis() + camR.optical_axis();
  const Vec3 e2raw = zsum.cross(e1);
  if (e2raw.norm() < 1e-9) {
    fail(ErrorKind::DegenerateRig, "rectify: baseline parallel to viewing direction");
  }
  const Vec3 e2 = e2raw.normalized();
  const Vec3 e3 = e1.cross(e2);
  Mat3 Rrect;
  Rrect.row(0) = e1.transpose();
  Rrect.row(1) = e2.transpose();
  Rrect.row(2) = e3.transpose();

  RectifiedRig rig;
  rig.f = 0.5 * (camL.fx + camR.fx);
  rig.B = baseline.norm();

  auto axis_in_rect = [&](const CameraModel& cam) {
    return Vec3(Rrect * cam.R.transpose() * Vec3::UnitZ());
  };
  const Vec3 dl = axis_in_rect(camL), dr = axis_in_rect(camR);
  const double cxl = camL.cx - rig.f * dl.x() / dl.z();
  const double cxr = camR.cx - rig.f * dr.x() / dr.z();
  const double cy = 0.5 * ((camL.cy - rig.f * dl.y() / dl.z()) + (camR.cy - rig.f * dr.y() / dr.z()));

  rig.left = CameraModel({rig.f, rig.f, cxl, cy, camL.width, camL.height}, Rrect, -Rrect * cl);
  rig.right = CameraModel({rig.f, rig.f, cxr, cy, camR.width, camR.height}, Rrect, -Rrect * cr);
  rig.Hleft = rig.left.K() * Rrect * camL.R.transpose() * camL.K().inverse();
  rig.Hright = rig.right.K() * Rrect * camR.R.transpose() * camR.K().inverse();
  rig.doffs = cxr - cxl;
  return rig;
}

ImageBuffer warp_homography(const ImageBuffer& src, const Mat3& H, int width, int height,
                            SemanticMask* valid, Backend backend) {
  ImageBuffer out(width, height, src.channels);
  if (valid) *valid = SemanticMask(width, height, 0);
  const Mat3 Hinv = H.inverse();
  parallel_for(backend, height, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    for (int x = 0; x < width; ++x) {
      const Vec3 s = Hinv * Vec3(x, y, 1.0);
      bool ok = s.z() > 0.0;
      const double u = s.x() / s.z(), v = s.y() / s.z();
      for (int c = 0; c < src.channels; ++c) {
        float value = 0.0f;
        ok = ok && sample_bilinear(src, u, v, c, value);
        out.at(x, y, c) = ok ? value : 0.0f;
      }
      if (valid) valid->at(x, y) = ok ? 1 : 0;
    }
  });
  return out;
}

SemanticMask warp_mask(const SemanticMask& src, const Mat3& H, int width, int height) {
  SemanticMask out(width, height, 0);
  const Mat3 Hinv = H.inverse();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 s = Hinv * Vec3(x, y, 1.0);
      if (s.z() <= 0.0) continue;
      const long u = std::lround(s.x() / s.z()), v = std::lround(s.y() / s.z());
      if (src.contains(static_cast<int>(u), static_cast<int>(v))) {
        out.at(x, y) = src.at(static_cast<int>(u), static_cast<int>(v));
      }
    }
  }
  return out;
}

RectifiedStereoPair rectify(const CameraModel& camL, const CameraModel& camR,
                            const ImageBuffer& imgL, const ImageBuffer& imgR,
                            Backend backend) {
  require(imgL.width == camL.width && imgL.height == camL.height &&
              imgR.width == camR.width && imgR.height == camR.height,
          ErrorKind::ShapeMismatch, "rectify: image size does not match camera");
  RectifiedStereoPair pair;
  pair.rig = rectify_rig(camL, camR);
  pair.left = warp_homography(imgL, pair.rig.Hleft, camL.width, camL.height, &pair.leftValid,
                              backend);
  pair.right = warp_homography(imgR, pair.rig.Hright, camL.width, camL.height,
                               &pair.rightValid, backend);
  return pair;
}

std::pair<int, int> disparity_range_for_depths(const RectifiedRig& rig, double zMin,
                                               double zMax) {
  require(zMin > 0 && zMax >= zMin, ErrorKind::InvalidArgument, "depth range invalid");
  const double fb = rig.f * rig.B;
  return {static_cast<int>(std::floor(fb / zMax - rig.doffs)),
          static_cast<int>(std::ceil(fb / zMin - rig.doffs))};
}

double disparity_to_depth(double d, double f, double B) {
  require(f > 0 && B > 0, ErrorKind::InvalidArgument, "disparity_to_depth: f and B must be > 0");
  if (!(d > 0.0)) return kInvalidDepth;
  return f * B / d;
}

double depth_to_disparity(double z, double f, double B) {
  require(f > 0 && B > 0, ErrorKind::InvalidArgument, "depth_to_disparity: f and B must be > 0");
  if (!is_valid_depth(z)) return 0.0;
  return f * B / z;
}

std::vector<Vec3> depth_to_points(const DepthMap& depth, const Intrinsics& k) {
  require(depth.width == k.width && depth.height == k.height, ErrorKind::ShapeMismatch,
          "depth_to_points: depth size does not match intrinsics");
  std::vector<Vec3> points;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const double z = depth.at(x, y);
      if (!is_valid_depth(z)) continue;
      points.emplace_back((x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z);
    }
  }
  return points;
}

}  // namespace wbs::geometry
