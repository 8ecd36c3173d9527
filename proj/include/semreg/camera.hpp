#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace semreg {

enum class Projection { Perspective, Orthographic };

Projection projection_from_string(const std::string& s);
std::string projection_to_string(Projection mode);

// Rig geometry constants. The cameras sit on a sphere of radius 2.8 looking
// at the origin; perspective uses a 40 degree vertical field of view and
// orthographic a half-extent of 1.2, sized for meshes normalized to [-1,1]^3.
inline constexpr double kRigRadius = 2.8;
inline constexpr double kFovYDegrees = 40.0;
inline constexpr double kOrthoHalfExtent = 1.2;
inline constexpr double kNearClip = 1e-6;

// Camera with a proper world-to-camera rotation (rows: right, up, backward)
// looking down -z in camera space. Depth is distance along the optical axis,
// positive in front. NDC spans [-1,1] in both axes; +u is image right, +v is
// image up (pixel row 0 is the top of the image).
struct Camera {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world-to-camera
    Eigen::Vector3d position = Eigen::Vector3d::Zero();      // camera center, world
    Projection mode = Projection::Perspective;
    int resolution = 512;
    double fov_y_deg = kFovYDegrees;          // perspective only
    double ortho_half_extent = kOrthoHalfExtent;  // orthographic only

    Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const { return rotation * (p - position); }

    // Returns false when a perspective point is at or behind the near plane.
    bool project_checked(const Eigen::Vector3d& p, Eigen::Vector2d& ndc, double& depth) const;

    // Throwing variant for callers that require the point to be in front.
    Eigen::Vector2d project(const Eigen::Vector3d& p, double* depth = nullptr) const;

    // d(ndc)/d(world point), evaluated at p.
    Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& p) const;

    double tan_half_fov() const;
};

struct CameraRig {
    std::vector<Camera> cameras;
    Projection mode = Projection::Perspective;
    int resolution = 512;

    int view_count() const { return static_cast<int>(cameras.size()); }
};

// Cameras on the rig sphere, all looking at the origin with up = +y.
// Ordering is elevation-major, azimuth-minor; azimuths run 0, step, ... <360.
CameraRig build_rig(double azimuth_step_deg, const std::vector<double>& elevations_deg,
                    int resolution, Projection mode);

std::string rig_to_json(const CameraRig& rig);
void save_rig_json(const std::string& path, const CameraRig& rig);

// Pixel center (x right, y down from the top-left) in NDC.
inline Eigen::Vector2d pixel_center_ndc(int x, int y, int width, int height) {
    return {-1.0 + 2.0 * (x + 0.5) / width, 1.0 - 2.0 * (y + 0.5) / height};
}

} // namespace semreg
