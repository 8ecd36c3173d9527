#include "semreg/camera.hpp"

#include "semreg/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace semreg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Projection projection_from_string(const std::string& s) {
    if (s == "perspective") return Projection::Perspective;
    if (s == "orthographic") return Projection::Orthographic;
    throw Error(ErrorCode::InvalidArgument, "unknown projection mode: " + s);
}

std::string projection_to_string(Projection mode) {
    return mode == Projection::Perspective ? "perspective" : "orthographic";
}

double Camera::tan_half_fov() const {
    return std::tan(fov_y_deg * kPi / 360.0);
}

bool Camera::project_checked(const Eigen::Vector3d& p, Eigen::Vector2d& ndc, double& depth) const {
    const Eigen::Vector3d c = to_camera(p);
    depth = -c.z();
    if (mode == Projection::Perspective) {
        if (depth <= kNearClip) return false;
        const double t = tan_half_fov();
        ndc = {c.x() / (t * depth), c.y() / (t * depth)};
    } else {
        ndc = {c.x() / ortho_half_extent, c.y() / ortho_half_extent};
    }
    return true;
}

Eigen::Vector2d Camera::project(const Eigen::Vector3d& p, double* depth) const {
    Eigen::Vector2d ndc;
    double d;
    if (!project_checked(p, ndc, d)) {
        throw Error(ErrorCode::PointBehindCamera, "point at or behind the camera near plane");
    }
    if (depth) *depth = d;
    return ndc;
}

Eigen::Matrix<double, 2, 3> Camera::projection_jacobian(const Eigen::Vector3d& p) const {
    Eigen::Matrix<double, 2, 3> jc;  // d(ndc)/d(camera coords)
    if (mode == Projection::Orthographic) {
        jc << 1.0 / ortho_half_extent, 0, 0,
              0, 1.0 / ortho_half_extent, 0;
    } else {
        const Eigen::Vector3d c = to_camera(p);
        const double depth = -c.z();
        const double t = tan_half_fov();
        // u = c_x/(t*d), v = c_y/(t*d) with d = -c_z.
        const double inv_td = 1.0 / (t * depth);
        jc << inv_td, 0, c.x() * inv_td / depth,
              0, inv_td, c.y() * inv_td / depth;
    }
    return jc * rotation;
}

CameraRig build_rig(double azimuth_step_deg, const std::vector<double>& elevations_deg,
                    int resolution, Projection mode) {
    if (azimuth_step_deg <= 0.0 || std::abs(std::round(360.0 / azimuth_step_deg) * azimuth_step_deg - 360.0) > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "azimuth step must divide 360 degrees");
    }
    if (elevations_deg.empty()) {
        throw Error(ErrorCode::InvalidArgument, "rig needs at least one elevation");
    }
    if (resolution < 16) {
        throw Error(ErrorCode::InvalidArgument, "rig resolution must be at least 16");
    }
    const int azimuth_count = static_cast<int>(std::round(360.0 / azimuth_step_deg));

    CameraRig rig;
    rig.mode = mode;
    rig.resolution = resolution;
    const Eigen::Vector3d world_up(0, 1, 0);
    for (double elevation : elevations_deg) {
        for (int a = 0; a < azimuth_count; ++a) {
            const double az = a * azimuth_step_deg * kPi / 180.0;
            const double el = elevation * kPi / 180.0;
            Camera cam;
            cam.mode = mode;
            cam.resolution = resolution;
            cam.position = kRigRadius * Eigen::Vector3d(std::cos(el) * std::sin(az), std::sin(el),
                                                        std::cos(el) * std::cos(az));
            const Eigen::Vector3d fwd = (-cam.position).normalized();
            const Eigen::Vector3d right = fwd.cross(world_up).normalized();
            const Eigen::Vector3d up = right.cross(fwd);
            cam.rotation.row(0) = right.transpose();
            cam.rotation.row(1) = up.transpose();
            cam.rotation.row(2) = -fwd.transpose();
            rig.cameras.push_back(cam);
        }
    }
    return rig;
}

std::string rig_to_json(const CameraRig& rig) {
    nlohmann::json j;
    j["mode"] = projection_to_string(rig.mode);
    j["resolution"] = rig.resolution;
    j["cameras"] = nlohmann::json::array();
    for (const auto& cam : rig.cameras) {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = cam.rotation;
        m.topRightCorner<3, 1>() = -cam.rotation * cam.position;
        std::vector<double> flat;
        flat.reserve(16);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) flat.push_back(m(r, c));
        nlohmann::json cj;
        cj["world_to_cam"] = flat;
        cj["fov_or_extent"] =
            cam.mode == Projection::Perspective ? cam.fov_y_deg : cam.ortho_half_extent;
        j["cameras"].push_back(cj);
    }
    return j.dump(2);
}

void save_rig_json(const std::string& path, const CameraRig& rig) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write rig file: " + path);
    out << rig_to_json(rig) << '\n';
}

} // namespace semreg
