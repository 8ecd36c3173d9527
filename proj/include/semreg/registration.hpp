#pragma once

#include "semreg/losses.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace semreg {

struct RigConfig {
    double azimuth_step_deg = 60.0;
    std::vector<double> elevations_deg = {-30.0, -10.0, 10.0, 30.0, 50.0};
    Projection mode = Projection::Perspective;
};

struct RegistrationConfig {
    int iterations = 5000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    LossWeights weights;
    RigConfig rig;
    int resolution = 512;
    std::uint64_t seed = 0;
    int log_interval = 50;
    int checkpoint_interval = 0;  // 0 disables periodic checkpoints

    void validate() const;
};

// Adam state over {face matrices, translation}. iteration counts completed
// steps; the moment buffers shape-match the field.
struct RegistrationState {
    JacobianField field;
    std::vector<Eigen::Matrix3d> moment1;
    std::vector<Eigen::Matrix3d> moment2;
    Eigen::Vector3d moment1_t = Eigen::Vector3d::Zero();
    Eigen::Vector3d moment2_t = Eigen::Vector3d::Zero();
    int iteration = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    JacobianField best_field;
};

RegistrationState make_initial_state(const TriMesh& source);

void save_checkpoint(const std::string& path, const RegistrationState& state);
RegistrationState load_checkpoint(const std::string& path);

struct IterationStats {
    int iteration = 0;
    double flow = 0, chamfer = 0, normal = 0, identity = 0, shear = 0, total = 0, grad_norm = 0;
};

void write_loss_csv(const std::string& path, const std::vector<IterationStats>& history);

struct RegistrationResult {
    Eigen::MatrixX3d deformed_vertices;
    JacobianField field;
    std::vector<IterationStats> history;  // rows for the iterations this run executed
    bool diverged = false;
};

// Precomputed per-registration machinery: frames, factorized Poisson system,
// rig, source rasters, and target normal maps.
class RegistrationContext {
public:
    RegistrationContext(const TriMesh& source, const TriMesh& target,
                        const RegistrationConfig& config, ThreadPool& pool);

    Scene scene(const std::vector<FlowMap>& semantic_flows) const;
    const CameraRig& rig() const { return rig_; }
    const TriMesh& source() const { return source_; }
    const TriMesh& target() const { return target_; }
    const TangentFrames& frames() const { return frames_; }
    const PoissonSystem& poisson() const { return poisson_; }

private:
    const TriMesh& source_;
    const TriMesh& target_;
    TangentFrames frames_;
    PoissonSystem poisson_;
    CameraRig rig_;
    std::vector<RasterCache> source_rasters_;
    std::vector<NormalImage> target_normals_;
};

// Runs `config.iterations` Adam steps minimizing the total loss. Resumes from
// `state` when its iteration counter is nonzero. Deterministic for a given
// config and inputs, independent of the pool's thread count. If the loss goes
// non-finite the run aborts with the last finite state.
RegistrationResult run_registration(
    const RegistrationContext& context, const std::vector<FlowMap>& semantic_flows,
    const RegistrationConfig& config, ThreadPool& pool, RegistrationState* state = nullptr,
    const std::function<void(const RegistrationState&)>& checkpoint_hook = nullptr);

struct GradCheckReport {
    double max_rel_flow = 0, max_rel_chamfer = 0, max_rel_normal = 0;
    double max_rel_identity = 0, max_rel_shear = 0, max_rel_total = 0;

    double worst() const;
};

// Compares the analytic gradient of each weighted term (and of the total)
// against central finite differences with the non-smooth switches frozen.
// Probes n_probes random face-matrix entries plus the three translation
// components.
GradCheckReport gradcheck(const Scene& scene, const JacobianField& base, const LossWeights& weights,
                          int n_probes, double step, std::uint64_t seed, ThreadPool& pool);

} // namespace semreg
