#include "semreg/registration.hpp"

#include "semreg/error.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace semreg {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'R', 'E', 'G'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_bytes(std::ofstream& out, const void* data, size_t size) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void read_bytes(std::ifstream& in, void* data, size_t size) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<size_t>(in.gcount()) != size) {
        throw Error(ErrorCode::TruncatedFile, "checkpoint truncated");
    }
}

void write_field(std::ofstream& out, const JacobianField& field) {
    for (const auto& m : field.face_matrices) write_bytes(out, m.data(), sizeof(double) * 9);
    write_bytes(out, field.translation.data(), sizeof(double) * 3);
}

void read_field(std::ifstream& in, JacobianField& field, std::uint64_t faces) {
    field.face_matrices.resize(faces);
    for (auto& m : field.face_matrices) read_bytes(in, m.data(), sizeof(double) * 9);
    read_bytes(in, field.translation.data(), sizeof(double) * 3);
}

} // namespace

void RegistrationConfig::validate() const {
    if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
    weights.validate();
}

RegistrationState make_initial_state(const TriMesh& source) {
    RegistrationState state;
    state.field = init_identity(source);
    state.moment1.assign(state.field.face_matrices.size(), Eigen::Matrix3d::Zero());
    state.moment2.assign(state.field.face_matrices.size(), Eigen::Matrix3d::Zero());
    state.best_field = state.field;
    return state;
}

void save_checkpoint(const std::string& path, const RegistrationState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint: " + path);
    write_bytes(out, kCheckpointMagic, 4);
    write_bytes(out, &kCheckpointVersion, sizeof(kCheckpointVersion));
    const std::uint64_t faces = state.field.face_matrices.size();
    write_bytes(out, &faces, sizeof(faces));
    const std::uint64_t iter = static_cast<std::uint64_t>(state.iteration);
    write_bytes(out, &iter, sizeof(iter));
    write_field(out, state.field);
    for (const auto& m : state.moment1) write_bytes(out, m.data(), sizeof(double) * 9);
    for (const auto& m : state.moment2) write_bytes(out, m.data(), sizeof(double) * 9);
    write_bytes(out, state.moment1_t.data(), sizeof(double) * 3);
    write_bytes(out, state.moment2_t.data(), sizeof(double) * 3);
    write_bytes(out, &state.best_loss, sizeof(double));
    write_field(out, state.best_field);
    if (!out) throw Error(ErrorCode::IoError, "checkpoint write failed: " + path);
}

RegistrationState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint: " + path);
    char magic[4];
    read_bytes(in, magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw Error(ErrorCode::BadMagic, "not a checkpoint file: " + path);
    }
    std::uint32_t version = 0;
    read_bytes(in, &version, sizeof(version));
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::VersionMismatch, "unsupported checkpoint version");
    }
    std::uint64_t faces = 0, iter = 0;
    read_bytes(in, &faces, sizeof(faces));
    read_bytes(in, &iter, sizeof(iter));
    RegistrationState state;
    state.iteration = static_cast<int>(iter);
    read_field(in, state.field, faces);
    state.moment1.resize(faces);
    state.moment2.resize(faces);
    for (auto& m : state.moment1) read_bytes(in, m.data(), sizeof(double) * 9);
    for (auto& m : state.moment2) read_bytes(in, m.data(), sizeof(double) * 9);
    read_bytes(in, state.moment1_t.data(), sizeof(double) * 3);
    read_bytes(in, state.moment2_t.data(), sizeof(double) * 3);
    read_bytes(in, &state.best_loss, sizeof(double));
    read_field(in, state.best_field, faces);
    return state;
}

void write_loss_csv(const std::string& path, const std::vector<IterationStats>& history) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write loss CSV: " + path);
    out << "iteration,flow,chamfer,normal,identity,shear,total,grad_norm\n";
    out.precision(17);
    for (const auto& row : history) {
        out << row.iteration << ',' << row.flow << ',' << row.chamfer << ',' << row.normal << ','
            << row.identity << ',' << row.shear << ',' << row.total << ',' << row.grad_norm << '\n';
    }
}

RegistrationContext::RegistrationContext(const TriMesh& source, const TriMesh& target,
                                         const RegistrationConfig& config, ThreadPool& pool)
    : source_(source),
      target_(target),
      frames_(build_tangent_frames(source)),
      poisson_(source, frames_, 0),
      rig_(build_rig(config.rig.azimuth_step_deg, config.rig.elevations_deg, config.resolution,
                     config.rig.mode)) {
    const int views = rig_.view_count();
    source_rasters_.resize(static_cast<size_t>(views));
    target_normals_.resize(static_cast<size_t>(views));
    pool.parallel_for(0, views, [&](std::int64_t v) {
        source_rasters_[static_cast<size_t>(v)] =
            rasterize_source(source_, rig_.cameras[static_cast<size_t>(v)]);
        target_normals_[static_cast<size_t>(v)] = render_normals(
            target_.vertices, target_.faces, rig_.cameras[static_cast<size_t>(v)]);
    });
}

Scene RegistrationContext::scene(const std::vector<FlowMap>& semantic_flows) const {
    Scene s;
    s.source = &source_;
    s.target = &target_;
    s.frames = &frames_;
    s.poisson = &poisson_;
    s.rig = &rig_;
    s.source_rasters = &source_rasters_;
    s.semantic_flows = &semantic_flows;
    s.target_normals = &target_normals_;
    return s;
}

RegistrationResult run_registration(
    const RegistrationContext& context, const std::vector<FlowMap>& semantic_flows,
    const RegistrationConfig& config, ThreadPool& pool, RegistrationState* state,
    const std::function<void(const RegistrationState&)>& checkpoint_hook) {
    config.validate();
    if (static_cast<int>(semantic_flows.size()) != context.rig().view_count()) {
        throw Error(ErrorCode::DimensionMismatch, "semantic flow count does not match the rig");
    }
    for (const auto& flow : semantic_flows) {
        if (flow.width != context.rig().resolution || flow.height != context.rig().resolution) {
            throw Error(ErrorCode::ResolutionMismatch, "semantic flow resolution does not match the rig");
        }
    }

    RegistrationState local;
    if (!state) {
        local = make_initial_state(context.source());
        state = &local;
    } else if (state->iteration == 0 && state->field.face_matrices.empty()) {
        *state = make_initial_state(context.source());
    }
    if (state->field.size() != context.source().num_faces()) {
        throw Error(ErrorCode::DimensionMismatch, "state does not match the source mesh");
    }

    const Scene scene = context.scene(semantic_flows);
    const Eigen::Index faces = context.source().num_faces();

    RegistrationResult result;
    result.history.reserve(static_cast<size_t>(config.iterations - state->iteration));
    RegistrationState last_finite = *state;

    for (int iter = state->iteration; iter < config.iterations; ++iter) {
        TotalLossOptions options;
        options.iteration = iter;
        options.total_iterations = config.iterations;
        LossReport report;
        bool finite = true;
        try {
            report = total_loss(scene, state->field, config.weights, options, pool);
            finite = report.finite() && std::isfinite(report.grad_norm());
        } catch (const Error& err) {
            if (err.code() != ErrorCode::NonFiniteValue) throw;
            finite = false;
        }
        if (!finite) {
            *state = last_finite;
            result.diverged = true;
            break;
        }
        last_finite = *state;

        IterationStats row;
        row.iteration = iter;
        row.flow = report.flow;
        row.chamfer = report.chamfer;
        row.normal = report.normal;
        row.identity = report.identity;
        row.shear = report.shear;
        row.total = report.total;
        row.grad_norm = report.grad_norm();
        result.history.push_back(row);

        if (report.total < state->best_loss) {
            state->best_loss = report.total;
            state->best_field = state->field;
        }

        // Adam update; step count is 1-based.
        const int step = iter + 1;
        const double bc1 = 1.0 - std::pow(config.beta1, step);
        const double bc2 = 1.0 - std::pow(config.beta2, step);
        const double lr = config.learning_rate;
        pool.parallel_for(0, faces, [&](std::int64_t i) {
            const size_t s = static_cast<size_t>(i);
            const Eigen::Matrix3d& g = report.grad_face_matrices[s];
            state->moment1[s] = config.beta1 * state->moment1[s] + (1.0 - config.beta1) * g;
            state->moment2[s] =
                config.beta2 * state->moment2[s] + (1.0 - config.beta2) * g.cwiseProduct(g);
            const Eigen::Matrix3d mhat = state->moment1[s] / bc1;
            const Eigen::Matrix3d vhat = state->moment2[s] / bc2;
            state->field.face_matrices[s] -=
                lr * (mhat.array() / (vhat.array().sqrt() + config.adam_eps)).matrix();
        });
        {
            const Eigen::Vector3d& g = report.grad_translation;
            state->moment1_t = config.beta1 * state->moment1_t + (1.0 - config.beta1) * g;
            state->moment2_t =
                config.beta2 * state->moment2_t + (1.0 - config.beta2) * g.cwiseProduct(g);
            const Eigen::Vector3d mhat = state->moment1_t / bc1;
            const Eigen::Vector3d vhat = state->moment2_t / bc2;
            state->field.translation -=
                lr * (mhat.array() / (vhat.array().sqrt() + config.adam_eps)).matrix();
        }
        state->iteration = iter + 1;

        if (checkpoint_hook && config.checkpoint_interval > 0 &&
            state->iteration % config.checkpoint_interval == 0) {
            checkpoint_hook(*state);
        }
    }

    result.field = state->field;
    result.deformed_vertices = deform_vertices(context.poisson(), context.frames(), state->field);
    return result;
}

double GradCheckReport::worst() const {
    return std::max({max_rel_flow, max_rel_chamfer, max_rel_normal, max_rel_identity, max_rel_shear,
                     max_rel_total});
}

namespace {

struct Probe {
    int face = -1;  // -1 means translation
    int row = 0;
    int col = 0;
};

double probe_value(const JacobianField& field, const Probe& p) {
    if (p.face < 0) return field.translation[p.col];
    return field.face_matrices[static_cast<size_t>(p.face)](p.row, p.col);
}

void set_probe(JacobianField& field, const Probe& p, double value) {
    if (p.face < 0) {
        field.translation[p.col] = value;
    } else {
        field.face_matrices[static_cast<size_t>(p.face)](p.row, p.col) = value;
    }
}

double rel_error(double analytic, double fd) {
    const double diff = std::abs(analytic - fd);
    if (diff == 0.0) return 0.0;
    return diff / std::max(std::abs(analytic) + std::abs(fd), 1e-8);
}

} // namespace

GradCheckReport gradcheck(const Scene& scene, const JacobianField& base, const LossWeights& weights,
                          int n_probes, double step, std::uint64_t seed, ThreadPool& pool) {
    // Per-term weight configurations: only the probed term active, at its
    // configured weight, so a zero-weight config reports exactly zero error.
    LossWeights zero = weights;
    zero.flow = zero.chamfer = zero.normal = zero.shear = 0.0;
    zero.identity_start = zero.identity_end = 0.0;

    struct TermSpec {
        const char* name;
        LossWeights weights;
        double GradCheckReport::* slot;
    };
    std::vector<TermSpec> terms;
    {
        LossWeights w = zero;
        w.flow = weights.flow;
        terms.push_back({"flow", w, &GradCheckReport::max_rel_flow});
        w = zero;
        w.chamfer = weights.chamfer;
        terms.push_back({"chamfer", w, &GradCheckReport::max_rel_chamfer});
        w = zero;
        w.normal = weights.normal;
        terms.push_back({"normal", w, &GradCheckReport::max_rel_normal});
        w = zero;
        w.identity_start = w.identity_end = weights.identity_start;
        terms.push_back({"identity", w, &GradCheckReport::max_rel_identity});
        w = zero;
        w.shear = weights.shear;
        terms.push_back({"shear", w, &GradCheckReport::max_rel_shear});
        terms.push_back({"total", weights, &GradCheckReport::max_rel_total});
    }

    std::mt19937_64 rng(seed);
    std::vector<Probe> probes;
    const Eigen::Index faces = base.size();
    std::uniform_int_distribution<int> face_dist(0, static_cast<int>(faces) - 1);
    std::uniform_int_distribution<int> idx_dist(0, 2);
    for (int i = 0; i < n_probes; ++i) {
        probes.push_back({face_dist(rng), idx_dist(rng), idx_dist(rng)});
    }
    for (int c = 0; c < 3; ++c) probes.push_back({-1, 0, c});

    // Freeze the switches once at the base point; every evaluation below
    // shares them so the objective is smooth across the probe interval.
    FrozenEval frozen;
    {
        TotalLossOptions capture_opts;
        capture_opts.with_gradients = false;
        capture_opts.capture = &frozen;
        total_loss(scene, base, weights, capture_opts, pool);
    }

    GradCheckReport report;
    for (const auto& term : terms) {
        TotalLossOptions opts;
        opts.frozen = &frozen;
        const LossReport analytic = total_loss(scene, base, term.weights, opts, pool);

        double max_rel = 0.0;
        JacobianField probe_field = base;
        for (const auto& probe : probes) {
            const double v0 = probe_value(probe_field, probe);
            TotalLossOptions fwd_opts;
            fwd_opts.frozen = &frozen;
            fwd_opts.with_gradients = false;

            set_probe(probe_field, probe, v0 + step);
            const double up = total_loss(scene, probe_field, term.weights, fwd_opts, pool).total;
            set_probe(probe_field, probe, v0 - step);
            const double down = total_loss(scene, probe_field, term.weights, fwd_opts, pool).total;
            set_probe(probe_field, probe, v0);

            const double fd = (up - down) / (2.0 * step);
            const double a = probe.face < 0
                                 ? analytic.grad_translation[probe.col]
                                 : analytic.grad_face_matrices[static_cast<size_t>(probe.face)](
                                       probe.row, probe.col);
            max_rel = std::max(max_rel, rel_error(a, fd));
        }
        report.*(term.slot) = max_rel;
    }
    return report;
}

} // namespace semreg
