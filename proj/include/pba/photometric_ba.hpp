#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/parallel.hpp"
#include "pba/visibility.hpp"
#include "pba/window.hpp"

namespace pba {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

inline constexpr int kMaxPatchDim = 25;  // patch radius <= 2

using ResidualVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxPatchDim, 1>;
using PoseJacobian = Eigen::Matrix<double, Eigen::Dynamic, 6, 0, kMaxPatchDim, 6>;
using PointJacobian = Eigen::Matrix<double, Eigen::Dynamic, 3, 0, kMaxPatchDim, 3>;

struct SolverConfig {
  int patch_radius = 1;
  int max_iterations = 100;
  double function_tolerance = 1e-6;   // relative cost change
  double gradient_tolerance = 1e-6;   // max-norm of the gradient
  double parameter_tolerance = 1e-6;  // step norm relative to parameter norm
  double huber_delta = 0.1;
  double initial_damping = 1e-4;
  double damping_increase = 10.0;
  double damping_decrease = 0.1;
  double min_damping = 1e-12;
  double max_damping = 1e8;
  double min_depth = 1e-3;
  int threads = 1;

  void validate() const {
    if (patch_radius < 1 || patch_radius > 2) {
      throw std::invalid_argument("SolverConfig: patch_radius must be 1 or 2");
    }
    if (!(function_tolerance > 0 && gradient_tolerance > 0 && parameter_tolerance > 0)) {
      throw std::invalid_argument("SolverConfig: tolerances must be positive");
    }
    if (!(huber_delta > 0)) throw std::invalid_argument("SolverConfig: huber_delta must be > 0");
    if (max_iterations < 0) throw std::invalid_argument("SolverConfig: max_iterations < 0");
  }
};

/// Photometric residual of one point in one frame, stacked over the patch.
/// J_pose and J_point are derivatives of `residual` (so they carry the minus
/// sign of -grad(I) * du/dparam).
struct Observation {
  int point = -1;  // index into the solver's point list
  int frame = -1;  // index into the window's frames
  ResidualVector residual;
  PoseJacobian J_pose;
  PointJacobian J_point;
  double weight = 1.0;
};

/// IRLS weight of the Huber loss on the observation's residual norm.
inline double robust_weight(double residual_norm, double delta) {
  return residual_norm <= delta ? 1.0 : delta / residual_norm;
}

inline double huber_cost(double residual_norm, double delta) {
  return residual_norm <= delta ? 0.5 * residual_norm * residual_norm
                                : delta * (residual_norm - 0.5 * delta);
}

/// Residual phi(u) - I(u' + u) over the patch offsets, with u' the projection
/// of `position` through `pose`. Returns nullopt when the point is behind
/// the camera or any sample of the footprint leaves the image.
inline std::optional<Observation> evaluate_observation(const Point3& position, const Patch& ref_patch,
                                                       const Pose& pose, const GrayImage& img,
                                                       const GradientPair& grads,
                                                       const Intrinsics& K,
                                                       double min_depth = GeometryConfig{}.min_depth) {
  const int r = ref_patch.radius;
  const int side = 2 * r + 1;
  const int D = side * side;
  if (D > kMaxPatchDim || static_cast<int>(ref_patch.dim()) != D) {
    throw std::invalid_argument("evaluate_observation: unsupported patch size");
  }
  const auto pj = projection_jacobian(pose, K, position, min_depth);
  if (!pj) return std::nullopt;
  const Vec2& c = pj->uv;
  if (!in_sampling_domain(img, c.x() - r, c.y() - r) ||
      !in_sampling_domain(img, c.x() + r, c.y() + r)) {
    return std::nullopt;
  }
  Observation obs;
  obs.residual.resize(D);
  obs.J_pose.resize(D, 6);
  obs.J_point.resize(D, 3);
  int k = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx, ++k) {
      const double x = c.x() + dx;
      const double y = c.y() + dy;
      obs.residual(k) = ref_patch.values[static_cast<std::size_t>(k)] -
                        sample_bilinear_unchecked(img, x, y);
      const Eigen::RowVector2d g{sample_bilinear_unchecked(grads.gx, x, y),
                                 sample_bilinear_unchecked(grads.gy, x, y)};
      obs.J_pose.row(k) = -g * pj->d_pose;
      obs.J_point.row(k) = -g * pj->d_point;
    }
  }
  return obs;
}

inline std::optional<Observation> evaluate_observation(const ScenePoint& point, const Pose& pose,
                                                       const FrameData& frame,
                                                       const Intrinsics& K,
                                                       double min_depth = GeometryConfig{}.min_depth) {
  return evaluate_observation(point.position, point.ref_patch(), pose, frame.image, frame.grads, K,
                              min_depth);
}

struct Coupling {
  int camera;
  Mat63 block;
};

/// Block normal equations H dx = g with g = -J^T W r. Cameras and points
/// are indexed as in the observations; fixed cameras keep zero blocks.
struct NormalEquations {
  int num_cameras = 0;
  int num_points = 0;
  std::vector<bool> camera_fixed;
  std::vector<Mat6> H_cc;
  std::vector<Vec6> g_c;
  std::vector<Mat3> H_pp;
  std::vector<Vec3> g_p;
  /// Per point, coupling blocks H_cp sorted by camera index.
  std::vector<std::vector<Coupling>> H_cp;

  NormalEquations() = default;
  NormalEquations(int cameras, int points, std::vector<bool> fixed = {})
      : num_cameras(cameras),
        num_points(points),
        camera_fixed(fixed.empty() ? std::vector<bool>(static_cast<std::size_t>(cameras), false)
                                   : std::move(fixed)),
        H_cc(static_cast<std::size_t>(cameras), Mat6::Zero()),
        g_c(static_cast<std::size_t>(cameras), Vec6::Zero()),
        H_pp(static_cast<std::size_t>(points), Mat3::Zero()),
        g_p(static_cast<std::size_t>(points), Vec3::Zero()),
        H_cp(static_cast<std::size_t>(points)) {
    if (camera_fixed.size() != static_cast<std::size_t>(cameras)) {
      throw std::invalid_argument("NormalEquations: fixed mask size mismatch");
    }
  }

  Mat63* coupling(int camera, int point) {
    for (auto& c : H_cp[static_cast<std::size_t>(point)])
      if (c.camera == camera) return &c.block;
    return nullptr;
  }
  const Mat63* coupling(int camera, int point) const {
    return const_cast<NormalEquations*>(this)->coupling(camera, point);
  }

  Mat63& coupling_or_insert(int camera, int point) {
    auto& row = H_cp[static_cast<std::size_t>(point)];
    auto it = std::lower_bound(row.begin(), row.end(), camera,
                               [](const Coupling& c, int cam) { return c.camera < cam; });
    if (it == row.end() || it->camera != camera) it = row.insert(it, Coupling{camera, Mat63::Zero()});
    return it->block;
  }

  /// Dense column offsets of free cameras (-1 for fixed), followed by points.
  std::vector<int> camera_offsets() const {
    std::vector<int> off(static_cast<std::size_t>(num_cameras), -1);
    int o = 0;
    for (int c = 0; c < num_cameras; ++c)
      if (!camera_fixed[static_cast<std::size_t>(c)]) {
        off[static_cast<std::size_t>(c)] = o;
        o += 6;
      }
    return off;
  }
  int num_free_cameras() const {
    return static_cast<int>(std::count(camera_fixed.begin(), camera_fixed.end(), false));
  }
  int dense_size() const { return 6 * num_free_cameras() + 3 * num_points; }

  /// Full symmetric matrix ordered [free cameras | points].
  Eigen::MatrixXd dense_hessian() const {
    const int n = dense_size();
    const int pbase = 6 * num_free_cameras();
    const auto off = camera_offsets();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int c = 0; c < num_cameras; ++c) {
      const int o = off[static_cast<std::size_t>(c)];
      if (o >= 0) H.block<6, 6>(o, o) = H_cc[static_cast<std::size_t>(c)];
    }
    for (int p = 0; p < num_points; ++p) {
      const int po = pbase + 3 * p;
      H.block<3, 3>(po, po) = H_pp[static_cast<std::size_t>(p)];
      for (const auto& cp : H_cp[static_cast<std::size_t>(p)]) {
        const int o = off[static_cast<std::size_t>(cp.camera)];
        if (o < 0) continue;
        H.block<6, 3>(o, po) = cp.block;
        H.block<3, 6>(po, o) = cp.block.transpose();
      }
    }
    return H;
  }

  Eigen::VectorXd dense_gradient() const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dense_size());
    const int pbase = 6 * num_free_cameras();
    const auto off = camera_offsets();
    for (int c = 0; c < num_cameras; ++c) {
      const int o = off[static_cast<std::size_t>(c)];
      if (o >= 0) g.segment<6>(o) = g_c[static_cast<std::size_t>(c)];
    }
    for (int p = 0; p < num_points; ++p) g.segment<3>(pbase + 3 * p) = g_p[static_cast<std::size_t>(p)];
    return g;
  }

  double gradient_max_norm() const {
    double m = 0.0;
    for (int c = 0; c < num_cameras; ++c)
      if (!camera_fixed[static_cast<std::size_t>(c)])
        m = std::max(m, g_c[static_cast<std::size_t>(c)].cwiseAbs().maxCoeff());
    for (const auto& g : g_p) m = std::max(m, g.cwiseAbs().maxCoeff());
    return m;
  }
};

/// Accumulates w J^T J and -w J^T r in observation order. Fixed cameras get
/// neither a pose block nor a coupling block; their observations still
/// constrain the point.
inline NormalEquations build_normal_equations(std::span<const Observation> observations,
                                              int num_cameras, int num_points,
                                              const std::vector<bool>& fixed_cameras = {}) {
  NormalEquations ne(num_cameras, num_points, fixed_cameras);
  for (const Observation& o : observations) {
    if (o.frame < 0 || o.frame >= num_cameras || o.point < 0 || o.point >= num_points) {
      throw std::out_of_range("build_normal_equations: observation index out of range");
    }
    const auto p = static_cast<std::size_t>(o.point);
    const auto c = static_cast<std::size_t>(o.frame);
    const double w = o.weight;
    ne.H_pp[p].noalias() += w * o.J_point.transpose() * o.J_point;
    ne.g_p[p].noalias() -= w * o.J_point.transpose() * o.residual;
    if (ne.camera_fixed[c]) continue;
    ne.H_cc[c].noalias() += w * o.J_pose.transpose() * o.J_pose;
    ne.g_c[c].noalias() -= w * o.J_pose.transpose() * o.residual;
    ne.coupling_or_insert(o.frame, o.point).noalias() += w * o.J_pose.transpose() * o.J_point;
  }
  return ne;
}

struct SchurSolution {
  std::vector<Vec6> d_pose;   // zero for fixed cameras
  std::vector<Vec3> d_point;  // zero for skipped points
  std::vector<bool> point_skipped;
  std::size_t skipped_points = 0;

  double squared_norm() const {
    double s = 0.0;
    for (const auto& d : d_pose) s += d.squaredNorm();
    for (const auto& d : d_point) s += d.squaredNorm();
    return s;
  }
};

/// Solves (H + lambda diag(H)) dx = g by eliminating the point blocks and
/// factoring the reduced camera system densely. Points whose damped block is
/// not positive definite are left out and get a zero update.
inline SchurSolution schur_solve(const NormalEquations& ne, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("schur_solve: lambda must be > 0");
  const auto off = ne.camera_offsets();
  const int nc = 6 * ne.num_free_cameras();

  SchurSolution sol;
  sol.d_pose.assign(static_cast<std::size_t>(ne.num_cameras), Vec6::Zero());
  sol.d_point.assign(static_cast<std::size_t>(ne.num_points), Vec3::Zero());
  sol.point_skipped.assign(static_cast<std::size_t>(ne.num_points), false);

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nc, nc);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nc);
  for (int c = 0; c < ne.num_cameras; ++c) {
    const int o = off[static_cast<std::size_t>(c)];
    if (o < 0) continue;
    Mat6 Hd = ne.H_cc[static_cast<std::size_t>(c)];
    Hd.diagonal() *= (1.0 + lambda);
    S.block<6, 6>(o, o) = Hd;
    b.segment<6>(o) = ne.g_c[static_cast<std::size_t>(c)];
  }

  std::vector<Mat3> Hpp_inv(static_cast<std::size_t>(ne.num_points), Mat3::Zero());
  for (int p = 0; p < ne.num_points; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    Mat3 Hd = ne.H_pp[pi];
    Hd.diagonal() *= (1.0 + lambda);
    Eigen::LLT<Mat3> llt(Hd);
    if (llt.info() != Eigen::Success || !(Hd.diagonal().minCoeff() > 0.0)) {
      sol.point_skipped[pi] = true;
      ++sol.skipped_points;
      continue;
    }
    Hpp_inv[pi] = llt.solve(Mat3::Identity());
    const auto& row = ne.H_cp[pi];
    for (const auto& a : row) {
      const int oa = off[static_cast<std::size_t>(a.camera)];
      if (oa < 0) continue;
      const Mat63 W = a.block * Hpp_inv[pi];
      b.segment<6>(oa).noalias() -= W * ne.g_p[pi];
      for (const auto& bb : row) {
        const int ob = off[static_cast<std::size_t>(bb.camera)];
        if (ob < 0) continue;
        S.block<6, 6>(oa, ob).noalias() -= W * bb.block.transpose();
      }
    }
  }

  Eigen::VectorXd dc = Eigen::VectorXd::Zero(nc);
  if (nc > 0) {
    // Cameras without any constraint have an all-zero row; pin them.
    for (int i = 0; i < nc; ++i) {
      if (S(i, i) == 0.0 && S.row(i).isZero(0.0)) {
        S(i, i) = 1.0;
        b(i) = 0.0;
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    dc = ldlt.solve(b);
    if (ldlt.info() != Eigen::Success || !dc.allFinite()) {
      throw std::runtime_error("schur_solve: reduced camera system is singular");
    }
  }
  for (int c = 0; c < ne.num_cameras; ++c) {
    const int o = off[static_cast<std::size_t>(c)];
    if (o >= 0) sol.d_pose[static_cast<std::size_t>(c)] = dc.segment<6>(o);
  }
  for (int p = 0; p < ne.num_points; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    if (sol.point_skipped[pi]) continue;
    Vec3 rhs = ne.g_p[pi];
    for (const auto& a : ne.H_cp[pi]) {
      const int oa = off[static_cast<std::size_t>(a.camera)];
      if (oa >= 0) rhs.noalias() -= a.block.transpose() * dc.segment<6>(oa);
    }
    sol.d_point[pi] = Hpp_inv[pi] * rhs;
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt over a sliding window
// ---------------------------------------------------------------------------

enum class SolverStatus {
  kConverged,        // a tolerance was met
  kMaxIterations,
  kDampingLimit,     // damping exceeded max_damping without an acceptable step
  kNoObservations,   // nothing to optimize
};

inline const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::kConverged: return "converged";
    case SolverStatus::kMaxIterations: return "max_iterations";
    case SolverStatus::kDampingLimit: return "damping_limit";
    case SolverStatus::kNoObservations: return "no_observations";
  }
  return "unknown";
}

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;  // robust cost after this iteration
  double damping = 0.0;
  double step_norm = 0.0;
  std::size_t observations = 0;
  int patch_dim = 0;
  bool accepted = false;
};

struct WindowReport {
  SolverStatus status = SolverStatus::kNoObservations;
  std::vector<IterationRecord> log;  // entry 0 is the initial state
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::size_t active_points = 0;
  std::size_t observation_slots = 0;

  std::vector<double> cost_history() const {
    std::vector<double> h;
    h.reserve(log.size());
    for (const auto& r : log) h.push_back(r.cost);
    return h;
  }
};

/// The flattened problem the LM loop works on: which (point, frame) pairs
/// contribute, and which window points are active.
struct WindowProblem {
  std::vector<int> point_index;  // solver point -> window.points index
  struct Slot {
    int point;  // solver point index
    int frame;  // window frame index
  };
  std::vector<Slot> slots;
};

/// Collects points with at least one visibility entry inside the window and
/// their in-window observation slots, in a fixed order.
inline WindowProblem collect_problem(const SlidingWindow& window) {
  WindowProblem prob;
  for (std::size_t j = 0; j < window.points.size(); ++j) {
    const ScenePoint& pt = window.points[j];
    std::vector<int> frames;
    for (FrameId f : pt.visibility()) {
      const int fi = window.frame_index(f);
      if (fi >= 0) frames.push_back(fi);
    }
    if (frames.empty()) continue;
    std::sort(frames.begin(), frames.end());
    const int sp = static_cast<int>(prob.point_index.size());
    prob.point_index.push_back(static_cast<int>(j));
    for (int fi : frames) prob.slots.push_back({sp, fi});
  }
  return prob;
}

namespace detail {

struct Evaluation {
  std::vector<Observation> observations;  // valid ones, in slot order
  std::vector<double> slot_cost;          // NaN where the slot is invalid
  double cost = 0.0;
};

/// Costs of both states summed over the slots valid in both.
inline std::pair<double, double> shared_cost(const Evaluation& a, const Evaluation& b) {
  double ca = 0.0, cb = 0.0;
  for (std::size_t i = 0; i < a.slot_cost.size(); ++i) {
    if (std::isnan(a.slot_cost[i]) || std::isnan(b.slot_cost[i])) continue;
    ca += a.slot_cost[i];
    cb += b.slot_cost[i];
  }
  return {ca, cb};
}

inline Evaluation evaluate_all(const WindowProblem& prob, const std::vector<Pose>& poses,
                               const std::vector<Point3>& positions,
                               const SlidingWindow& window, const Intrinsics& K,
                               const SolverConfig& cfg) {
  std::vector<std::optional<Observation>> slots(prob.slots.size());
  parallel_for(prob.slots.size(), cfg.threads, [&](std::size_t i) {
    const auto& s = prob.slots[i];
    const ScenePoint& pt = window.points[static_cast<std::size_t>(prob.point_index[static_cast<std::size_t>(s.point)])];
    const FrameData& fd = *window.frames[static_cast<std::size_t>(s.frame)].data;
    auto o = evaluate_observation(positions[static_cast<std::size_t>(s.point)], pt.ref_patch(),
                                  poses[static_cast<std::size_t>(s.frame)], fd.image, fd.grads, K,
                                  cfg.min_depth);
    if (o) {
      o->point = s.point;
      o->frame = s.frame;
    }
    slots[i] = std::move(o);
  });
  Evaluation ev;
  ev.observations.reserve(slots.size());
  ev.slot_cost.assign(slots.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& o = slots[i];
    if (!o) continue;
    const double rn = o->residual.norm();
    o->weight = robust_weight(rn, cfg.huber_delta);
    ev.slot_cost[i] = huber_cost(rn, cfg.huber_delta);
    ev.cost += ev.slot_cost[i];
    ev.observations.push_back(std::move(*o));
  }
  return ev;
}

}  // namespace detail

/// Total robust cost of the window at its current state.
inline double window_cost(const SlidingWindow& window, const Intrinsics& K,
                          const SolverConfig& cfg = {}) {
  const WindowProblem prob = collect_problem(window);
  std::vector<Pose> poses;
  for (const auto& f : window.frames) poses.push_back(f.pose);
  std::vector<Point3> pos;
  for (int j : prob.point_index) pos.push_back(window.points[static_cast<std::size_t>(j)].position);
  return detail::evaluate_all(prob, poses, pos, window, K, cfg).cost;
}

/// Refines all poses but the first and every point observed inside the
/// window. Pose updates are left-multiplied, T <- exp(d) T. A step is
/// accepted only if it lowers the robust cost both in total and over the
/// observations valid before and after the step, so losing observations
/// cannot pass for progress.
inline WindowReport optimize_window(SlidingWindow& window, const Intrinsics& K,
                                    const SolverConfig& cfg = {}) {
  cfg.validate();
  if (window.frames.size() < 2) {
    throw std::invalid_argument("optimize_window: window needs at least 2 frames");
  }
  for (std::size_t i = 1; i < window.frames.size(); ++i) {
    if (window.frames[i].id <= window.frames[i - 1].id) {
      throw std::invalid_argument("optimize_window: frame ids must be strictly increasing");
    }
  }
  const WindowProblem prob = collect_problem(window);
  for (int j : prob.point_index) {
    if (window.points[static_cast<std::size_t>(j)].ref_patch().radius != cfg.patch_radius) {
      throw std::invalid_argument("optimize_window: point patch radius differs from config");
    }
  }
  const int num_cameras = static_cast<int>(window.frames.size());
  const int num_points = static_cast<int>(prob.point_index.size());
  std::vector<bool> fixed(static_cast<std::size_t>(num_cameras), false);
  fixed[0] = true;

  std::vector<Pose> poses;
  poses.reserve(window.frames.size());
  for (const auto& f : window.frames) poses.push_back(f.pose);
  std::vector<Point3> positions;
  positions.reserve(prob.point_index.size());
  for (int j : prob.point_index) positions.push_back(window.points[static_cast<std::size_t>(j)].position);

  WindowReport rep;
  rep.active_points = prob.point_index.size();
  rep.observation_slots = prob.slots.size();
  const int D = (2 * cfg.patch_radius + 1) * (2 * cfg.patch_radius + 1);

  detail::Evaluation cur = detail::evaluate_all(prob, poses, positions, window, K, cfg);
  rep.initial_cost = rep.final_cost = cur.cost;
  rep.log.push_back({0, cur.cost, cfg.initial_damping, 0.0, cur.observations.size(), D, true});
  if (cur.observations.empty()) {
    rep.status = SolverStatus::kNoObservations;
    return rep;
  }

  double lambda = cfg.initial_damping;
  rep.status = SolverStatus::kMaxIterations;
  bool rebuild = true;
  NormalEquations ne;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    if (rebuild) {
      ne = build_normal_equations(cur.observations, num_cameras, num_points, fixed);
      rebuild = false;
      if (ne.gradient_max_norm() <= cfg.gradient_tolerance) {
        rep.status = SolverStatus::kConverged;
        break;
      }
    }
    const SchurSolution sol = schur_solve(ne, lambda);
    const double step_norm = std::sqrt(sol.squared_norm());
    double x_norm_sq = 0.0;
    for (const auto& p : positions) x_norm_sq += p.squaredNorm();
    for (int c = 1; c < num_cameras; ++c) x_norm_sq += poses[static_cast<std::size_t>(c)].t.squaredNorm();
    if (step_norm <= cfg.parameter_tolerance * (std::sqrt(x_norm_sq) + cfg.parameter_tolerance)) {
      rep.status = SolverStatus::kConverged;
      break;
    }

    std::vector<Pose> trial_poses = poses;
    for (int c = 1; c < num_cameras; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      trial_poses[ci] = se3_exp(Twist(sol.d_pose[ci])) * poses[ci];
    }
    std::vector<Point3> trial_positions = positions;
    for (std::size_t p = 0; p < trial_positions.size(); ++p) trial_positions[p] += sol.d_point[p];

    detail::Evaluation trial = detail::evaluate_all(prob, trial_poses, trial_positions, window, K, cfg);
    rep.iterations = it;
    const auto [shared_cur, shared_trial] = detail::shared_cost(cur, trial);
    if (!trial.observations.empty() && trial.cost < cur.cost && shared_trial < shared_cur) {
      if (!(trial.cost < rep.log.back().cost)) {
        throw std::logic_error("optimize_window: accepted step did not decrease the cost");
      }
      const double rel = (cur.cost - trial.cost) / std::max(cur.cost, 1e-300);
      poses = std::move(trial_poses);
      positions = std::move(trial_positions);
      cur = std::move(trial);
      rebuild = true;
      lambda = std::max(lambda * cfg.damping_decrease, cfg.min_damping);
      rep.log.push_back({it, cur.cost, lambda, step_norm, cur.observations.size(), D, true});
      if (rel <= cfg.function_tolerance) {
        rep.status = SolverStatus::kConverged;
        break;
      }
    } else {
      lambda *= cfg.damping_increase;
      rep.log.push_back({it, cur.cost, lambda, step_norm, cur.observations.size(), D, false});
      if (lambda > cfg.max_damping) {
        rep.status = SolverStatus::kDampingLimit;
        break;
      }
    }
  }

  for (int c = 1; c < num_cameras; ++c) window.frames[static_cast<std::size_t>(c)].pose = poses[static_cast<std::size_t>(c)];
  for (std::size_t p = 0; p < positions.size(); ++p) {
    window.points[static_cast<std::size_t>(prob.point_index[p])].position = positions[p];
  }
  rep.final_cost = cur.cost;
  return rep;
}

}  // namespace pba
