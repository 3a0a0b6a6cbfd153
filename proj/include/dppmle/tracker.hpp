#pragma once

// Newton corrector and adaptive predictor-corrector path tracker for the
// critical system along straight segments in parameter space.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dppmle/errors.hpp"
#include "dppmle/model.hpp"
#include "dppmle/system.hpp"

namespace dppmle {

struct TrackerConfig {
  double step_init = 0.1;
  double step_min = 1e-7;
  double step_max = 0.25;
  double newton_tol = 1e-11;   // scaled residual target for refinement
  int max_corrector_iters = 3;
  int max_steps = 10000;
  double dedup_tol = 1e-6;
  double reality_tol = 1e-8;
  // Step acceptance: the first corrector update, measured componentwise
  // relative to the point, must be below predictor_tol, and the corrector
  // must reach corrector_tol within max_corrector_iters.
  double predictor_tol = 1e-3;
  double corrector_tol = 1e-9;
  int max_refine_iters = 50;

  void validate() const {
    if (!(step_init > 0 && step_min > 0 && step_max > 0 && newton_tol > 0 && dedup_tol > 0 && reality_tol > 0 &&
          predictor_tol > 0 && corrector_tol > 0))
      throw std::invalid_argument("TrackerConfig: tolerances and steps must be positive");
    if (!(step_min < step_init)) throw std::invalid_argument("TrackerConfig: step_min must be below step_init");
    if (max_corrector_iters < 1 || max_steps < 1 || max_refine_iters < 1)
      throw std::invalid_argument("TrackerConfig: iteration limits must be positive");
  }
};

enum class Status { success, singular_jacobian, diverged, path_failure, pole_hit };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::success: return "success";
    case Status::singular_jacobian: return "singular_jacobian";
    case Status::diverged: return "diverged";
    case Status::path_failure: return "path_failure";
    case Status::pole_hit: return "pole_hit";
  }
  return "unknown";
}

enum class HessianClass { max, min, saddle, unknown };

inline std::string to_string(HessianClass h) {
  switch (h) {
    case HessianClass::max: return "max";
    case HessianClass::min: return "min";
    case HessianClass::saddle: return "saddle";
    case HessianClass::unknown: return "unknown";
  }
  return "unknown";
}

/// One refined critical point.
struct Solution {
  CVec point;
  double residual = std::numeric_limits<double>::infinity();
  bool is_real = false;
  double loglik = std::numeric_limits<double>::quiet_NaN();  // real solutions only
  HessianClass hessian_class = HessianClass::unknown;
};

struct RefineResult {
  Status status = Status::diverged;
  CVec point;
  double residual = std::numeric_limits<double>::infinity();
  int iterations = 0;

  bool ok() const { return status == Status::success; }
};

struct TrackResult {
  Status status = Status::path_failure;
  CVec point;
  double residual = std::numeric_limits<double>::infinity();
  int steps = 0;
  int rejected = 0;

  bool ok() const { return status == Status::success; }
};

namespace detail {

/// max_k |v_k| / (|z_k| + floor): componentwise relative size of an update.
inline double weighted_norm(const CVec& v, const CVec& z) {
  double zmax = 0;
  for (const auto& c : z) zmax = std::max(zmax, std::norm(c));
  const double floor = 1e-6 * (1.0 + std::sqrt(zmax));
  double r = 0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double d = std::sqrt(std::norm(z[k])) + floor;
    r = std::max(r, std::norm(v[k]) / (d * d));
  }
  return std::sqrt(r);
}

/// Cheap singularity test on a finished LU: smallest over largest pivot.
inline bool well_conditioned(const Eigen::PartialPivLU<CMat>& lu, double ratio) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (Eigen::Index k = 0; k < lu.matrixLU().rows(); ++k) {
    const double p = std::norm(lu.matrixLU()(k, k));
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  return lo > ratio * ratio * hi;
}

inline bool finite(const CVec& v) { return v.allFinite(); }

// Evaluates F and J, or returns false when z sits on a pole of the system.
inline bool try_evaluate(const GradientSystem& S, const CVec& z, const CVec& u, CVec& F, CMat& J) {
  if (!finite(z)) return false;
  try {
    S.evaluate(z, u, F, J);
  } catch (const DomainError&) {
    return false;
  }
  return finite(F) && J.allFinite();
}

inline double safe_scaled_residual(const GradientSystem& S, const CVec& z, const CVec& u) {
  if (!finite(z)) return std::numeric_limits<double>::infinity();
  try {
    return S.scaled_residual(z, u);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

/// Damped Newton iteration on F(., u) until the scaled residual is at most
/// cfg.newton_tol.
inline RefineResult newton_refine(const GradientSystem& S, const CVec& z0, const CVec& u,
                                  const TrackerConfig& cfg) {
  RefineResult out;
  out.point = z0;
  CVec F, Ft;
  CMat J, Jt;
  for (int it = 0; it <= cfg.max_refine_iters; ++it) {
    out.iterations = it;
    out.residual = detail::safe_scaled_residual(S, out.point, u);
    if (!std::isfinite(out.residual)) {
      out.status = Status::diverged;
      return out;
    }
    if (out.residual <= cfg.newton_tol) {
      out.status = Status::success;
      return out;
    }
    if (it == cfg.max_refine_iters) break;
    if (!detail::try_evaluate(S, out.point, u, F, J)) {
      out.status = Status::diverged;
      return out;
    }
    const Eigen::PartialPivLU<CMat> lu(J);
    if (!(lu.rcond() > 1e-12)) {
      out.status = Status::singular_jacobian;
      return out;
    }
    const CVec dz = lu.solve(-F);
    if (!detail::finite(dz)) {
      out.status = Status::diverged;
      return out;
    }
    // Backtrack on the residual norm; accept the shortest step if none helps.
    const double f0 = F.norm();
    double lambda = 1.0;
    CVec trial = out.point + dz;
    while (lambda > 1.0 / 1024) {
      trial = out.point + lambda * dz;
      if (detail::try_evaluate(S, trial, u, Ft, Jt) && Ft.norm() < f0) break;
      lambda *= 0.5;
    }
    out.point = trial;
    if (detail::weighted_norm(lambda * dz, out.point) < 1e-15) {
      out.residual = detail::safe_scaled_residual(S, out.point, u);
      out.status = out.residual <= std::max(cfg.newton_tol, 1e-9) ? Status::success : Status::diverged;
      return out;
    }
  }
  out.status = Status::diverged;
  return out;
}

/// Tracks a solution z0 of F(., u0) = 0 along u(t) = (1 - t) u0 + t u1 and
/// refines the endpoint at u1.
///
/// Predictor: classical Runge-Kutta on J dz/dt = -A(z)(u1 - u0).
/// Corrector: up to cfg.max_corrector_iters Newton steps at the new t.
/// The step halves on rejection and grows by 1.5 after four acceptances.
inline TrackResult track_path(const GradientSystem& S, const CVec& z0, const CVec& u0, const CVec& u1,
                              const TrackerConfig& cfg) {
  TrackResult out;
  const CVec du = u1 - u0;
  auto u_at = [&](double t) -> CVec { return (1.0 - t) * u0 + t * u1; };

  CVec F, Fdt;
  CMat J;
  bool saw_pole = false;
  // dz/dt at (z, t); false on a pole or a singular Jacobian.
  auto velocity = [&](const CVec& z, double t, CVec& dz) {
    if (!detail::finite(z)) return false;
    try {
      J = S.jacobian(z, u_at(t));
      Fdt = S.residual(z, du);
    } catch (const DomainError&) {
      saw_pole = true;
      return false;
    }
    if (!J.allFinite() || !detail::finite(Fdt)) {
      saw_pole = true;
      return false;
    }
    const Eigen::PartialPivLU<CMat> lu(J);
    if (!detail::well_conditioned(lu, 1e-14)) return false;
    dz = lu.solve(-Fdt);
    return detail::finite(dz);
  };

  auto correct = [&](CVec& z, double t) {
    const CVec u = u_at(t);
    double prev = 0;
    for (int k = 0; k < cfg.max_corrector_iters; ++k) {
      if (!detail::try_evaluate(S, z, u, F, J)) {
        saw_pole = true;
        return false;
      }
      const Eigen::PartialPivLU<CMat> lu(J);
      if (!detail::well_conditioned(lu, 1e-14)) return false;
      const CVec dz = lu.solve(-F);
      if (!detail::finite(dz)) return false;
      const double nrm = detail::weighted_norm(dz, z);
      if (k == 0 && nrm > cfg.predictor_tol) return false;
      if (k > 0 && nrm > 0.5 * prev && nrm > cfg.corrector_tol) return false;
      z += dz;
      if (nrm <= cfg.corrector_tol) return true;
      prev = nrm;
    }
    return false;
  };

  CVec z = z0;
  double t = 0.0;
  double h = cfg.step_init;
  int streak = 0;
  CVec k1, k2, k3, k4;
  while (t < 1.0) {
    if (++out.steps > cfg.max_steps) {
      out.status = Status::path_failure;
      out.point = z;
      return out;
    }
    h = std::min(h, 1.0 - t);
    const double t_next = (1.0 - t - h) < 1e-14 ? 1.0 : t + h;
    const double hh = t_next - t;
    CVec zn;
    bool ok = velocity(z, t, k1) && velocity(z + 0.5 * hh * k1, t + 0.5 * hh, k2) &&
              velocity(z + 0.5 * hh * k2, t + 0.5 * hh, k3) && velocity(z + hh * k3, t_next, k4);
    if (ok) {
      zn = z + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ok = correct(zn, t_next);
    }
    if (ok && zn.cwiseAbs().maxCoeff() > 1e12) {
      out.status = Status::path_failure;
      out.point = zn;
      return out;
    }
    if (ok) {
      z = zn;
      t = t_next;
      if (++streak >= 4) {
        h = std::min(1.5 * h, cfg.step_max);
        streak = 0;
      }
    } else {
      ++out.rejected;
      streak = 0;
      h *= 0.5;
      if (h < cfg.step_min) {
        out.status = saw_pole ? Status::pole_hit : Status::path_failure;
        out.point = z;
        return out;
      }
    }
  }

  const auto refined = newton_refine(S, z, u1, cfg);
  out.point = refined.point;
  out.residual = refined.residual;
  out.status = refined.ok() ? Status::success : Status::path_failure;
  return out;
}

}  // namespace dppmle
