#include "hop/mapping.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hop::mapping {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void require_code(const PolarCode& code) {
  if (std::abs(code.v_theta.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "polar code direction must be a unit vector");
  }
  if (!(code.zbar_r >= 0.0 && code.zbar_r < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "polar code radial fraction must lie in [0, 1)");
  }
}

void require_interior(const geometry::ConstraintSet& set, const Vector& y0) {
  if (y0.size() != geometry::dimension(set)) {
    throw Error(ErrorCode::kDimensionMismatch, "polar centre dimension does not match the set");
  }
  if (!(geometry::interior_margin(set, y0) > 0.0)) {
    throw Error(ErrorCode::kNotInterior, "polar centre must be strictly feasible");
  }
}

}  // namespace

void validate(const MapConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < std::numbers::pi / 4.0)) {
    throw Error(ErrorCode::kInvalidArgument, "map epsilon must lie in (0, pi/4)");
  }
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bounded(BoundedFn fn, double z) {
  switch (fn) {
    case BoundedFn::kLogistic: return logistic(z);
  }
  return logistic(z);
}

double nonneg(NonnegFn fn, double t) {
  switch (fn) {
    case NonnegFn::kTanh: return std::tanh(t);
  }
  return std::tanh(t);
}

double map_1d(double a, double b, double z) {
  if (!(a < b)) throw Error(ErrorCode::kInvalidArgument, "map_1d requires a < b");
  return a + logistic(z) * (b - a);
}

PolarCode reconnect(const Vector& z_theta, double z_r, const MapConfig& cfg) {
  const double n = z_theta.norm();
  if (n < 1e-12) throw Error(ErrorCode::kDegenerate, "reconnect: direction output is (numerically) zero");
  PolarCode code;
  code.v_theta = (z_r >= 0.0 ? 1.0 : -1.0) * z_theta / n;
  code.zbar_r = std::min(nonneg(cfg.nonneg, std::abs(z_r)), kRadialCap);
  return code;
}

double boundary_angle(const geometry::ConstraintSet& set, const Vector& y0, const Vector& v,
                      const MapConfig& cfg) {
  const geometry::BoundaryHit hit = geometry::boundary_distance(set, y0, v);
  const double phi = hit.finite() ? std::atan(hit.distance) : kHalfPi;
  return std::min(phi, kHalfPi - cfg.epsilon);
}

Vector spherical_map(const Vector& y0, const PolarCode& code, const geometry::ConstraintSet& set,
                     const MapConfig& cfg) {
  validate(cfg);
  require_code(code);
  require_interior(set, y0);
  const double psi = code.zbar_r * boundary_angle(set, y0, code.v_theta, cfg);
  return y0 + code.v_theta * std::tan(psi);
}

Vector polar2d_map(const Vector& y0, double z_theta, double z_r, const geometry::ConstraintSet& set) {
  if (y0.size() != 2) throw Error(ErrorCode::kDimensionMismatch, "polar2d_map is two-dimensional");
  require_interior(set, y0);
  const double theta = 2.0 * std::numbers::pi * logistic(z_theta);
  const double r = std::min(logistic(z_r), kRadialCap);
  Vector v(2);
  v << std::cos(theta), std::sin(theta);
  const geometry::BoundaryHit hit = geometry::boundary_distance(set, y0, v);
  if (!hit.finite()) {
    throw Error(ErrorCode::kUnbounded, "polar2d_map: unbounded direction, use spherical_map");
  }
  return y0 + r * hit.distance * v;
}

PolarCode inverse_spherical(const Vector& y0, const Vector& y, const geometry::ConstraintSet& set,
                            const MapConfig& cfg) {
  validate(cfg);
  require_interior(set, y0);
  if (y.size() != y0.size()) throw Error(ErrorCode::kDimensionMismatch, "inverse_spherical: shape mismatch");
  const Vector delta = y - y0;
  const double dist = delta.norm();
  if (dist == 0.0) throw Error(ErrorCode::kInvalidArgument, "inverse_spherical: y equals the polar centre");
  PolarCode code;
  code.v_theta = delta / dist;
  const geometry::BoundaryHit hit = geometry::boundary_distance(set, y0, code.v_theta);
  if (hit.finite() && dist >= hit.distance) {
    throw Error(ErrorCode::kNotInterior, "inverse_spherical: y is on or outside the boundary");
  }
  const double phi_c = boundary_angle(set, y0, code.v_theta, cfg);
  code.zbar_r = std::atan(dist) / phi_c;
  if (code.zbar_r >= 1.0) {
    throw Error(ErrorCode::kNotInterior, "inverse_spherical: y lies beyond the epsilon-clamped region");
  }
  return code;
}

std::pair<Vector, double> raw_from_code(const PolarCode& code, const MapConfig& cfg) {
  (void)cfg;
  require_code(code);
  return {code.v_theta, std::atanh(code.zbar_r)};
}

std::pair<double, double> polar_reconnect(double r, double theta) {
  if (r < 0.0) return {-r, theta + std::numbers::pi};
  return {r, theta};
}

double jacobian_det_analytic(int d, double psi) {
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "jacobian_det_analytic: d must be positive");
  if (!(psi > 0.0 && psi < kHalfPi)) {
    throw Error(ErrorCode::kInvalidArgument, "jacobian_det_analytic: psi must lie in (0, pi/2)");
  }
  const double sec = 1.0 / std::cos(psi);
  return std::pow(std::tan(psi), d - 1) * sec * sec;
}

Matrix tangent_basis(const Vector& v) {
  const auto d = v.size();
  const Eigen::MatrixXd column = v;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(column);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return q.rightCols(d - 1);
}

double jacobian_det_numeric(const Vector& v_theta, double psi, double h) {
  if (!(psi > 0.0 && psi < kHalfPi)) {
    throw Error(ErrorCode::kInvalidArgument, "jacobian_det_numeric: psi must lie in (0, pi/2)");
  }
  const auto d = v_theta.size();
  const Vector v = v_theta.normalized();
  const Matrix basis = tangent_basis(v);
  // Parameters (ψ, s) with direction normalize(v + basis·s).
  auto image = [&](const Vector& params) {
    Vector dir = v;
    if (d > 1) dir += basis * params.tail(d - 1);
    return Vector(std::tan(params(0)) * dir.normalized());
  };
  const double step = h * std::min(1.0, kHalfPi - psi);
  Vector base = Vector::Zero(d);
  base(0) = psi;
  auto central = [&](Eigen::Index k, double hk) {
    Vector hi = base;
    Vector lo = base;
    hi(k) += hk;
    lo(k) -= hk;
    return Vector((image(hi) - image(lo)) / (2.0 * hk));
  };
  Eigen::MatrixXd jac(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    // Richardson extrapolation of two central differences.
    jac.col(k) = (4.0 * central(k, 0.5 * step) - central(k, step)) / 3.0;
  }
  return std::abs(jac.determinant());
}

ad::NodeId boundary_angle_node(ad::Tape& tape, ad::NodeId v, const std::vector<RayTarget>& rows) {
  const Matrix dirs = tape.value(v);
  if (static_cast<std::size_t>(dirs.rows()) != rows.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "boundary_angle_node: one target per row required");
  }
  Matrix phi(dirs.rows(), 1);
  Matrix local = Matrix::Zero(dirs.rows(), dirs.cols());
  for (Eigen::Index i = 0; i < dirs.rows(); ++i) {
    const RayTarget& row = rows[static_cast<std::size_t>(i)];
    const Vector vi = dirs.row(i).transpose();
    const geometry::BoundaryHit hit = geometry::boundary_distance(*row.set, *row.y0, vi);
    if (!hit.finite()) {
      phi(i, 0) = kHalfPi;
      continue;
    }
    const double R = hit.distance;
    phi(i, 0) = std::atan(R);
    const Vector hit_point = *row.y0 + R * vi;
    const Vector grad_g = geometry::constraint_gradient(*row.set, *hit.active_index, hit_point);
    const double rate = grad_g.dot(vi);
    if (rate > 0.0) {
      local.row(i) = (-R / rate / (1.0 + R * R)) * grad_g.transpose();
    }
  }
  return tape.record("boundary_angle", {v}, std::move(phi), [local = std::move(local)](const Matrix& g, std::vector<Matrix>& gi) {
    gi[0].array() += local.array().colwise() * g.col(0).array();
  });
}

MapNodes hop_map(ad::Tape& tape, ad::NodeId z, const std::vector<RayTarget>& rows, const MapConfig& cfg) {
  validate(cfg);
  const Matrix& raw = tape.value(z);
  const auto batch = raw.rows();
  const int d = static_cast<int>(raw.cols()) - 1;
  if (d < 1 || static_cast<std::size_t>(batch) != rows.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "hop_map: z must be B x (d+1) with one target per row");
  }
  Matrix sign(batch, 1);
  Matrix centres(batch, d);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const RayTarget& row = rows[static_cast<std::size_t>(i)];
    if (row.y0->size() != d) throw Error(ErrorCode::kDimensionMismatch, "hop_map: polar centre dimension");
    if (raw.row(i).head(d).norm() < 1e-12) {
      std::ostringstream os;
      os << "reconnect: direction output is (numerically) zero at batch row " << i;
      throw Error(ErrorCode::kDegenerate, os.str());
    }
    sign(i, 0) = raw(i, d) >= 0.0 ? 1.0 : -1.0;
    centres.row(i) = row.y0->transpose();
  }
  using namespace ad;
  const NodeId z_theta = slice(tape, z, 0, d);
  const NodeId z_r = slice(tape, z, d, 1);
  const NodeId inv_norm = div(tape, tape.constant(std::move(sign)), l2norm(tape, z_theta));
  MapNodes out;
  out.v = scale_rows(tape, z_theta, inv_norm);
  const NodeId frac = ad::tanh(tape, ad::abs(tape, z_r));
  out.zbar = min_over_axis(tape, concat(tape, {frac, tape.constant(Matrix::Constant(batch, 1, kRadialCap))}, Axis::kCols),
                           Axis::kCols);
  const NodeId phi = boundary_angle_node(tape, out.v, rows);
  const NodeId phi_c = min_over_axis(
      tape, concat(tape, {phi, tape.constant(Matrix::Constant(batch, 1, kHalfPi - cfg.epsilon))}, Axis::kCols),
      Axis::kCols);
  out.psi = mul(tape, out.zbar, phi_c);
  out.y = add(tape, tape.constant(std::move(centres)), scale_rows(tape, out.v, ad::tan(tape, out.psi)));
  return out;
}

}  // namespace hop::mapping
