#pragma once

#include <utility>
#include <vector>

#include "hop/diffcore.hpp"
#include "hop/geometry.hpp"

namespace hop::mapping {

/// Radial fractions are capped just below 1 so tanh saturation in double
/// precision cannot place a point on the boundary.
inline constexpr double kRadialCap = 1.0 - 1e-9;

enum class BoundedFn { kLogistic };
enum class NonnegFn { kTanh };

struct MapConfig {
  double epsilon = 1e-3;  // φ <= π/2 - epsilon
  BoundedFn bounded = BoundedFn::kLogistic;
  NonnegFn nonneg = NonnegFn::kTanh;
};

void validate(const MapConfig& cfg);

struct PolarCode {
  Vector v_theta;
  double zbar_r = 0.0;
};

double logistic(double z);
double bounded(BoundedFn fn, double z);
double nonneg(NonnegFn fn, double t);

/// ŷ = a + logistic(z)(b - a).
double map_1d(double a, double b, double z);

/// Sign-flip reconnection of raw outputs into (unit direction, radial fraction).
PolarCode reconnect(const Vector& z_theta, double z_r, const MapConfig& cfg = {});

/// φ = atan(ℛ) (π/2 for an unbounded ray), clamped to π/2 - epsilon.
double boundary_angle(const geometry::ConstraintSet& set, const Vector& y0, const Vector& v,
                      const MapConfig& cfg);

/// ŷ = y0 + v·tan(zbar·φ).
Vector spherical_map(const Vector& y0, const PolarCode& code, const geometry::ConstraintSet& set,
                     const MapConfig& cfg = {});

/// Bounded 2-D map: θ = 2π·logistic(z_theta), r = logistic(z_r), ŷ = y0 + r·ℛ(v_θ)·v_θ.
Vector polar2d_map(const Vector& y0, double z_theta, double z_r, const geometry::ConstraintSet& set);

PolarCode inverse_spherical(const Vector& y0, const Vector& y, const geometry::ConstraintSet& set,
                            const MapConfig& cfg = {});

/// Raw outputs that reproduce a code through reconnect (z_r >= 0 branch).
std::pair<Vector, double> raw_from_code(const PolarCode& code, const MapConfig& cfg = {});

/// r < 0 -> (|r|, θ + π); θ is left unwrapped.
std::pair<double, double> polar_reconnect(double r, double theta);

/// tan(ψ)^(d-1)·sec²(ψ).
double jacobian_det_analytic(int d, double psi);
/// |det| of the finite-difference Jacobian of (ψ, tangent coordinates) -> y0 + v·tan(ψ),
/// with an orthonormal tangent basis at v.
double jacobian_det_numeric(const Vector& v_theta, double psi, double h = 1e-6);
/// Orthonormal basis of the tangent space of the sphere at unit v (d x (d-1)).
Matrix tangent_basis(const Vector& v);

/// Per-row target of the batched map: the set and the polar centre.
struct RayTarget {
  const geometry::ConstraintSet* set = nullptr;
  const Vector* y0 = nullptr;
};

/// Differentiable boundary angle for a batch of unit directions (B x d -> B x 1).
/// dℛ/dv comes from implicit differentiation of the active constraint:
/// dℛ/dv = -ℛ ∇g / (∇g·v) at the hit point. Unbounded rays report π/2 with zero gradient.
ad::NodeId boundary_angle_node(ad::Tape& tape, ad::NodeId v, const std::vector<RayTarget>& rows);

struct MapNodes {
  ad::NodeId y;       // B x d feasible points
  ad::NodeId v;       // B x d unit directions
  ad::NodeId zbar;    // B x 1 radial fractions
  ad::NodeId psi;     // B x 1
};

/// Full batched HoP map from raw network outputs z = [z_theta | z_r] (B x (d+1)).
MapNodes hop_map(ad::Tape& tape, ad::NodeId z, const std::vector<RayTarget>& rows,
                 const MapConfig& cfg = {});

}  // namespace hop::mapping
