#pragma once

// Manufactured-solution oracle for the base equation: a smooth deck-invariant
// bump u* = u0 + phi(d_Gamma(z, z0)) with analytically known hyperbolic
// Laplacian, and the matching source nu* = (1/2) e^{2 u*} - 1 - Delta u*.

#include <vector>

#include "solitonlab/surface.hpp"

namespace solitonlab::testing {

struct ManufacturedSolution {
  double c = 0.5;    // baseline nu level
  double amp = 0.02; // bump amplitude (keeps nu* strictly positive)
  double r0 = 1.3;   // bump radius (below half the systole)
  Cx z0{0.22, 0.11};
  std::vector<Cx> orbit;  // images of z0 under short deck words

  ManufacturedSolution() {
    detail::OctagonBuilder ob;
    std::vector<Mobius> frontier = {Mobius{}};
    std::vector<Cx> pts = {z0};
    orbit.push_back(z0);
    auto seen = [&](Cx p) {
      for (Cx q : orbit)
        if (std::abs(p - q) < 1e-9) return true;
      return false;
    };
    for (int depth = 0; depth < 12 && !frontier.empty(); ++depth) {
      std::vector<Mobius> next;
      for (const Mobius& m : frontier)
        for (int g = 0; g < 4; ++g)
          for (int sgn : {+1, -1}) {
            Mobius cand = (sgn > 0 ? ob.gens[g] : ob.gens[g].inv()).compose(m);
            Cx p = cand(z0);
            if (hyp_dist_disk(Cx(0, 0), p) > 4.4) continue;
            if (seen(p)) continue;
            orbit.push_back(p);
            next.push_back(cand);
          }
      frontier = std::move(next);
    }
  }

  double dist_to_orbit(Cx z) const {
    double best = 1e300;
    for (Cx p : orbit) best = std::min(best, hyp_dist_disk(z, p));
    return best;
  }

  // bump profile f(s) = exp(1 - 1/(1-s^2)) on s < 1
  static double f(double s) { return std::exp(1.0 - 1.0 / (1.0 - s * s)); }
  static double fp(double s) {
    double w = 1.0 - s * s;
    return -2.0 * s / (w * w) * f(s);
  }
  static double fpp(double s) {
    double w = 1.0 - s * s;
    return f(s) * (4.0 * s * s / (w * w * w * w) - 2.0 / (w * w) -
                   8.0 * s * s / (w * w * w));
  }

  double bump(double r) const {
    double s = r / r0;
    return s < 1.0 ? amp * f(s) : 0.0;
  }
  double bump_laplacian(double r) const {
    double s = r / r0;
    if (s >= 1.0) return 0.0;
    if (r < 1e-6) return 2.0 * amp * fpp(0.0) / (r0 * r0);
    double d1 = amp / r0 * fp(s);
    double d2 = amp / (r0 * r0) * fpp(s);
    return d2 + d1 / std::tanh(r);
  }

  double u_star(Cx z) const {
    return 0.5 * std::log(2.0 * (1.0 + c)) + bump(dist_to_orbit(z));
  }
  double nu_star(Cx z) const {
    double r = dist_to_orbit(z);
    return (1.0 + c) * std::exp(2.0 * bump(r)) - 1.0 - bump_laplacian(r);
  }
};

}  // namespace solitonlab::testing
