#pragma once

#include <Eigen/Core>

#include "plateflow/errors.hpp"

namespace plateflow {

// Uniform tensor grid of interior points on the rectangle (0,Lx) x (0,Ly).
// Boundary nodes carry the clamped values w = dw/dnu = 0 and are never stored;
// stencils encode them through zero values and reflected ghosts.
struct PlateGrid {
  double Lx = 1.0;
  double Ly = 1.0;
  int nx = 16;
  int ny = 16;

  void validate() const {
    if (!(Lx > 0.0) || !(Ly > 0.0)) throw ParameterError("PlateGrid: side lengths must be positive");
    if (nx < 4 || ny < 4) throw ParameterError("PlateGrid: nx, ny >= 4 required");
  }

  double hx() const { return Lx / (nx + 1); }
  double hy() const { return Ly / (ny + 1); }
  double quad_weight() const { return hx() * hy(); }
  int interior_count() const { return nx * ny; }

  // Interior node (i,j), 0 <= i < nx, 0 <= j < ny, column-major in j.
  int index(int i, int j) const { return i + j * nx; }
  double x(int i) const { return (i + 1) * hx(); }
  double y(int j) const { return (j + 1) * hy(); }

  // Smallest eigenvalue of the 5-point Dirichlet Laplacian (closed form).
  double dirichlet_lambda1() const {
    const double sx = std::sin(M_PI * hx() / (2.0 * Lx));
    const double sy = std::sin(M_PI * hy() / (2.0 * Ly));
    return 4.0 * sx * sx / (hx() * hx()) + 4.0 * sy * sy / (hy() * hy());
  }

  bool operator==(const PlateGrid&) const = default;
};

// Interior field with the boundary ring of zeros attached, for interpolation
// and stencil code that wants plain (nx+2) x (ny+2) indexing.
inline Eigen::MatrixXd extend_with_boundary(const PlateGrid& g, const Eigen::VectorXd& interior) {
  Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(g.nx + 2, g.ny + 2);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) ext(i + 1, j + 1) = interior[g.index(i, j)];
  return ext;
}

// Bilinear evaluation of an extended nodal field at (x,y) in [0,Lx]x[0,Ly].
inline double bilinear_eval(const PlateGrid& g, const Eigen::MatrixXd& ext, double x, double y) {
  const double fx = x / g.hx();
  const double fy = y / g.hy();
  int i0 = static_cast<int>(std::floor(fx));
  int j0 = static_cast<int>(std::floor(fy));
  i0 = std::max(0, std::min(i0, g.nx));
  j0 = std::max(0, std::min(j0, g.ny));
  const double tx = fx - i0;
  const double ty = fy - j0;
  return (1 - tx) * (1 - ty) * ext(i0, j0) + tx * (1 - ty) * ext(i0 + 1, j0) +
         (1 - tx) * ty * ext(i0, j0 + 1) + tx * ty * ext(i0 + 1, j0 + 1);
}

}  // namespace plateflow
