#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <memory>
#include <string>
#include <vector>

#include "apsing/nonlinearity.hpp"

namespace apsing {

enum class Boundary { Dirichlet, Neumann, Periodic };

std::string to_string(Boundary bc);
Boundary boundary_from_string(const std::string& name);

/// An interval or a rectangle with a uniform grid of `n` nodes per axis.
///
/// Dirichlet grids hold interior nodes only (h = length/(n+1)); Neumann grids
/// are cell centered (h = length/n); periodic grids start at the left edge.
/// Nodes of a rectangle are numbered x-fastest: idx = j*n + i.
struct Domain {
  int dim = 1;
  double ax = 0.0, bx = 1.0;
  double ay = 0.0, by = 1.0;
  Boundary bc = Boundary::Dirichlet;
  int n = 8;

  static Domain interval(double a, double b, Boundary bc, int n);
  static Domain rectangle(double ax, double bx, double ay, double by, Boundary bc, int n);

  int nodes() const { return dim == 1 ? n : n * n; }
  double hx() const;
  double hy() const;
  double weight() const { return dim == 1 ? hx() : hx() * hy(); }
  double measure() const { return dim == 1 ? bx - ax : (bx - ax) * (by - ay); }

  // Coordinate of grid index i along x (or y).
  double x_at(int i) const;
  double y_at(int j) const;
  // Physical coordinates of node idx (y is 0 for intervals).
  Eigen::Vector2d node(int idx) const;

  // Throws invalid-domain when extents or resolution are unusable.
  void validate() const;

  bool operator==(const Domain& other) const;
  bool operator!=(const Domain& other) const { return !(*this == other); }
};

/// Nodal values on a domain. Entries must be finite.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const Domain& domain);  // zeros
  GridFunction(const Domain& domain, Eigen::VectorXd values);

  static GridFunction constant(const Domain& domain, double c);
  template <class F>
  static GridFunction sample(const Domain& domain, F&& fn) {
    Eigen::VectorXd v(domain.nodes());
    for (int i = 0; i < domain.nodes(); ++i) {
      const Eigen::Vector2d p = domain.node(i);
      v[i] = fn(p[0], p[1]);
    }
    return GridFunction(domain, std::move(v));
  }

  const Domain& domain() const { return domain_; }
  const Eigen::VectorXd& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }

  GridFunction operator+(const GridFunction& other) const;
  GridFunction operator-(const GridFunction& other) const;
  GridFunction operator*(double s) const;
  GridFunction operator-() const { return *this * -1.0; }
  friend GridFunction operator*(double s, const GridFunction& u) { return u * s; }

  double max_abs() const { return values_.cwiseAbs().maxCoeff(); }

 private:
  Domain domain_;
  Eigen::VectorXd values_;
};

void require_same_domain(const Domain& a, const Domain& b, const char* stage);

struct FreeEigenpair {
  double mu = 0.0;
  GridFunction psi;
  double residual = 0.0;
};

struct FreeSpectrum {
  std::vector<FreeEigenpair> pairs;
  double gap = 0.0;  // mu_2 - mu_1
};

/// Symmetric sparse realization of -Laplacian with a boundary closure.
///
/// Copies share the cached free spectrum; the cache is guarded by a mutex so
/// one operator can be used from several tasks.
class DiscreteLaplacian {
 public:
  DiscreteLaplacian(const Domain& domain, Eigen::SparseMatrix<double> matrix);

  const Domain& domain() const { return domain_; }
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
  double weight() const { return domain_.weight(); }

  GridFunction apply(const GridFunction& u) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;

  // Lowest `count` eigenpairs of the operator (ascending, psi_1 > 0,
  // weighted-orthonormal). Cached; larger counts extend the cache.
  FreeSpectrum free_spectrum(int count) const;

 private:
  struct Cache;
  Domain domain_;
  Eigen::SparseMatrix<double> matrix_;
  std::shared_ptr<Cache> cache_;
};

constexpr int kDefaultMaxNodes = 1 << 20;

/// Throws unsupported-resolution when the node count exceeds `max_nodes`.
DiscreteLaplacian build_laplacian(const Domain& domain, int max_nodes = kDefaultMaxNodes);

/// Weighted sum  sum_i w_i u_i v_i.
double inner_product(const GridFunction& u, const GridFunction& v);
double norm(const GridFunction& u);

/// Throws degenerate-ground-state when mu_2 - mu_1 is not resolved.
FreeSpectrum free_eigenpairs(const DiscreteLaplacian& L, int count);

GridFunction apply_F(const GridFunction& u, const Nonlinearity& f, const DiscreteLaplacian& L);
GridFunction apply_jacobian(const GridFunction& u, const Nonlinearity& f,
                            const DiscreteLaplacian& L, const GridFunction& v);

// Nodal arrays of f, f', f'', f''' at u.
Eigen::VectorXd map_values(const Nonlinearity& f, const Eigen::VectorXd& u, int order);

// Attainable accuracy of F(u) in the weighted norm: rounding of about
// eps (|A| |u| + |f(u)|) per node, |A| bounded by twice the largest diagonal entry.
double residual_floor(const DiscreteLaplacian& L, const Nonlinearity& f, const Eigen::VectorXd& u);

}  // namespace apsing
