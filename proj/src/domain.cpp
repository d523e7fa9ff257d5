#include "apsing/domain.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#include "apsing/eigensolver.hpp"
#include "apsing/error.hpp"

namespace apsing {

std::string to_string(Boundary bc) {
  switch (bc) {
    case Boundary::Dirichlet: return "dirichlet";
    case Boundary::Neumann: return "neumann";
    case Boundary::Periodic: return "periodic";
  }
  return "dirichlet";
}

Boundary boundary_from_string(const std::string& name) {
  if (name == "dirichlet" || name == "Dirichlet") return Boundary::Dirichlet;
  if (name == "neumann" || name == "Neumann") return Boundary::Neumann;
  if (name == "periodic" || name == "Periodic") return Boundary::Periodic;
  throw Error(ErrorKind::InvalidDomain, "domain", "unknown boundary condition '" + name + "'");
}

Domain Domain::interval(double a, double b, Boundary bc, int n) {
  Domain d;
  d.dim = 1;
  d.ax = a;
  d.bx = b;
  d.bc = bc;
  d.n = n;
  d.validate();
  return d;
}

Domain Domain::rectangle(double ax, double bx, double ay, double by, Boundary bc, int n) {
  Domain d;
  d.dim = 2;
  d.ax = ax;
  d.bx = bx;
  d.ay = ay;
  d.by = by;
  d.bc = bc;
  d.n = n;
  d.validate();
  return d;
}

namespace {
double spacing(double length, Boundary bc, int n) {
  return bc == Boundary::Dirichlet ? length / (n + 1) : length / n;
}
double offset(Boundary bc) {
  switch (bc) {
    case Boundary::Dirichlet: return 1.0;
    case Boundary::Neumann: return 0.5;
    case Boundary::Periodic: return 0.0;
  }
  return 1.0;
}
}  // namespace

double Domain::hx() const { return spacing(bx - ax, bc, n); }
double Domain::hy() const { return dim == 1 ? 1.0 : spacing(by - ay, bc, n); }
double Domain::x_at(int i) const { return ax + (i + offset(bc)) * hx(); }
double Domain::y_at(int j) const { return dim == 1 ? 0.0 : ay + (j + offset(bc)) * hy(); }

Eigen::Vector2d Domain::node(int idx) const {
  if (dim == 1) return {x_at(idx), 0.0};
  return {x_at(idx % n), y_at(idx / n)};
}

void Domain::validate() const {
  if (dim != 1 && dim != 2) throw Error(ErrorKind::InvalidDomain, "domain", "dim must be 1 or 2");
  if (!(std::isfinite(ax) && std::isfinite(bx) && bx > ax))
    throw Error(ErrorKind::InvalidDomain, "domain", "need b > a");
  if (dim == 2 && !(std::isfinite(ay) && std::isfinite(by) && by > ay))
    throw Error(ErrorKind::InvalidDomain, "domain", "need by > ay");
  if (n < 8) throw Error(ErrorKind::InvalidDomain, "domain", "resolution n must be >= 8");
}

bool Domain::operator==(const Domain& o) const {
  if (dim != o.dim || bc != o.bc || n != o.n || ax != o.ax || bx != o.bx) return false;
  return dim == 1 || (ay == o.ay && by == o.by);
}

GridFunction::GridFunction(const Domain& domain)
    : domain_(domain), values_(Eigen::VectorXd::Zero(domain.nodes())) {}

GridFunction::GridFunction(const Domain& domain, Eigen::VectorXd values)
    : domain_(domain), values_(std::move(values)) {
  if (values_.size() != domain_.nodes()) {
    throw Error(ErrorKind::DomainMismatch, "grid-function",
                "length " + std::to_string(values_.size()) + " does not match " +
                    std::to_string(domain_.nodes()) + " nodes");
  }
  if (!values_.allFinite()) throw Error(ErrorKind::NonFinite, "grid-function", "non-finite entry");
}

GridFunction GridFunction::constant(const Domain& domain, double c) {
  return GridFunction(domain, Eigen::VectorXd::Constant(domain.nodes(), c));
}

GridFunction GridFunction::operator+(const GridFunction& o) const {
  require_same_domain(domain_, o.domain_, "grid-function");
  return GridFunction(domain_, values_ + o.values_);
}
GridFunction GridFunction::operator-(const GridFunction& o) const {
  require_same_domain(domain_, o.domain_, "grid-function");
  return GridFunction(domain_, values_ - o.values_);
}
GridFunction GridFunction::operator*(double s) const { return GridFunction(domain_, values_ * s); }

void require_same_domain(const Domain& a, const Domain& b, const char* stage) {
  if (a != b) throw Error(ErrorKind::DomainMismatch, stage, "grid functions live on different domains");
}

struct DiscreteLaplacian::Cache {
  std::mutex mutex;
  FreeSpectrum spectrum;
};

DiscreteLaplacian::DiscreteLaplacian(const Domain& domain, Eigen::SparseMatrix<double> matrix)
    : domain_(domain), matrix_(std::move(matrix)), cache_(std::make_shared<Cache>()) {}

GridFunction DiscreteLaplacian::apply(const GridFunction& u) const {
  require_same_domain(domain_, u.domain(), "laplacian");
  return GridFunction(domain_, apply(u.values()));
}

Eigen::VectorXd DiscreteLaplacian::apply(const Eigen::VectorXd& u) const {
  // (Au)_i = rowsum_i u_i + sum_{j != i} a_ij (u_j - u_i): rounding scales with
  // the differences of u rather than with |u| / h^2.
  Eigen::VectorXd out(u.size());
  for (int col = 0; col < matrix_.outerSize(); ++col) {
    double rowsum = 0.0, acc = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it) {
      rowsum += it.value();
      if (it.row() != col) acc += it.value() * (u[it.row()] - u[col]);
    }
    out[col] = acc + rowsum * u[col];
  }
  return out;
}

FreeSpectrum DiscreteLaplacian::free_spectrum(int count) const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (static_cast<int>(cache_->spectrum.pairs.size()) < count) {
    const int want = std::min(domain_.nodes(), std::max(count, 2));
    EigenDecomposition dec = lowest_eigenpairs(matrix_, Eigen::VectorXd::Zero(domain_.nodes()), want);
    const double scale = 1.0 / std::sqrt(weight());
    FreeSpectrum s;
    for (int c = 0; c < want; ++c) {
      Eigen::VectorXd psi = dec.vectors[c] * scale;
      if (c == 0) {
        if (psi.sum() < 0.0) psi = -psi;
      } else {
        // first clearly nonzero entry positive
        const double big = 0.1 * psi.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < psi.size(); ++i) {
          if (std::abs(psi[i]) > big) {
            if (psi[i] < 0.0) psi = -psi;
            break;
          }
        }
      }
      s.pairs.push_back({dec.values[c], GridFunction(domain_, std::move(psi)), dec.residuals[c]});
    }
    s.gap = s.pairs.size() > 1 ? s.pairs[1].mu - s.pairs[0].mu : 0.0;
    cache_->spectrum = std::move(s);
  }
  FreeSpectrum out;
  out.gap = cache_->spectrum.gap;
  out.pairs.assign(cache_->spectrum.pairs.begin(), cache_->spectrum.pairs.begin() + count);
  return out;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// 1D stencil along one axis, rows/cols given through `index`.
template <class Index>
void add_axis(Triplets& t, int n, double h, Boundary bc, Index index, int lines) {
  const double c = 1.0 / (h * h);
  for (int line = 0; line < lines; ++line) {
    for (int i = 0; i < n; ++i) {
      const int row = index(i, line);
      double diag = 2.0 * c;
      if (bc == Boundary::Neumann && (i == 0 || i == n - 1)) diag = c;
      t.emplace_back(row, row, diag);
      if (i > 0) t.emplace_back(row, index(i - 1, line), -c);
      if (i < n - 1) t.emplace_back(row, index(i + 1, line), -c);
      if (bc == Boundary::Periodic) {
        if (i == 0) t.emplace_back(row, index(n - 1, line), -c);
        if (i == n - 1) t.emplace_back(row, index(0, line), -c);
      }
    }
  }
}

}  // namespace

DiscreteLaplacian build_laplacian(const Domain& domain, int max_nodes) {
  domain.validate();
  if (domain.nodes() > max_nodes) {
    throw Error(ErrorKind::UnsupportedResolution, "build_laplacian",
                std::to_string(domain.nodes()) + " nodes exceed the cap of " +
                    std::to_string(max_nodes));
  }
  const int n = domain.n;
  const int N = domain.nodes();
  Triplets t;
  t.reserve(static_cast<size_t>(N) * (domain.dim == 1 ? 3 : 6));
  if (domain.dim == 1) {
    add_axis(t, n, domain.hx(), domain.bc, [](int i, int) { return i; }, 1);
  } else {
    add_axis(t, n, domain.hx(), domain.bc, [n](int i, int j) { return j * n + i; }, n);
    add_axis(t, n, domain.hy(), domain.bc, [n](int j, int i) { return j * n + i; }, n);
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return DiscreteLaplacian(domain, std::move(A));
}

double inner_product(const GridFunction& u, const GridFunction& v) {
  require_same_domain(u.domain(), v.domain(), "inner_product");
  return u.domain().weight() * u.values().dot(v.values());
}

double norm(const GridFunction& u) { return std::sqrt(inner_product(u, u)); }

FreeSpectrum free_eigenpairs(const DiscreteLaplacian& L, int count) {
  if (count < 1) throw Error(ErrorKind::Precondition, "free_eigenpairs", "count must be >= 1");
  FreeSpectrum s = L.free_spectrum(std::max(count, 2));
  const double mu1 = s.pairs[0].mu;
  const double tol = 1e-8 * std::max(1.0, std::abs(s.pairs[1].mu));
  if (s.gap <= tol) {
    throw Error(ErrorKind::DegenerateGroundState, "free_eigenpairs",
                "mu_2 - mu_1 = " + std::to_string(s.gap) + " at mu_1 = " + std::to_string(mu1));
  }
  s.pairs.resize(count);
  return s;
}

Eigen::VectorXd map_values(const Nonlinearity& f, const Eigen::VectorXd& u, int order) {
  Eigen::VectorXd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Derivatives d = f(u[i]);
    out[i] = order == 0 ? d.f : order == 1 ? d.d1 : order == 2 ? d.d2 : d.d3;
  }
  return out;
}

double residual_floor(const DiscreteLaplacian& L, const Nonlinearity& f, const Eigen::VectorXd& u) {
  const double a = 2.0 * L.matrix().diagonal().maxCoeff();
  const double fu = map_values(f, u, 0).lpNorm<Eigen::Infinity>();
  const double measure = L.weight() * static_cast<double>(u.size());
  return 8.0 * std::numeric_limits<double>::epsilon() * (a * u.lpNorm<Eigen::Infinity>() + fu) *
         std::sqrt(measure);
}

GridFunction apply_F(const GridFunction& u, const Nonlinearity& f, const DiscreteLaplacian& L) {
  require_same_domain(u.domain(), L.domain(), "apply_F");
  return GridFunction(u.domain(), L.apply(u.values()) - map_values(f, u.values(), 0));
}

GridFunction apply_jacobian(const GridFunction& u, const Nonlinearity& f,
                            const DiscreteLaplacian& L, const GridFunction& v) {
  require_same_domain(u.domain(), L.domain(), "apply_jacobian");
  require_same_domain(u.domain(), v.domain(), "apply_jacobian");
  const Eigen::VectorXd q = map_values(f, u.values(), 1);
  return GridFunction(u.domain(), L.apply(v.values()) - q.cwiseProduct(v.values()));
}

}  // namespace apsing
