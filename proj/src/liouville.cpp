#include "ptctc/liouville.hpp"

#include "ptctc/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace ptctc::liouville {

namespace {

// out += c · (a ⊗ b), skipping structural zeros of a.
void add_kron(ComplexMatrix& out, Complex c, const ComplexMatrix& a, const ComplexMatrix& b) {
  const Eigen::Index n = b.rows();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (a(i, j) == Complex(0.0, 0.0)) continue;
      out.block(i * n, j * n, n, n) += (c * a(i, j)) * b;
    }
  }
}

// out += c · (a ⊗ I) without materializing the identity.
void add_kron_identity_right(ComplexMatrix& out, Complex c, const ComplexMatrix& a) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Complex v = c * a(i, j);
      if (v == Complex(0.0, 0.0)) continue;
      for (Eigen::Index k = 0; k < n; ++k) out(i * n + k, j * n + k) += v;
    }
  }
}

// out += c · (I ⊗ b).
void add_identity_kron(ComplexMatrix& out, Complex c, const ComplexMatrix& b) {
  const Eigen::Index n = b.rows();
  for (Eigen::Index k = 0; k < n; ++k) out.block(k * n, k * n, n, n) += c * b;
}

// One column of the Hermitian basis: up to two (vec index, coefficient) pairs.
struct BasisColumn {
  Eigen::Index index[2];
  Complex coef[2];
  int count;
};

std::vector<BasisColumn> hermitian_columns(Eigen::Index d) {
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<BasisColumn> cols;
  cols.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index j = 0; j < d; ++j) cols.push_back({{j * d + j, 0}, {1.0, 0.0}, 1});
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j + 1; k < d; ++k) {
      const Eigen::Index jk = k * d + j;  // vec index of E_jk
      const Eigen::Index kj = j * d + k;
      cols.push_back({{jk, kj}, {Complex(r, 0.0), Complex(r, 0.0)}, 2});
      cols.push_back({{jk, kj}, {Complex(0.0, r), Complex(0.0, -r)}, 2});
    }
  }
  return cols;
}

class DisjointSets {
 public:
  explicit DisjointSets(Eigen::Index n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), Eigen::Index{0});
  }
  Eigen::Index find(Eigen::Index x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(Eigen::Index a, Eigen::Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<Eigen::Index> parent_;
};

// Index sets of the connected components of the sparsity pattern of r.
std::vector<std::vector<Eigen::Index>> sparsity_blocks(const RealMatrix& r) {
  const Eigen::Index n = r.rows();
  const double cutoff = 1e-14 * r.cwiseAbs().maxCoeff();
  DisjointSets sets(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j && std::abs(r(i, j)) > cutoff) sets.unite(i, j);
    }
  }
  std::vector<std::vector<Eigen::Index>> by_root(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) by_root[sets.find(i)].push_back(i);
  std::vector<std::vector<Eigen::Index>> blocks;
  for (auto& b : by_root) {
    if (!b.empty()) blocks.push_back(std::move(b));
  }
  return blocks;
}

RealMatrix submatrix(const RealMatrix& r, const std::vector<Eigen::Index>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  RealMatrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = r(idx[i], idx[j]);
  }
  return out;
}

double resolve_tol(const Superoperator& sup, std::optional<double> lambda_tol) {
  const double tol = lambda_tol.value_or(sup.default_lambda_tol());
  if (!(tol >= 0.0) || !std::isfinite(tol)) throw DomainError("lambda_tol must be finite and >= 0");
  return tol;
}

void check_density(const ComplexMatrix& rho, Eigen::Index d, double tol) {
  if (rho.rows() != d || rho.cols() != d) {
    throw DimensionError("density matrix must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (!all_finite(rho)) throw DomainError("density matrix has non-finite entries");
  if ((rho - rho.adjoint()).norm() > tol) throw DomainError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - Complex(1.0, 0.0)) > tol) {
    throw DomainError("density matrix does not have unit trace");
  }
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(rho, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -tol) {
    throw DomainError("density matrix is not positive semidefinite");
  }
}

}  // namespace

Superoperator::Superoperator(ComplexMatrix matrix, spinops::SpinBasis basis)
    : matrix_(std::move(matrix)), basis_(basis), norm_(matrix_.norm()) {
  const Eigen::Index d = basis_.dim();
  if (matrix_.rows() != d * d || matrix_.cols() != d * d) {
    throw DimensionError("Superoperator: matrix must be d^2 x d^2 with d = " + std::to_string(d));
  }
}

Superoperator build_liouvillian(const spinops::SpinModel& model, Eigen::Index dense_limit) {
  model.validate();
  const Eigen::Index d = model.basis.dim();
  if (d * d > dense_limit) {
    throw DimensionError("build_liouvillian: superoperator dimension " + std::to_string(d * d) +
                         " exceeds the dense limit " + std::to_string(dense_limit));
  }
  const ComplexMatrix& h = model.hamiltonian;
  ComplexMatrix m = ComplexMatrix::Zero(d * d, d * d);
  add_identity_kron(m, -kI, h);
  add_kron_identity_right(m, kI, h.transpose());
  for (const auto& jump : model.jumps) {
    const ComplexMatrix ldl = jump.adjoint() * jump;
    add_kron(m, 2.0, jump.conjugate(), jump);
    add_identity_kron(m, -1.0, ldl);
    add_kron_identity_right(m, -1.0, ldl.transpose());
  }

  // vec(I)† L̂ = 0: the diagonal rows must sum to zero column by column.
  ComplexVector trace_row = ComplexVector::Zero(d * d);
  for (Eigen::Index a = 0; a < d; ++a) trace_row += m.row(a * d + a).transpose();
  const double scale = m.norm();
  if (trace_row.norm() > 1e-10 * std::max(scale, 1e-300)) {
    throw NumericalError("build_liouvillian: trace preservation violated (residual " +
                         std::to_string(trace_row.norm()) + ")");
  }
  return Superoperator(std::move(m), model.basis);
}

ComplexVector vectorize(const ComplexMatrix& rho) {
  return Eigen::Map<const ComplexVector>(rho.data(), rho.size());
}

ComplexMatrix unvectorize(const ComplexVector& v, Eigen::Index d) {
  if (v.size() != d * d) throw DimensionError("unvectorize: length is not d^2");
  return Eigen::Map<const ComplexMatrix>(v.data(), d, d);
}

ComplexMatrix hermitian_basis(Eigen::Index d) {
  const auto cols = hermitian_columns(d);
  ComplexMatrix u = ComplexMatrix::Zero(d * d, d * d);
  for (std::size_t a = 0; a < cols.size(); ++a) {
    for (int t = 0; t < cols[a].count; ++t) {
      u(cols[a].index[t], static_cast<Eigen::Index>(a)) = cols[a].coef[t];
    }
  }
  return u;
}

RealMatrix real_representation(const Superoperator& sup) {
  const Eigen::Index d = sup.basis().dim();
  const Eigen::Index n = d * d;
  const auto cols = hermitian_columns(d);
  const ComplexMatrix& m = sup.matrix();
  RealMatrix r(n, n);
  ComplexVector w(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& ca = cols[static_cast<std::size_t>(a)];
    w = ca.coef[0] * m.col(ca.index[0]);
    if (ca.count == 2) w += ca.coef[1] * m.col(ca.index[1]);
    for (Eigen::Index b = 0; b < n; ++b) {
      const auto& cb = cols[static_cast<std::size_t>(b)];
      Complex acc = std::conj(cb.coef[0]) * w(cb.index[0]);
      if (cb.count == 2) acc += std::conj(cb.coef[1]) * w(cb.index[1]);
      r(b, a) = acc.real();
    }
  }
  return r;
}

SpectralSummary spectrum(const Superoperator& sup, std::optional<double> lambda_tol) {
  SpectralSummary out;
  out.lambda_tol = resolve_tol(sup, lambda_tol);

  const RealMatrix r = real_representation(sup);
  if (!r.allFinite()) throw NumericalError("spectrum: superoperator has non-finite entries");
  out.eigenvalues.reserve(static_cast<std::size_t>(r.rows()));
  for (const auto& block : sparsity_blocks(r)) {
    if (block.size() == 1) {
      out.eigenvalues.emplace_back(r(block[0], block[0]), 0.0);
      continue;
    }
    for (const Complex& z : general_eigenvalues(submatrix(r, block))) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw NumericalError("spectrum: eigensolver returned a non-finite eigenvalue");
      }
      out.eigenvalues.push_back(z);
    }
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });

  bool have_decay = false;
  double slowest = 0.0;
  for (const Complex& z : out.eigenvalues) {
    if (std::abs(z) < out.lambda_tol) {
      ++out.steady_count;
    } else if (!have_decay || z.real() > slowest) {
      slowest = z.real();
      have_decay = true;
    }
  }
  out.gap = have_decay ? std::abs(slowest) : 0.0;
  return out;
}

SteadyState steady_state(const Superoperator& sup, std::optional<double> lambda_tol) {
  return steady_state(sup, spectrum(sup, lambda_tol));
}

SteadyState steady_state(const Superoperator& sup, const SpectralSummary& summary) {
  if (summary.steady_count == 0) {
    throw NumericalError("steady_state: no eigenvalue below lambda_tol = " +
                         std::to_string(summary.lambda_tol));
  }
  const Eigen::Index d = sup.basis().dim();
  const Eigen::Index n = d * d;
  const RealMatrix r = real_representation(sup);
  const double shift = 1e-9 * std::max(r.norm(), 1e-300);

  // Inverse iteration on the blocks that carry trace; start from I/d.
  RealVector x = RealVector::Zero(n);
  for (Eigen::Index j = 0; j < d; ++j) x(j) = 1.0 / static_cast<double>(d);
  std::vector<std::pair<std::vector<Eigen::Index>, Eigen::PartialPivLU<RealMatrix>>> solvers;
  for (auto& block : sparsity_blocks(r)) {
    if (block.front() >= d) continue;  // diagonal basis elements come first
    RealMatrix sub = submatrix(r, block);
    sub.diagonal().array() -= shift;
    Eigen::PartialPivLU<RealMatrix> lu(sub);
    solvers.emplace_back(std::move(block), std::move(lu));
  }
  for (int iter = 0; iter < 8; ++iter) {
    RealVector next = RealVector::Zero(n);
    for (const auto& [block, lu] : solvers) {
      RealVector rhs(static_cast<Eigen::Index>(block.size()));
      for (std::size_t i = 0; i < block.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = x(block[i]);
      const RealVector sol = lu.solve(rhs);
      for (std::size_t i = 0; i < block.size(); ++i) next(block[i]) = sol(static_cast<Eigen::Index>(i));
    }
    const double norm = next.norm();
    if (!std::isfinite(norm) || norm == 0.0) {
      throw NumericalError("steady_state: inverse iteration broke down");
    }
    next /= norm;
    if (next.dot(x) < 0.0) next = -next;
    const double change = (next - x / x.norm()).norm();
    x = next;
    if (change < 1e-14) break;
  }

  const auto cols = hermitian_columns(d);
  ComplexVector v = ComplexVector::Zero(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& ca = cols[static_cast<std::size_t>(a)];
    for (int t = 0; t < ca.count; ++t) v(ca.index[t]) += ca.coef[t] * x(a);
  }
  ComplexMatrix rho = unvectorize(v, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const Complex tr = rho.trace();
  if (std::abs(tr) < 1e-12) throw NumericalError("steady_state: null vector is traceless");
  rho /= tr.real();

  SteadyState out;
  out.rho = std::move(rho);
  out.steady_count = summary.steady_count;
  out.degenerate = summary.steady_count > 1;
  out.residual = (sup.matrix() * vectorize(out.rho)).norm();
  return out;
}

ComplexMatrix apply_lindbladian(const spinops::SpinModel& model, const ComplexMatrix& rho) {
  const Eigen::Index d = model.basis.dim();
  if (rho.rows() != d || rho.cols() != d) throw DimensionError("apply_lindbladian: shape mismatch");
  ComplexMatrix out = -kI * (model.hamiltonian * rho - rho * model.hamiltonian);
  for (const auto& jump : model.jumps) {
    const ComplexMatrix ldl = jump.adjoint() * jump;
    out += 2.0 * jump * rho * jump.adjoint() - ldl * rho - rho * ldl;
  }
  return out;
}

double evolve_density(const spinops::SpinModel& model, const ComplexMatrix& rho0, double t_end,
                      const EvolveOptions& options, const DensityObserver& observer) {
  model.validate();
  const Eigen::Index d = model.basis.dim();
  check_density(rho0, d, 1e-10);
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw DomainError("evolve_density: t_end must be > 0");

  const ComplexMatrix& h = model.hamiltonian;
  std::vector<ComplexMatrix> jumps_dag;
  ComplexMatrix ldl_sum = ComplexMatrix::Zero(d, d);
  for (const auto& jump : model.jumps) {
    jumps_dag.push_back(jump.adjoint());
    ldl_sum += jumps_dag.back() * jump;
  }
  // Effective non-Hermitian generator: K = −iH − Σ L†L, so L̂ρ = Kρ + ρK† + 2Σ LρL†.
  const ComplexMatrix k = -kI * h - ldl_sum;

  auto rhs = [&](const ComplexVector& v) -> ComplexVector {
    const Eigen::Map<const ComplexMatrix> rho(v.data(), d, d);
    ComplexMatrix out = k * rho;
    out += out.adjoint().eval();
    for (std::size_t mu = 0; mu < model.jumps.size(); ++mu) {
      out.noalias() += 2.0 * (model.jumps[mu] * rho * jumps_dag[mu]);
    }
    return Eigen::Map<const ComplexVector>(out.data(), out.size());
  };

  double trace_residual = 0.0;
  auto on_sample = [&](double t, const ComplexVector& v) {
    const Eigen::Map<const ComplexMatrix> rho(v.data(), d, d);
    trace_residual = std::max(trace_residual, std::abs(rho.trace() - Complex(1.0, 0.0)));
    if (observer) observer(t, ComplexMatrix(rho));
  };
  auto hermitize = [&](ComplexVector& v) {
    Eigen::Map<ComplexMatrix> rho(v.data(), d, d);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    trace_residual = std::max(trace_residual, std::abs(rho.trace() - Complex(1.0, 0.0)));
    return true;
  };
  ode::integrate(rhs, vectorize(rho0), 0.0, t_end, options.sample_dt, options.tolerances, on_sample,
                 hermitize);
  return trace_residual;
}

DensityTrajectory evolve_density(const spinops::SpinModel& model, const ComplexMatrix& rho0,
                                 double t_end, const EvolveOptions& options) {
  DensityTrajectory out;
  out.trace_residual = evolve_density(model, rho0, t_end, options,
                                      [&](double t, const ComplexMatrix& rho) {
                                        out.times.push_back(t);
                                        out.states.push_back(rho);
                                      });
  return out;
}

Complex expectation(const ComplexMatrix& rho, const ComplexMatrix& op) {
  if (rho.rows() != rho.cols() || op.rows() != op.cols() || rho.rows() != op.rows()) {
    throw DimensionError("expectation: operator and density matrix dimensions differ");
  }
  return (op.cwiseProduct(rho.transpose())).sum();
}

}  // namespace ptctc::liouville
