#include "asiplab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace asiplab {

Discretization::Discretization(SystemSpec spec, int n_points, Interp interp,
                               FiberObservable observable)
    : spec_(std::move(spec)), observable_(observable), n_points_(n_points), interp_(interp) {
  if (n_points_ < 8) throw std::invalid_argument("grid needs at least 8 points");
  const int q = spec_.alphabet_size();
  rows_.resize(static_cast<std::size_t>(q));
  observable_nodes_.resize(static_cast<std::size_t>(q));
  for (Symbol e = 0; e < q; ++e) {
    auto& rows = rows_[static_cast<std::size_t>(e)];
    auto& g_nodes = observable_nodes_[static_cast<std::size_t>(e)];
    rows.resize(static_cast<std::size_t>(n_points_));
    g_nodes.resize(static_cast<std::size_t>(n_points_));
    for (int k = 0; k < n_points_; ++k) {
      const double w = GridFunction::node(n_points_, k);
      g_nodes[static_cast<std::size_t>(k)] = observable_(spec_, e, w);
      Row& row = rows[static_cast<std::size_t>(k)];
      row.preimage = inverse_branches(spec_, e, w);
      for (double z : row.preimage) {
        row.weight.push_back(std::exp(spec_.potential(e, z)));
        row.g.push_back(observable_(spec_, e, z));
        row.stencil.push_back(make_stencil(interp_, n_points_, z));
      }
    }
  }
}

template <class T>
std::vector<T> Discretization::coefficients(std::span<const T> u) const {
  if (static_cast<int>(u.size()) != n_points_) throw std::invalid_argument("grid size mismatch");
  std::vector<T> c(u.begin(), u.end());
  if (interp_ == Interp::cubic) spline_prefilter(std::span<T>(c));
  return c;
}

namespace {

template <class T>
T stencil_value(const Stencil& s, const std::vector<T>& c) {
  T acc{};
  for (int i = 0; i < s.size; ++i) {
    acc += s.weight[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(s.index[static_cast<std::size_t>(i)])];
  }
  return acc;
}

}  // namespace

std::vector<double> Discretization::apply(Symbol e, std::span<const double> u) const {
  const auto c = coefficients(u);
  const auto& rows = rows_.at(static_cast<std::size_t>(e));
  std::vector<double> out(static_cast<std::size_t>(n_points_));
  for (int k = 0; k < n_points_; ++k) {
    const Row& row = rows[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (std::size_t p = 0; p < row.preimage.size(); ++p) {
      acc += row.weight[p] * stencil_value(row.stencil[p], c);
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

std::vector<std::complex<double>> Discretization::apply(
    Symbol e, std::span<const std::complex<double>> u) const {
  return apply_twisted(e, u, 0.0);
}

std::vector<std::complex<double>> Discretization::apply_twisted(
    Symbol e, std::span<const std::complex<double>> u, double r) const {
  const auto c = coefficients(u);
  const auto& rows = rows_.at(static_cast<std::size_t>(e));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n_points_));
  for (int k = 0; k < n_points_; ++k) {
    const Row& row = rows[static_cast<std::size_t>(k)];
    std::complex<double> acc{};
    for (std::size_t p = 0; p < row.preimage.size(); ++p) {
      std::complex<double> w = row.weight[p];
      if (r != 0.0) w *= std::polar(1.0, r * row.g[p]);
      acc += w * stencil_value(row.stencil[p], c);
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

std::vector<double> Discretization::adjoint(Symbol e, std::span<const double> weights) const {
  if (static_cast<int>(weights.size()) != n_points_) {
    throw std::invalid_argument("grid size mismatch");
  }
  const auto& rows = rows_.at(static_cast<std::size_t>(e));
  std::vector<double> out(static_cast<std::size_t>(n_points_), 0.0);
  for (int k = 0; k < n_points_; ++k) {
    const Row& row = rows[static_cast<std::size_t>(k)];
    const double wk = weights[static_cast<std::size_t>(k)];
    if (wk == 0.0) continue;
    for (std::size_t p = 0; p < row.preimage.size(); ++p) {
      const Stencil& s = row.stencil[p];
      const double f = wk * row.weight[p];
      for (int i = 0; i < s.size; ++i) {
        out[static_cast<std::size_t>(s.index[static_cast<std::size_t>(i)])] +=
            f * s.weight[static_cast<std::size_t>(i)];
      }
    }
  }
  if (interp_ == Interp::cubic) spline_prefilter(std::span<double>(out));
  return out;
}

const std::vector<double>& Discretization::observable_nodes(Symbol e) const {
  return observable_nodes_.at(static_cast<std::size_t>(e));
}

GridFunction transfer_apply(const Discretization& disc, const BasePoint& x, const GridFunction& u) {
  FiberTag tag = u.tag();
  ++tag.step;
  return GridFunction(disc.apply(x.symbol(0), u.values()), disc.interp(), tag);
}

namespace {

void check_lengths(int n, OperatorKind kind, std::size_t n_lambdas, std::size_t n_r) {
  if (n < 0) throw std::invalid_argument("iterate depth must be >= 0");
  const auto un = static_cast<std::size_t>(n);
  if (kind != OperatorKind::raw && n_lambdas != un) {
    throw std::invalid_argument("lambda chain has " + std::to_string(n_lambdas) +
                                " entries, expected " + std::to_string(n));
  }
  if (kind == OperatorKind::perturbed && n_r != un) {
    throw std::invalid_argument("r sequence has " + std::to_string(n_r) + " entries, expected " +
                                std::to_string(n));
  }
}

}  // namespace

ComplexGridFunction transfer_iterate(const Discretization& disc, const BasePoint& x,
                                     const ComplexGridFunction& u, int n, OperatorKind kind,
                                     std::span<const double> lambdas,
                                     std::span<const double> r_sequence) {
  check_lengths(n, kind, lambdas.size(), r_sequence.size());
  std::vector<std::complex<double>> v = u.values();
  for (int j = 0; j < n; ++j) {
    const Symbol e = x.symbol(j);
    const double r = kind == OperatorKind::perturbed ? r_sequence[static_cast<std::size_t>(j)] : 0.0;
    v = disc.apply_twisted(e, v, r);
    if (kind != OperatorKind::raw) {
      const double inv = 1.0 / lambdas[static_cast<std::size_t>(j)];
      for (auto& val : v) val *= inv;
    }
  }
  FiberTag tag = u.tag();
  tag.step += n;
  return ComplexGridFunction(std::move(v), disc.interp(), tag);
}

GridFunction transfer_iterate(const Discretization& disc, const BasePoint& x, const GridFunction& u,
                              int n, OperatorKind kind, std::span<const double> lambdas) {
  if (kind == OperatorKind::perturbed) {
    throw std::invalid_argument("perturbed iterates are complex valued");
  }
  check_lengths(n, kind, lambdas.size(), 0);
  std::vector<double> v = u.values();
  for (int j = 0; j < n; ++j) {
    v = disc.apply(x.symbol(j), v);
    if (kind != OperatorKind::raw) {
      const double inv = 1.0 / lambdas[static_cast<std::size_t>(j)];
      for (auto& val : v) val *= inv;
    }
  }
  FiberTag tag = u.tag();
  tag.step += n;
  return GridFunction(std::move(v), disc.interp(), tag);
}

ComplexGridFunction OrbitOperator::apply(const Discretization& disc,
                                         const ComplexGridFunction& u) const {
  return transfer_iterate(disc, start, u, depth, kind, lambda_chain, r_sequence);
}

OrbitOperator OrbitOperator::then(const OrbitOperator& next) const {
  if (!(next.start == start.shifted(depth))) {
    throw std::invalid_argument("composed operator does not start on the end fiber");
  }
  if ((kind == OperatorKind::raw) != (next.kind == OperatorKind::raw)) {
    throw std::invalid_argument("cannot compose raw and normalized operators");
  }
  OrbitOperator out;
  out.start = start;
  out.depth = depth + next.depth;
  out.kind = kind == next.kind ? kind : OperatorKind::perturbed;
  if (out.kind != OperatorKind::raw) {
    out.lambda_chain = lambda_chain;
    out.lambda_chain.insert(out.lambda_chain.end(), next.lambda_chain.begin(),
                            next.lambda_chain.end());
  }
  if (out.kind == OperatorKind::perturbed) {
    auto r_of = [](const OrbitOperator& op) {
      return op.kind == OperatorKind::perturbed ? op.r_sequence
                                                : std::vector<double>(static_cast<std::size_t>(op.depth), 0.0);
    };
    out.r_sequence = r_of(*this);
    const auto tail = r_of(next);
    out.r_sequence.insert(out.r_sequence.end(), tail.begin(), tail.end());
  }
  return out;
}

namespace {

void check_budget(const SystemSpec& spec, const BasePoint& x, int n, std::size_t budget) {
  double leaves = 1.0;
  for (int j = 0; j < n; ++j) leaves *= spec.degree(x.symbol(j));
  if (leaves > static_cast<double>(budget)) {
    throw std::length_error("preimage tree has " + std::to_string(static_cast<long long>(leaves)) +
                            " leaves, budget is " + std::to_string(budget));
  }
}

struct OracleContext {
  const SystemSpec* spec;
  const FiberObservable* g;
  std::vector<Symbol> symbols;
  const FiberCallable* u;
  OperatorKind kind;
  std::span<const double> lambdas;
  std::span<const double> r;
};

// (L^m u)(w) on fiber tau^m x.
std::complex<double> oracle_level(const OracleContext& ctx, int m, double w) {
  if (m == 0) return (*ctx.u)(w);
  const Symbol e = ctx.symbols[static_cast<std::size_t>(m - 1)];
  std::complex<double> acc{};
  for (double z : inverse_branches(*ctx.spec, e, w)) {
    std::complex<double> weight = std::exp(ctx.spec->potential(e, z));
    if (ctx.kind == OperatorKind::perturbed) {
      weight *= std::polar(1.0, ctx.r[static_cast<std::size_t>(m - 1)] * (*ctx.g)(*ctx.spec, e, z));
    }
    acc += weight * oracle_level(ctx, m - 1, z);
  }
  if (ctx.kind != OperatorKind::raw) acc /= ctx.lambdas[static_cast<std::size_t>(m - 1)];
  return acc;
}

// Sum over leaves of the depth-m tree below w; `weight` carries the product
// of normalized potentials from the root.
std::complex<double> twisted_level(const OracleContext& ctx, int m, double w, double weight) {
  if (m == 0) {
    double phase = 0.0;
    double z = w;
    for (std::size_t j = 0; j < ctx.symbols.size(); ++j) {
      phase += ctx.r[j] * (*ctx.g)(*ctx.spec, ctx.symbols[j], z);
      z = ctx.spec->map(ctx.symbols[j], z);
    }
    return weight * std::polar(1.0, phase) * (*ctx.u)(w);
  }
  const Symbol e = ctx.symbols[static_cast<std::size_t>(m - 1)];
  const double inv = 1.0 / ctx.lambdas[static_cast<std::size_t>(m - 1)];
  std::complex<double> acc{};
  for (double z : inverse_branches(*ctx.spec, e, w)) {
    acc += twisted_level(ctx, m - 1, z, weight * std::exp(ctx.spec->potential(e, z)) * inv);
  }
  return acc;
}

}  // namespace

std::complex<double> oracle_transfer(const SystemSpec& spec, const FiberObservable& g,
                                     const BasePoint& x, const FiberCallable& u, int n, double w,
                                     OperatorKind kind, std::span<const double> lambdas,
                                     std::span<const double> r_sequence,
                                     std::size_t branch_budget) {
  check_lengths(n, kind, lambdas.size(), r_sequence.size());
  check_budget(spec, x, n, branch_budget);
  OracleContext ctx{&spec, &g, {}, &u, kind, lambdas, r_sequence};
  for (int j = 0; j < n; ++j) ctx.symbols.push_back(x.symbol(j));
  return oracle_level(ctx, n, w);
}

std::complex<double> oracle_twisted_normalized(const SystemSpec& spec, const FiberObservable& g,
                                               const BasePoint& x, const FiberCallable& u,
                                               double w, std::span<const double> lambdas,
                                               std::span<const double> r_sequence,
                                               std::size_t branch_budget) {
  const int n = static_cast<int>(r_sequence.size());
  check_lengths(n, OperatorKind::perturbed, lambdas.size(), r_sequence.size());
  check_budget(spec, x, n, branch_budget);
  OracleContext ctx{&spec, &g, {}, &u, OperatorKind::perturbed, lambdas, r_sequence};
  for (int j = 0; j < n; ++j) ctx.symbols.push_back(x.symbol(j));
  return twisted_level(ctx, n, w, 1.0);
}

GridFunction projection_Q(const GridFunction& u, const FiberMeasure& nu_x,
                          const GridFunction& rho_end) {
  const double c = nu_x.integrate(u);
  GridFunction out = rho_end;
  for (auto& v : out.values()) v *= c;
  return out;
}

ComplexGridFunction projection_Q(const ComplexGridFunction& u, const FiberMeasure& nu_x,
                                 const GridFunction& rho_end) {
  const std::complex<double> c = nu_x.integrate(u);
  std::vector<std::complex<double>> v(rho_end.values().begin(), rho_end.values().end());
  for (auto& val : v) val *= c;
  return ComplexGridFunction(std::move(v), rho_end.interp(), rho_end.tag());
}

ChainIdentityReport perturbed_chain_identity_check(const Discretization& disc, const BasePoint& x,
                                                   const FiberCallable& u,
                                                   std::span<const double> r_sequence,
                                                   std::span<const double> lambdas) {
  const int n = static_cast<int>(r_sequence.size());
  const int N = disc.n_points();
  const SystemSpec& spec = disc.spec();

  std::vector<std::complex<double>> rhs(static_cast<std::size_t>(N));
  ChainIdentityReport report;
  for (int k = 0; k < N; ++k) {
    const double w = GridFunction::node(N, k);
    const auto lhs = oracle_transfer(spec, disc.observable(), x, u, n, w, OperatorKind::perturbed,
                                     lambdas, r_sequence);
    rhs[static_cast<std::size_t>(k)] =
        oracle_twisted_normalized(spec, disc.observable(), x, u, w, lambdas, r_sequence);
    report.oracle_discrepancy =
        std::max(report.oracle_discrepancy, std::abs(lhs - rhs[static_cast<std::size_t>(k)]));
  }

  auto grid_chain = [&](const Discretization& d) {
    auto u0 = ComplexGridFunction::sample(d.n_points(), d.interp(), u);
    return transfer_iterate(d, x, u0, n, OperatorKind::perturbed, lambdas, r_sequence);
  };
  const auto fine = grid_chain(disc);
  for (int k = 0; k < N; ++k) {
    report.grid_discrepancy =
        std::max(report.grid_discrepancy, std::abs(fine[k] - rhs[static_cast<std::size_t>(k)]));
  }

  const Discretization half(spec, N / 2, disc.interp(), disc.observable());
  const auto coarse = grid_chain(half);
  double diff = 0.0;
  for (int k = 0; k < N / 2; ++k) diff = std::max(diff, std::abs(coarse[k] - fine[2 * k]));
  const double shrink = std::pow(2.0, interp_order(disc.interp())) - 1.0;
  report.grid_budget = 2.0 * diff / shrink + 1e-12;
  return report;
}

}  // namespace asiplab
