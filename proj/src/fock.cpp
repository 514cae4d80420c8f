#include "mfbose/fock.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/max_cardinality_matching.hpp>

#include "mfbose/error.hpp"
#include "mfbose/stats.hpp"

namespace mfbose {

namespace {

void check_rates(std::span<const double> rates, double T) {
  detail::require(!rates.empty(), "need at least one mode");
  detail::require(T > 0.0 && std::isfinite(T), "temperature must be positive");
  for (double l : rates) detail::require(std::isfinite(l), "rates must be finite");
}

// log P(n_j >= k) for k = 0..N
std::vector<double> log_tail(double lambda, const std::vector<double>& logZ, int N, double T) {
  std::vector<double> out(N + 1);
  for (int k = 0; k <= N; ++k) out[k] = -k * lambda / T + logZ[N - k] - logZ[N];
  return out;
}

}  // namespace

std::vector<double> free_canonical_partition(std::span<const double> rates, int N, double T) {
  check_rates(rates, T);
  detail::require(N >= 0, "particle number must be nonnegative");
  if (N > 1000000) throw PreconditionError("particle number above 1e6");
  // log Z_1(k/T) = log sum_j e^{-k l_j / T}
  std::vector<double> z1(N + 1), terms(rates.size());
  for (int k = 1; k <= N; ++k) {
    for (std::size_t j = 0; j < rates.size(); ++j) terms[j] = -k * rates[j] / T;
    z1[k] = logsumexp(terms);
  }
  std::vector<double> logZ(N + 1, 0.0), buf;
  for (int n = 1; n <= N; ++n) {
    buf.resize(n);
    for (int k = 1; k <= n; ++k) buf[k - 1] = z1[k] + logZ[n - k];
    logZ[n] = logsumexp(buf) - std::log(static_cast<double>(n));
  }
  return logZ;
}

CanonicalEnsembleData free_canonical_occupations(std::span<const double> rates, int N, double T, bool pairs) {
  CanonicalEnsembleData out;
  out.rates.assign(rates.begin(), rates.end());
  out.N = N;
  out.T = T;
  out.logZ = free_canonical_partition(rates, N, T);
  const int d = static_cast<int>(rates.size());
  std::vector<std::vector<double>> tails(d);
  for (int j = 0; j < d; ++j) {
    tails[j] = log_tail(rates[j], out.logZ, N, T);
    double s = 0.0;
    for (int k = 1; k <= N; ++k) s += std::exp(tails[j][k]);
    out.occupations.push_back(s);
  }
  if (!pairs) return out;
  out.pair_occupations = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    double s = 0.0;
    for (int k = 1; k <= N; ++k) s += (2.0 * k - 1.0) * std::exp(tails[j][k]);
    out.pair_occupations(j, j) = s;
    for (int l = j + 1; l < d; ++l) {
      double t = 0.0;
      for (int a = 1; a < N; ++a)
        for (int b = 1; a + b <= N; ++b)
          t += std::exp(-(a * rates[j] + b * rates[l]) / T + out.logZ[N - a - b] - out.logZ[N]);
      out.pair_occupations(j, l) = out.pair_occupations(l, j) = t;
    }
  }
  return out;
}

CanonicalEnsembleData enumerate_canonical(std::span<const double> rates, int N, double T) {
  check_rates(rates, T);
  const int d = static_cast<int>(rates.size());
  detail::require(sector_dimension(d, N) <= 2e6, "enumeration limited to 2e6 sequences");
  CanonicalEnsembleData out;
  out.rates.assign(rates.begin(), rates.end());
  out.N = N;
  out.T = T;
  for (int n = 0; n <= N; ++n) {
    const OccupationBasis b(d, n);
    std::vector<double> lw(b.size());
    for (int i = 0; i < b.size(); ++i) {
      double e = 0.0;
      for (int j = 0; j < d; ++j) e += b.state(i)[j] * rates[j];
      lw[i] = -e / T;
    }
    out.logZ.push_back(logsumexp(lw));
    if (n != N) continue;
    out.occupations.assign(d, 0.0);
    out.pair_occupations = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < b.size(); ++i) {
      const double p = std::exp(lw[i] - out.logZ.back());
      const auto s = b.state(i);
      for (int j = 0; j < d; ++j) {
        out.occupations[j] += p * s[j];
        for (int l = 0; l < d; ++l) out.pair_occupations(j, l) += p * s[j] * s[l];
      }
    }
  }
  return out;
}

double canonical_shift_bound(std::span<const double> rates, int N, double T, int k) {
  detail::require(k == 1 || k == 2, "shift bound for k = 1 or 2");
  const auto a = free_canonical_occupations(rates, N, T, k == 2);
  const auto b = free_canonical_occupations(rates, N + 1, T, k == 2);
  double m = 0.0;
  if (k == 1) {
    for (std::size_t j = 0; j < rates.size(); ++j) m = std::max(m, std::abs(a.occupations[j] - b.occupations[j]));
  } else {
    m = (a.pair_occupations - b.pair_occupations).cwiseAbs().maxCoeff();
  }
  return m;
}

ShiftSweep canonical_shift_sweep(std::span<const double> rates, double T, int N_max, int k) {
  detail::require(N_max >= 2, "shift sweep needs N_max >= 2");
  ShiftSweep out;
  std::vector<double> lx, ly;
  for (int n = 1; n <= N_max; ++n) {
    out.N.push_back(n);
    out.max_difference.push_back(canonical_shift_bound(rates, n, T, k));
    if (out.max_difference.back() > 0.0) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(out.max_difference.back()));
    }
  }
  if (lx.size() >= 2) out.growth_exponent = fit_line(lx, ly).slope;
  return out;
}

double grand_canonical_mu(std::span<const double> rates, double N_target, double T) {
  check_rates(rates, T);
  detail::require(N_target > 0.0 && std::isfinite(N_target), "target particle number must be positive");
  const double l1 = *std::min_element(rates.begin(), rates.end());
  // y = nu + lambda_1 > 0; the occupation sum decreases strictly in y
  auto total = [&](double y) {
    double s = 0.0;
    for (double l : rates) s += 1.0 / std::expm1((l - l1 + y) / T);
    return s;
  };
  double lo = T * 1e-300, hi = T;
  while (total(hi) > N_target) hi *= 2.0;
  while (total(lo) < N_target) lo *= 0.5;  // only for absurd targets near the floor
  for (int it = 0; it < 4000 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = lo > 0.0 && hi / lo > 4.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    (total(mid) > N_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi) - l1;
}

GrandCanonicalData grand_canonical_occupations(std::span<const double> rates, double nu, double T) {
  check_rates(rates, T);
  const double l1 = *std::min_element(rates.begin(), rates.end());
  detail::require(nu > -l1, "chemical potential must exceed -lambda_1");
  GrandCanonicalData out;
  out.nu = nu;
  out.T = T;
  const int d = static_cast<int>(rates.size());
  for (double l : rates) out.occupations.push_back(1.0 / std::expm1((l + nu) / T));
  out.pair_occupations.resize(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      const double nj = out.occupations[j], nk = out.occupations[k];
      out.pair_occupations(j, k) = nj * nk + (j == k ? nj * (1.0 + nj) : 0.0);
    }
  return out;
}

SectorWeights relaxed_sector_weights(std::span<const double> rates, double m, double T, double eps, int N_max) {
  check_rates(rates, T);
  detail::require(m > 0.0 && eps > 0.0, "relaxed weights need m > 0 and eps > 0");
  const double need = m * T + 10.0 * std::sqrt(eps * T * T / 2.0);
  if (N_max < need)
    throw PreconditionError("N_max " + std::to_string(N_max) + " below the window edge " + std::to_string(need));
  const auto logZ = free_canonical_partition(rates, N_max + 1, T);
  std::vector<double> lw(N_max + 2);
  for (int n = 0; n <= N_max + 1; ++n) {
    const double r = n / T - m;
    lw[n] = logZ[n] - r * r / eps;
  }
  SectorWeights out;
  out.m = m;
  out.T = T;
  out.eps = eps;
  const std::span<const double> kept(lw.data(), static_cast<std::size_t>(N_max) + 1);
  out.log_z_total = logsumexp(kept);
  // geometric bound on the neglected tail from the last ratio (log-concave beyond the window)
  const double log_ratio = lw[N_max + 1] - lw[N_max];
  const double log_tail = log_ratio < 0.0 ? lw[N_max] + log_ratio - std::log(-std::expm1(log_ratio)) : kInfinity;
  if (log_tail - out.log_z_total > std::log(1e-12))
    throw PreconditionError("sector window truncation loses more than 1e-12 of the mass; raise N_max");
  out.a.resize(N_max + 1);
  for (int n = 0; n <= N_max; ++n) out.a[n] = std::exp(lw[n] - out.log_z_total);
  out.moments.assign(5, 0.0);
  for (int n = 0; n <= N_max; ++n)
    for (int k = 0; k <= 4; ++k) out.moments[k] += out.a[n] * std::pow(n / T, k);
  return out;
}

FactorizationCoeffs factorization_coeffs(std::span<const double> rates, double split, int N, double T, double delta) {
  check_rates(rates, T);
  detail::require(N >= 1, "factorization needs N >= 1");
  detail::require(delta >= 0.0 && T * delta < N, "need 0 <= T delta < N");
  std::vector<double> lo, hi;
  for (double l : rates) (l <= split ? lo : hi).push_back(l);
  if (lo.empty()) throw PreconditionError("no mode lies at or below the split");
  FactorizationCoeffs out;
  out.n_low = static_cast<int>(lo.size());
  out.n_high = static_cast<int>(hi.size());
  out.N = N;
  out.T = T;
  out.delta = delta;
  out.M = static_cast<int>(std::ceil(N - T * delta - 1e-12));
  const auto zl = free_canonical_partition(lo, N, T);
  const auto zall = free_canonical_partition(rates, N, T);
  std::vector<double> zh(N + 1, -kInfinity);
  if (hi.empty())
    zh[0] = 0.0;
  else
    zh = free_canonical_partition(hi, N, T);
  std::vector<double> lc(N + 1);
  for (int n = 0; n <= N; ++n) lc[n] = zl[n] + zh[N - n];
  const double ls = logsumexp(lc);
  out.sector_residual = std::abs(ls - zall[N]);
  out.c.resize(N + 1);
  for (int n = 0; n <= N; ++n) out.c[n] = std::exp(lc[n] - zall[N]);
  out.D_M = 0.0;
  for (int n = std::max(out.M, 0); n <= N; ++n) out.D_M += out.c[n];
  out.dn.assign(N + 1, 0.0);
  for (int n = std::max(out.M, 0); n <= N; ++n) out.dn[n] = out.c[n] / out.D_M;
  return out;
}

double sector_dimension(int d, int N) {
  // C(N + d - 1, d - 1)
  double r = 1.0;
  for (int i = 1; i < d; ++i) r = r * (N + i) / i;
  return std::round(r);
}

OccupationBasis::OccupationBasis(int d, int N) : d_(d), N_(N) {
  detail::require(d >= 1 && N >= 0, "occupation basis needs d >= 1 and N >= 0");
  detail::require(sector_dimension(d, N) <= 2e6, "occupation basis above 2e6 states");
  ways_.assign(d + 1, std::vector<long>(N + 1, 0));
  ways_[d][0] = 1;
  for (int p = d - 1; p >= 0; --p)
    for (int r = 0; r <= N; ++r)
      for (int v = 0; v <= r; ++v) ways_[p][r] += ways_[p + 1][r - v];
  std::vector<int> cur(d);
  std::function<void(int, int)> rec = [&](int p, int rem) {
    if (p == d - 1) {
      cur[p] = rem;
      states_.insert(states_.end(), cur.begin(), cur.end());
      return;
    }
    for (int v = rem; v >= 0; --v) {
      cur[p] = v;
      rec(p + 1, rem - v);
    }
  };
  rec(0, N);
}

int OccupationBasis::index(std::span<const int> n) const {
  if (static_cast<int>(n.size()) != d_) return -1;
  int rem = N_;
  long rank = 0;
  for (int p = 0; p < d_; ++p) {
    if (n[p] < 0 || n[p] > rem) return -1;
    if (p == d_ - 1) return n[p] == rem ? static_cast<int>(rank) : -1;
    for (int v = n[p] + 1; v <= rem; ++v) rank += ways_[p + 1][rem - v];
    rem -= n[p];
  }
  return static_cast<int>(rank);
}

ManyBodyOperator build_interacting_hamiltonian(std::span<const double> rates, const WTensor& W, int N, double g) {
  const int d = static_cast<int>(rates.size());
  detail::require(N >= 1, "Hamiltonian needs N >= 1");
  detail::require(g == 0.0 || W.d >= d, "two-body tensor has fewer modes than the rates");
  const double dim = sector_dimension(d, N);
  if (dim > 2e4) throw PreconditionError("sector dimension " + std::to_string(dim) + " exceeds 2e4");
  ManyBodyOperator H;
  H.basis = OccupationBasis(d, N);
  H.N = N;
  H.d = d;
  H.g = g;
  const int D = H.basis.size();
  H.matrix = Eigen::MatrixXd::Zero(D, D);
  std::vector<int> s(d);
  for (int c = 0; c < D; ++c) {
    const auto st = H.basis.state(c);
    double e = 0.0;
    for (int j = 0; j < d; ++j) e += rates[j] * st[j];
    H.matrix(c, c) += e;
    if (g == 0.0) continue;
    const double pref = 0.5 * g / N;
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) {
        std::copy(st.begin(), st.end(), s.begin());
        // a_l a_k
        if (s[k] == 0) continue;
        double amp = std::sqrt(static_cast<double>(s[k]));
        --s[k];
        if (s[l] == 0) continue;
        amp *= std::sqrt(static_cast<double>(s[l]));
        --s[l];
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            const double wv = W(i, j, k, l);
            if (wv == 0.0) continue;
            // a+_i a+_j
            double a2 = amp * std::sqrt(s[j] + 1.0);
            ++s[j];
            a2 *= std::sqrt(s[i] + 1.0);
            ++s[i];
            const int r = H.basis.index(s);
            H.matrix(r, c) += pref * wv * a2;
            --s[i];
            --s[j];
          }
      }
  }
  const double scale = std::max(1.0, H.matrix.cwiseAbs().maxCoeff());
  H.hermitian_residual = (H.matrix - H.matrix.transpose()).cwiseAbs().maxCoeff() / scale;
  if (H.hermitian_residual > 1e-10)
    throw InternalError("Hamiltonian assembly is not symmetric (residual " + std::to_string(H.hermitian_residual) + ")");
  H.matrix = 0.5 * (H.matrix + H.matrix.transpose()).eval();
  return H;
}

Eigen::MatrixXd ThermalState::density() const {
  return vectors * probabilities.asDiagonal() * vectors.transpose();
}

ThermalState thermal_state(const ManyBodyOperator& H, double T) {
  detail::require(T > 0.0, "temperature must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.matrix);
  if (es.info() != Eigen::Success) throw ConvergenceError("Hamiltonian eigendecomposition failed", 0.0);
  ThermalState s;
  s.T = T;
  s.energies = es.eigenvalues();
  s.vectors = es.eigenvectors();
  std::vector<double> lw(s.energies.size());
  for (int i = 0; i < s.energies.size(); ++i) lw[i] = -s.energies[i] / T;
  s.logZ = logsumexp(lw);
  s.log_probabilities.resize(s.energies.size());
  s.probabilities.resize(s.energies.size());
  for (int i = 0; i < s.energies.size(); ++i) {
    s.log_probabilities[i] = lw[i] - s.logZ;
    s.probabilities[i] = std::exp(s.log_probabilities[i]);
  }
  return s;
}

Eigen::MatrixXd reduced_dm(const Eigen::MatrixXd& state, const OccupationBasis& basis, int k) {
  detail::require(k == 1 || k == 2, "reduced density matrices for k = 1 or 2");
  detail::require(k <= basis.particles(), "k exceeds the particle number");
  const int D = basis.size(), d = basis.modes();
  detail::require(state.rows() == D && state.cols() == D, "state does not match the occupation basis");
  std::vector<int> s(d);
  if (k == 1) {
    // Gamma^(1)_{ij} = Tr[a+_j a_i Gamma]
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (int c = 0; c < D; ++c) {
      const auto st = basis.state(c);
      for (int i = 0; i < d; ++i) {
        if (st[i] == 0) continue;
        for (int j = 0; j < d; ++j) {
          std::copy(st.begin(), st.end(), s.begin());
          double amp = std::sqrt(static_cast<double>(s[i]));
          --s[i];
          amp *= std::sqrt(s[j] + 1.0);
          ++s[j];
          g(i, j) += amp * state(c, basis.index(s));
        }
      }
    }
    return g;
  }
  // Gamma^(2)_{(ij),(kl)} = (1/2) Tr[a+_k a+_l a_j a_i Gamma]
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d * d, d * d);
  for (int c = 0; c < D; ++c) {
    const auto st = basis.state(c);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        std::copy(st.begin(), st.end(), s.begin());
        if (s[i] == 0) continue;
        double amp = std::sqrt(static_cast<double>(s[i]));
        --s[i];
        if (s[j] == 0) continue;
        amp *= std::sqrt(static_cast<double>(s[j]));
        --s[j];
        for (int l = 0; l < d; ++l)
          for (int kk = 0; kk < d; ++kk) {
            double a2 = amp * std::sqrt(s[l] + 1.0);
            ++s[l];
            a2 *= std::sqrt(s[kk] + 1.0);
            ++s[kk];
            g(i * d + j, kk * d + l) += 0.5 * a2 * state(c, basis.index(s));
            --s[kk];
            --s[l];
          }
      }
  }
  return g;
}

double pair_expectation(const WTensor& W, const Eigen::MatrixXd& gamma2) {
  const int d = W.d;
  detail::require(gamma2.rows() == d * d, "two-body density matrix does not match the tensor");
  double s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) s += W(i, j, k, l) * gamma2(k * d + l, i * d + j);
  return s;
}

namespace {

double entropy_term(const Eigen::VectorXd& p) {
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s += p[i] * std::log(p[i]);
  return s;
}

}  // namespace

double quantum_relative_entropy(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& xi) {
  detail::require(gamma.rows() == xi.rows() && gamma.cols() == xi.cols(), "states of different dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(gamma), ex(xi);
  const double a = entropy_term(eg.eigenvalues());
  // Tr[Gamma log Xi] = sum_i log(mu_i) <x_i|Gamma|x_i>
  const Eigen::MatrixXd gx = ex.eigenvectors().transpose() * gamma * ex.eigenvectors();
  double b = 0.0;
  for (int i = 0; i < xi.rows(); ++i) {
    const double mu = ex.eigenvalues()[i];
    const double w = gx(i, i);
    if (mu < 1e-300) {
      if (w > 1e-14) throw PreconditionError("reference state is rank deficient on the support of the state");
      continue;
    }
    b += w * std::log(mu);
  }
  return a - b;
}

double quantum_relative_entropy(const Eigen::MatrixXd& gamma, const ThermalState& xi) {
  detail::require(gamma.rows() == xi.vectors.rows(), "states of different dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(gamma);
  const double a = entropy_term(eg.eigenvalues());
  const Eigen::MatrixXd gx = xi.vectors.transpose() * gamma * xi.vectors;
  double b = 0.0;
  for (int i = 0; i < gx.rows(); ++i) b += gx(i, i) * xi.log_probabilities[i];
  return a - b;
}

double free_energy(const Eigen::MatrixXd& gamma, const ManyBodyOperator& H, double T) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(gamma, Eigen::EigenvaluesOnly);
  return (H.matrix * gamma).trace() + T * entropy_term(eg.eigenvalues());
}

namespace {

std::vector<std::vector<int>> bounded_compositions(std::span<const int> g, int N) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(g.size());
  std::function<void(std::size_t, int)> rec = [&](std::size_t p, int rem) {
    if (p == g.size()) {
      if (rem == 0) out.push_back(cur);
      return;
    }
    for (int v = std::min(rem, g[p]); v >= 0; --v) {
      cur[p] = v;
      rec(p + 1, rem - v);
    }
  };
  rec(0, N);
  return out;
}

}  // namespace

CannonMatching cannon_match(std::span<const int> g, int N) {
  detail::require(N >= 0, "N must be nonnegative");
  long total = 0;
  int support = 0;
  for (int v : g) {
    detail::require(v >= 0, "g entries must be nonnegative");
    total += v;
    support += v > 0 ? 1 : 0;
  }
  detail::require(total == 2L * N + 1, "g must sum to 2N + 1");
  detail::require(support <= 12 && N <= 8, "Cannon matching limited to support <= 12 and N <= 8");
  CannonMatching out;
  out.g.assign(g.begin(), g.end());
  out.N = N;
  out.domain = bounded_compositions(g, N);
  out.codomain = bounded_compositions(g, N + 1);
  const int a = static_cast<int>(out.domain.size()), b = static_cast<int>(out.codomain.size());

  // look up S_{N+1} members by their occupation vector
  std::vector<std::pair<std::vector<int>, int>> sorted;
  for (int i = 0; i < b; ++i) sorted.emplace_back(out.codomain[i], i);
  std::sort(sorted.begin(), sorted.end());
  auto find = [&](const std::vector<int>& n) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(n, -1));
    return it != sorted.end() && it->first == n ? it->second : -1;
  };

  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
  Graph graph(a + b);
  for (int i = 0; i < a; ++i) {
    auto n = out.domain[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (n[j] >= g[j]) continue;
      ++n[j];
      const int t = find(n);
      --n[j];
      if (t >= 0) boost::add_edge(i, a + t, graph);
    }
  }
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(a + b);
  boost::edmonds_maximum_cardinality_matching(graph, &mate[0]);
  const auto none = boost::graph_traits<Graph>::null_vertex();
  out.image.assign(a, -1);
  out.increment.assign(a, -1);
  for (int i = 0; i < a; ++i) {
    if (mate[i] == none) throw InternalError("Cannon matching is not perfect: the bijection does not exist");
    const int t = static_cast<int>(mate[i]) - a;
    out.image[i] = t;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (out.codomain[t][j] != out.domain[i][j]) out.increment[i] = static_cast<int>(j);
  }
  if (a != b) throw InternalError("|S_N| != |S_{N+1}|");
  return out;
}

}  // namespace mfbose
