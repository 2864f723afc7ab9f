#include "diffnet/network.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "format.hpp"

namespace diffnet {

namespace {

bool connected(const std::vector<std::vector<std::size_t>>& adjacency) {
  if (adjacency.empty()) return false;
  std::vector<bool> seen(adjacency.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    for (std::size_t l : adjacency[k]) {
      if (!seen[l]) {
        seen[l] = true;
        ++visited;
        stack.push_back(l);
      }
    }
  }
  return visited == adjacency.size();
}

}  // namespace

Topology Topology::build(std::size_t node_count, std::span<const Edge> edges) {
  if (node_count == 0) throw Error(ErrorCode::kIndexOutOfRange, "topology needs at least one node");
  std::vector<std::set<std::size_t>> sets(node_count);
  for (std::size_t k = 0; k < node_count; ++k) sets[k].insert(k);
  for (const auto& [a, b] : edges) {
    if (a < 1 || b < 1 || a > node_count || b > node_count) {
      std::ostringstream msg;
      msg << "edge (" << a << ", " << b << ") outside 1.." << node_count;
      throw Error(ErrorCode::kIndexOutOfRange, msg.str());
    }
    sets[a - 1].insert(b - 1);
    sets[b - 1].insert(a - 1);
  }
  Topology topology;
  topology.neighbors_.reserve(node_count);
  for (const auto& s : sets) topology.neighbors_.emplace_back(s.begin(), s.end());
  if (!connected(topology.neighbors_)) {
    throw Error(ErrorCode::kDisconnectedGraph, "graph has more than one component");
  }
  return topology;
}

bool Topology::adjacent(std::size_t l, std::size_t k) const {
  const auto& nk = neighbors_.at(k);
  return std::binary_search(nk.begin(), nk.end(), l);
}

std::vector<Edge> Topology::edges() const {
  std::vector<Edge> out;
  for (std::size_t k = 0; k < size(); ++k) {
    for (std::size_t l : neighbors_[k]) {
      if (l > k) out.emplace_back(k + 1, l + 1);
    }
  }
  return out;
}

Topology random_connected_topology(std::size_t node_count, std::uint64_t seed, double radius) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<std::pair<double, double>> points(node_count);
    for (auto& p : points) p = {unit(rng), unit(rng)};
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < node_count; ++a) {
      for (std::size_t b = a + 1; b < node_count; ++b) {
        const double dx = points[a].first - points[b].first;
        const double dy = points[a].second - points[b].second;
        if (dx * dx + dy * dy <= radius * radius) edges.emplace_back(a + 1, b + 1);
      }
    }
    try {
      return Topology::build(node_count, edges);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDisconnectedGraph) throw;
    }
  }
  throw Error(ErrorCode::kDisconnectedGraph, "no connected draw; increase the radius");
}

Topology read_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open topology file " + path.string());
  std::string line;
  std::optional<std::size_t> node_count;
  std::vector<Edge> edges;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<long long> values;
    long long v = 0;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
      throw Error(ErrorCode::kConfigError,
                  path.string() + ":" + std::to_string(line_no) + ": expected integers");
    }
    if (values.empty()) continue;
    if (!node_count) {
      if (values.size() != 1 || values[0] < 1) {
        throw Error(ErrorCode::kConfigError, path.string() + ": first line must be the node count");
      }
      node_count = static_cast<std::size_t>(values[0]);
      continue;
    }
    if (values.size() != 2 || values[0] < 1 || values[1] < 1) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  path.string() + ":" + std::to_string(line_no) + ": expected a 1-based pair 'l k'");
    }
    edges.emplace_back(static_cast<std::size_t>(values[0]), static_cast<std::size_t>(values[1]));
  }
  if (!node_count) throw Error(ErrorCode::kConfigError, path.string() + ": empty topology file");
  return Topology::build(*node_count, edges);
}

void write_topology(const Topology& topology, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << topology.size() << '\n';
  for (const auto& [l, k] : topology.edges()) out << l << ' ' << k << '\n';
}

CombinationMatrix combination_weights(const Topology& topology, CombinationRule rule) {
  const std::size_t n = topology.size();
  Matrix a = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& nk = topology.neighbors(k);
    if (rule == CombinationRule::kUniform) {
      for (std::size_t l : nk) a(l, k) = 1.0 / static_cast<double>(nk.size());
      continue;
    }
    double off_diagonal = 0.0;
    for (std::size_t l : nk) {
      if (l == k) continue;
      a(l, k) = 1.0 / static_cast<double>(std::max(nk.size(), topology.degree(l)));
      off_diagonal += a(l, k);
    }
    a(k, k) = 1.0 - off_diagonal;
  }
  return CombinationMatrix(std::move(a));
}

void write_combination_csv(const CombinationMatrix& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  const Matrix& a = weights.matrix();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (c) out << ',';
      out << detail::format_double(a(r, c));
    }
    out << '\n';
  }
}

NodeProfile::NodeProfile(Matrix regressor_covariance, NoiseSpec noise)
    : covariance_(std::move(regressor_covariance)), noise_(noise) {
  if (covariance_.rows() == 0 || covariance_.rows() != covariance_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "regressor covariance must be square and non-empty");
  }
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::kInvalidParameters, "regressor covariance is not symmetric");
  }
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidParameters, "regressor covariance is not positive definite");
  }
  factor_ = llt.matrixL();
  validate(noise_);
}

double noise_variance_from_snr(double snr_db, const Matrix& regressor_covariance,
                               const Vector& theta_o) {
  if (regressor_covariance.rows() != theta_o.size() || regressor_covariance.cols() != theta_o.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "covariance and theta_o sizes differ");
  }
  const double signal_power = theta_o.dot(regressor_covariance * theta_o);
  if (!(signal_power > 0.0)) {
    throw Error(ErrorCode::kNonPositiveSignalPower, "theta_o' R_u theta_o must be positive");
  }
  return signal_power * std::pow(10.0, -snr_db / 10.0);
}

Measurement make_measurement(RowVector u, const Vector& theta_now, double v) {
  Measurement m;
  m.d = u.dot(theta_now) + v;
  m.u = std::move(u);
  m.v = v;
  return m;
}

Measurement generate_measurement(const NodeProfile& profile, const Vector& theta_now, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(profile.dimension());
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
  RowVector u = (profile.regressor_factor() * z).transpose();
  const double v = sample(profile.noise(), rng);
  return make_measurement(std::move(u), theta_now, v);
}

GroundTruth::GroundTruth(Vector theta_o, Drift drift)
    : theta_o_(std::move(theta_o)), drift_(drift), omega_(Vector::Zero(theta_o_.size())) {
  if (const auto* walk = std::get_if<RandomWalk>(&drift_); walk && !(walk->q_variance >= 0.0)) {
    throw Error(ErrorCode::kInvalidParameters, "random-walk q_variance must be >= 0");
  }
}

Vector GroundTruth::step(Rng& rng) {
  const auto* walk = std::get_if<RandomWalk>(&drift_);
  if (!walk) return theta_o_;
  const double q_sd = std::sqrt(walk->q_variance);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < omega_.size(); ++i) {
    omega_[i] = RandomWalk::kDecay * omega_[i] + (q_sd > 0.0 ? q_sd * normal(rng) : 0.0);
  }
  return theta_o_ + omega_;
}

Vector normalized_ones(std::size_t dimension) {
  const auto d = static_cast<Eigen::Index>(dimension);
  return Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(dimension)));
}

std::vector<double> variance_profile(std::size_t node_count, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(lo, hi);
  std::vector<double> out(node_count);
  for (auto& v : out) v = uniform(rng);
  return out;
}

std::vector<double> read_variance_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open variance profile " + path.string());
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    double v = 0.0;
    while (fields >> v) {
      if (!(v > 0.0)) throw Error(ErrorCode::kConfigError, path.string() + ": variances must be > 0");
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace diffnet
