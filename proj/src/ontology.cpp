#include "bgrass/ontology.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bgrass {

Epsilon Epsilon::finite(double value) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw std::invalid_argument("epsilon must be positive (or infinite), got " + std::to_string(value));
  return Epsilon(false, value);
}

Epsilon Epsilon::parse(const std::string& text) {
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::tolower(c)));
  if (t == "inf" || t == "infinity" || t == "+inf") return infinite();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot parse epsilon '" + text + "'");
  }
  if (used != t.size()) throw std::invalid_argument("cannot parse epsilon '" + text + "'");
  if (std::isinf(v) && v > 0) return infinite();
  return finite(v);
}

double Epsilon::value() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

std::string Epsilon::to_string() const {
  if (infinite_) return "inf";
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(10) << value_;
  return out.str();
}

std::vector<Epsilon> default_epsilon_grid() {
  return {Epsilon::finite(1e-3), Epsilon::finite(1e-2), Epsilon::finite(1e-1), Epsilon::finite(1.0),
          Epsilon::finite(10.0), Epsilon::finite(100.0), Epsilon::infinite()};
}

std::size_t OntologyGraph::num_edges() const {
  std::size_t total = 0;
  for (const auto& nbrs : adjacency) total += nbrs.size();
  return total / 2;
}

OntologyGraph graph_from_groups(int num_vertices, const std::map<std::string, std::vector<int>>& groups) {
  OntologyGraph graph;
  graph.num_vertices = num_vertices;
  std::vector<std::set<int>> nbrs(num_vertices);
  for (const auto& [id, members_in] : groups) {
    std::vector<int> members(members_in);
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (int m : members)
      if (m < 0 || m >= num_vertices) throw std::invalid_argument("group '" + id + "' has out-of-range member");
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        nbrs[members[a]].insert(members[b]);
        nbrs[members[b]].insert(members[a]);
      }
    if (!members.empty()) graph.groups[id] = std::move(members);
  }
  graph.adjacency.reserve(num_vertices);
  for (auto& s : nbrs) graph.adjacency.emplace_back(s.begin(), s.end());
  return graph;
}

OntologyGraph build_graph(const OntologyMapping& mapping, const std::vector<std::string>& ae_vocabulary) {
  std::map<std::string, int> index;
  for (std::size_t j = 0; j < ae_vocabulary.size(); ++j) index[ae_vocabulary[j]] = static_cast<int>(j);
  std::map<std::string, std::vector<int>> groups;
  for (const auto& [term, group] : mapping.pairs) {
    const auto it = index.find(term);
    if (it != index.end()) groups[group].push_back(it->second);
  }
  return graph_from_groups(static_cast<int>(ae_vocabulary.size()), groups);
}

Eigen::SparseMatrix<double> laplacian_sparse(const OntologyGraph& graph) {
  const int n = graph.num_vertices;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int j = 0; j < n; ++j) {
    triplets.emplace_back(j, j, 1.0);
    const double dj = graph.degree(j);
    for (int k : graph.adjacency[j]) triplets.emplace_back(j, k, -1.0 / std::sqrt(dj * graph.degree(k)));
  }
  Eigen::SparseMatrix<double> lap(n, n);
  lap.setFromTriplets(triplets.begin(), triplets.end());
  return lap;
}

Eigen::MatrixXd laplacian(const OntologyGraph& graph) { return Eigen::MatrixXd(laplacian_sparse(graph)); }

CorrelationStructure correlation_from_precision(const Eigen::SparseMatrix<double>& lap, Epsilon epsilon) {
  using Sparse = Eigen::SparseMatrix<double>;
  const auto n = lap.rows();
  CorrelationStructure out;
  out.epsilon = epsilon;
  if (epsilon.is_infinite()) {
    out.omega = Eigen::MatrixXd::Identity(n, n);
    out.scale = Eigen::VectorXd::Ones(n);
    out.precision.resize(n, n);
    out.precision.setIdentity();
  } else {
    Sparse p = lap;
    for (Eigen::Index j = 0; j < n; ++j) p.coeffRef(j, j) += epsilon.value();
    p.makeCompressed();
    const Eigen::MatrixXd p_dense(p);
    Eigen::LLT<Eigen::MatrixXd> dense(p_dense);
    if (dense.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p_dense, Eigen::EigenvaluesOnly);
      const auto& ev = eig.eigenvalues();
      std::ostringstream msg;
      msg << "L + eps I is not positive definite (eps = " << epsilon.to_string() << ", min eigenvalue "
          << ev.minCoeff() << ", max eigenvalue " << ev.maxCoeff() << ", condition number "
          << ev.maxCoeff() / ev.minCoeff() << ")";
      throw std::runtime_error(msg.str());
    }
    const Eigen::MatrixXd m = dense.solve(Eigen::MatrixXd::Identity(n, n));
    out.scale = m.diagonal();
    const Eigen::VectorXd inv_sqrt = out.scale.array().rsqrt();
    out.omega = inv_sqrt.asDiagonal() * m * inv_sqrt.asDiagonal();
    out.omega = 0.5 * (out.omega + out.omega.transpose());
    out.omega.diagonal().setOnes();
    const Eigen::VectorXd sqrt_scale = out.scale.array().sqrt();
    out.precision = sqrt_scale.asDiagonal() * p * sqrt_scale.asDiagonal();
    out.precision.makeCompressed();
  }
  auto factor = std::make_shared<Eigen::SimplicialLLT<Sparse>>(out.precision);
  if (factor->info() != Eigen::Success)
    throw std::runtime_error("factorization of the correlation precision failed (eps = " + epsilon.to_string() + ")");
  out.precision_factor = std::move(factor);
  return out;
}

CorrelationStructure correlation_from_graph(const OntologyGraph& graph, Epsilon epsilon) {
  return correlation_from_precision(laplacian_sparse(graph), epsilon);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

}  // namespace bgrass
