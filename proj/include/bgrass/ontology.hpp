#pragma once

// AE relation graph, normalized Laplacian and the correlation prior built from it.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bgrass/ingest.hpp"

namespace bgrass {

// Information-borrowing strength: a positive real, or infinity (independent prior).
class Epsilon {
 public:
  static Epsilon infinite() { return Epsilon(true, 0.0); }
  // Throws std::invalid_argument unless value > 0 and finite.
  static Epsilon finite(double value);
  // Accepts "inf", "infinity", "Inf" or a positive number.
  static Epsilon parse(const std::string& text);

  bool is_infinite() const { return infinite_; }
  double value() const;
  std::string to_string() const;

  friend bool operator==(const Epsilon& a, const Epsilon& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  // Total order with infinity largest.
  friend bool operator<(const Epsilon& a, const Epsilon& b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.value_ < b.value_;
  }

 private:
  Epsilon(bool infinite, double value) : infinite_(infinite), value_(value) {}
  bool infinite_;
  double value_;
};

// {1e-3, 1e-2, 1e-1, 1, 10, 100, inf}.
std::vector<Epsilon> default_epsilon_grid();

struct OntologyGraph {
  int num_vertices = 0;
  // Sorted neighbour lists; symmetric, no self loops.
  std::vector<std::vector<int>> adjacency;
  // Group id -> sorted member AE indices (restricted to the modeled vocabulary).
  std::map<std::string, std::vector<int>> groups;

  int degree(int j) const { return static_cast<int>(adjacency[j].size()); }
  std::size_t num_edges() const;
};

OntologyGraph build_graph(const OntologyMapping& mapping, const std::vector<std::string>& ae_vocabulary);

// Graph from explicit group membership lists (used by the simulators).
OntologyGraph graph_from_groups(int num_vertices, const std::map<std::string, std::vector<int>>& groups);

// Normalized Laplacian: 1 on the diagonal, -1/sqrt(d_j d_k) on edges.
Eigen::SparseMatrix<double> laplacian_sparse(const OntologyGraph& graph);
Eigen::MatrixXd laplacian(const OntologyGraph& graph);

struct CorrelationStructure {
  Epsilon epsilon = Epsilon::infinite();
  // Dense correlation matrix Omega (identity when epsilon is infinite).
  Eigen::MatrixXd omega;
  // Diagonal of (L + eps I)^-1; all ones when epsilon is infinite.
  Eigen::VectorXd scale;
  // Omega^-1 = D^1/2 (L + eps I) D^1/2; shares the Laplacian's sparsity pattern.
  Eigen::SparseMatrix<double> precision;
  // Cholesky factor of `precision`, computed once at construction.
  std::shared_ptr<const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> precision_factor;

  int dimension() const { return static_cast<int>(omega.rows()); }
};

// Throws std::runtime_error (with an eigenvalue report) if L + eps I cannot be factorized.
CorrelationStructure correlation_from_precision(const Eigen::SparseMatrix<double>& laplacian, Epsilon epsilon);
CorrelationStructure correlation_from_graph(const OntologyGraph& graph, Epsilon epsilon);

// Debug dumps as comma-separated matrices.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

}  // namespace bgrass
