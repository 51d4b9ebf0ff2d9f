#pragma once

#include <memory>
#include <string>
#include <vector>

namespace cartanlab {

/// Nonzero structure constant: [e_i, e_j] contains c * e_k.
struct BracketTerm {
  int k;
  int i;
  int j;
  double c;
};

/// Finite-dimensional matrix Lie algebra in a fixed basis.
///
/// Supported labels: "abelian:d", "so:m", "so:p,q".  The basis of so(m) is
/// E_ab = e_a (x) e_b - e_b (x) e_a over pairs a < b in lexicographic order.
/// For so(p,q) a cross-block pair uses the symmetric generator
/// K_ab = e_a (x) e_b + e_b (x) e_a, which satisfies tX I_pq = -I_pq X.
///
/// The inner product is the identity Gram in this basis.  The bracket is
/// rescaled once at construction so that |[X,Y]| <= |X| |Y| for all elements:
/// `scale` is the reciprocal of the norm of the bilinear bracket map, clamped
/// to at most 1, and the stored structure constants already include it.
class LieAlgebra {
 public:
  static std::shared_ptr<const LieAlgebra> make(const std::string& label);

  int dim() const { return dim_; }
  const std::string& label() const { return label_; }
  double scale() const { return scale_; }

  /// Rescaled structure constants, sparse.
  const std::vector<BracketTerm>& terms() const { return terms_; }
  double structure_constant(int k, int i, int j) const;

  /// out = [x, y] in coefficients; out may not alias x or y.
  void bracket(const double* x, const double* y, double* out) const;
  std::vector<double> bracket(const std::vector<double>& x,
                              const std::vector<double>& y) const;

  double inner(const double* x, const double* y) const;
  double inner(const std::vector<double>& x, const std::vector<double>& y) const;
  double norm(const double* x) const;
  double norm(const std::vector<double>& x) const;

  /// Generator matrices (row-major, matrix_size x matrix_size); empty for
  /// abelian algebras.
  int matrix_size() const { return msize_; }
  const std::vector<std::vector<double>>& basis_matrices() const {
    return basis_;
  }

 private:
  LieAlgebra() = default;

  int dim_ = 0;
  int msize_ = 0;
  std::string label_;
  double scale_ = 1.0;
  std::vector<BracketTerm> terms_;
  std::vector<double> dense_;  // c[k][i][j] rescaled, dim^3
  std::vector<std::vector<double>> basis_;
};

using AlgebraPtr = std::shared_ptr<const LieAlgebra>;

}  // namespace cartanlab
