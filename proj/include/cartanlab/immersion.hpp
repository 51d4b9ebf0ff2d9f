#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cartanlab/bank.hpp"
#include "cartanlab/cclab.hpp"
#include "cartanlab/forms.hpp"

namespace cartanlab {

/// Lattice sample of an immersion u: T^n -> R^N, stored as a periodic part
/// plus a covering-space linear part, u(x) = L x + P(x).  Channels are scalar
/// lattice fields; the linear part lets cylinders and graphs carry
/// non-periodic coordinates while every stored field stays periodic.
class ImmersionSample {
 public:
  ImmersionSample() = default;
  ImmersionSample(Grid grid, int target_dim);

  const Grid& grid() const { return grid_; }
  int n() const { return grid_.n(); }
  int target_dim() const { return target_dim_; }

  double* channel(int a);
  const double* channel(int a) const;
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Row-major N x n matrix L; contributes L(:,i) to every first derivative
  /// along axis i and nothing to second derivatives.
  void set_linear(std::vector<double> entries);
  const std::vector<double>& linear() const { return linear_; }
  double linear_entry(int a, int axis) const {
    return linear_[static_cast<std::size_t>(a) * grid_.n() + axis];
  }

 private:
  Grid grid_;
  int target_dim_ = 0;
  std::vector<double> data_;    // [a][point]
  std::vector<double> linear_;  // N x n, row-major
};

/// Pointwise first fundamental form g_ij, full n x n storage.
struct MetricField {
  Grid grid;
  int n = 0;
  std::vector<double> data;  // [i*n + j][point]

  MetricField() = default;
  MetricField(const Grid& g, int dim);
  double* entry(int i, int j);
  const double* entry(int i, int j) const;
  double min_det() const;
};

/// Pointwise orthonormal frame of R^N: columns 0..n-1 span the tangent image
/// (Gram-Schmidt in axis order), the remaining columns the normal space, and
/// det = +1 everywhere.  Normal signs propagate by continuity along the
/// lexicographic sweep; canonical seeding happens only at the origin or where
/// propagation degenerates.
struct FrameField {
  Grid grid;
  int n = 0;
  int N = 0;
  std::vector<double> data;  // [row*N + col][point]

  double* entry(int row, int col);
  const double* entry(int row, int col) const;
  double orthonormality_defect() const;  // max_p |E^T E - I|_inf
  double det_defect() const;             // max_p |det E - 1|
};

/// Coordinate-indexed second fundamental form II^m_ij = <d_ij u, nu_m>.
struct SffField {
  Grid grid;
  int n = 0;
  int codim = 0;
  std::vector<double> data;  // [(m*n + i)*n + j][point]

  SffField() = default;
  SffField(const Grid& g, int dim, int codimension);
  double* entry(int m, int i, int j);
  const double* entry(int m, int i, int j) const;
};

/// so(N) connection split into tangent, mixed and normal blocks.
struct ConnectionBlocks {
  Form top;    // n x n
  Form mixed;  // (N-n) x n
  Form perp;   // (N-n) x (N-n)
};

/// L^1 norms of the curvature blocks of d omega + omega ^ omega; intrinsic is
/// the tangent-block defect against the closed-form coframe connection and is
/// set only for n == 2.
struct GcrResiduals {
  double gauss = 0.0;
  double codazzi = 0.0;
  double ricci = 0.0;
  double intrinsic = -1.0;
};

// Fixtures.  All trigonometric fixtures take the T^2 lattice.
ImmersionSample immersion_clifford(const Grid& g);
ImmersionSample immersion_revolution(const Grid& g, double big_radius, double small_radius);
ImmersionSample immersion_cylinder(const Grid& g);
ImmersionSample immersion_graph(const Grid& g, const TrigPolyForm& height);
ImmersionSample immersion_corrugation(const Grid& g, double amplitude, double delta);
ImmersionSample immersion_affine(const Grid& g, const std::vector<double>& linear);

/// Plain-text lattice exchange format: header x_index_0..x_index_{n-1},
/// u_1..u_N, one row per grid point.  Loaded samples have zero linear part.
ImmersionSample load_immersion_csv(const std::string& path, const Grid& g, int target_dim);
void save_immersion_csv(const ImmersionSample& u, const std::string& path);

/// Centered first difference of channel a along `axis`, linear part included.
std::vector<double> immersion_partial(const ImmersionSample& u, int axis, int a);

MetricField first_fundamental_form(const ImmersionSample& u);
FrameField frame_field(const ImmersionSample& u);
SffField second_fundamental_form(const ImmersionSample& u, const FrameField& frame);

/// Integral of |H| sqrt(det g); H^m = g^ij II^m_ij.
double mean_curvature_mass(const ImmersionSample& u);
/// Integral of |II|^p sqrt(det g) with indices raised by g.
double sff_energy(const ImmersionSample& u, double p);
/// {L^inf, L^2} of the pointwise Frobenius gap between g and `target`.
std::pair<double, double> isometry_defect(const ImmersionSample& u, const MetricField& target);

/// theta^a_i = <e_a, d_i u>; vector-valued 1-form with abelian:N coefficients.
Form darboux_coframe(const ImmersionSample& u, const FrameField& frame);
/// omega_ab,i = (<d_i e_b, e_a> - <d_i e_a, e_b>) / 2; abelian:N*N, so(N)-valued.
Form connection_form(const FrameField& frame);
ConnectionBlocks split_connection(const Form& omega, int n);

/// Matrix wedge of two 1-forms: (A ^ B)_ab,(ij) = A_ac,i B_cb,j - A_ac,j B_cb,i.
Form matrix_wedge(const Form& a, int rows_a, int cols_a, const Form& b, int rows_b, int cols_b);
Form matrix_transpose(const Form& a, int rows, int cols);
/// Coefficient window [lo, lo+count) as a new abelian:count form.
Form slice_coeffs(const Form& a, int lo, int count);

/// || d theta + omega ^ theta ||_L2. The connection acts on frame columns
/// (dE = E omega), so the coframe obeys d theta + omega ^ theta = 0.
double structure_residual(const Form& theta, const Form& omega);
/// L^2 defect of omega^II against the frame-converted second fundamental form
/// contracted with the coframe.
double cartan_lemma_check(const SffField& sff, const Form& omega_mixed, const Form& theta_top);
/// Closed-form tangent connection from a two-dimensional coframe.
Form koszul_tangent_connection(const Form& theta_top);
/// Flatness residuals of the full so(N) connection, by block.
GcrResiduals gcr_residuals(const ImmersionSample& u);

struct ImmersionFamilyConfig {
  std::string kind = "clifford-osc";  // or "corrugation"
  double amplitude = 0.05;
  EpsilonSchedule schedule{0.125, 0.5, 4};
  GridPolicy policy{16, 8.0};
  double tol_rel = 0.05;
  double sff_p = 2.0;
  int bank_size = 8;
  std::uint64_t seed = 1;
  // Secant extrapolation: member gaps decay at least linearly, so two points
  // cancel the leading term and leave only the tail's curvature.
  int fit_points = 2;
  int metric_fit_points = 2;
  int threads = 1;
};

struct ImmersionSequenceReport {
  LimitReport quad;    // tangent quadratic-term pairings against a 2-form bank
  LimitReport metric;  // metric-defect pairings against a 0-form bank
  std::vector<double> sff_lp;
  std::vector<double> gcr_gauss;
  std::vector<double> gcr_codazzi;
  std::vector<double> gcr_ricci;
  GcrResiduals limit_gcr;
  std::vector<double> equi_fractions;
  std::vector<EquiIntCurve> equi;  // per member, masses of |omega^II|^2
  bool hypothesis_violation = false;
  std::string verdict;
  std::string note;
};

/// Weak-limit probe for an immersion family: pairs the tangent quadratic term
/// and the metric defect against fixed banks along the schedule, tracks the
/// second-fundamental-form L^p bound, and checks the limit against the member
/// flatness residuals.
ImmersionSequenceReport immersion_sequence_experiment(const ImmersionFamilyConfig& cfg);

struct CorrugationConfig {
  double amplitude = 0.05;
  EpsilonSchedule schedule{0.125, 0.5, 4};  // corrugation wavelengths
  GridPolicy policy{16, 16.0};
  std::vector<double> flatten_deltas{0.2, 0.1, 0.05, 0.025};
  int flatten_grid = 64;
  double rate_min = 0.9;
  int threads = 1;
};

struct CorrugationReport {
  std::vector<double> deltas;
  std::vector<int> grid_sizes;
  std::vector<double> masses;  // mean-curvature mass per corrugation member
  double mass_exponent = 0.0;  // log-log slope of mass against 1/delta
  std::vector<double> flatten_deltas;
  std::vector<double> flatten_defect_l2;
  std::vector<double> flatten_defect_linf;
  std::vector<double> flatten_masses;
  double defect_exponent = 0.0;  // log-log slope of the defect against delta
  bool pass = false;
  std::string note;
};

/// Two contrasting graph families: shrinking-wavelength corrugations whose
/// mean-curvature mass blows up like 1/delta, and shrinking-amplitude graphs
/// whose isometry defect against the flat metric vanishes while the mass
/// stays bounded.
CorrugationReport corrugation_experiment(const CorrugationConfig& cfg);

}  // namespace cartanlab
