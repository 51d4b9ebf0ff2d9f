#include "cartanlab/immersion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cartanlab/errors.hpp"

namespace cartanlab {
namespace {

constexpr double kTwoPi = 6.28318530717958647692528676655900577;
constexpr double kFrameTol = 1e-8;

// Lexicographic point walk (last axis fastest, matching flat index order)
// with periodic neighbor lookup.
struct Walker {
  const Grid* g;
  int idx[4] = {0, 0, 0, 0};

  explicit Walker(const Grid& grid) : g(&grid) {}

  void advance() {
    for (int ax = g->n() - 1; ax >= 0; --ax) {
      if (++idx[ax] < g->size(ax)) return;
      idx[ax] = 0;
    }
  }
  std::size_t up(std::size_t p, int ax) const {
    const std::size_t s = g->stride(ax);
    return idx[ax] + 1 < g->size(ax) ? p + s : p + s - s * g->size(ax);
  }
  std::size_t dn(std::size_t p, int ax) const {
    const std::size_t s = g->stride(ax);
    return idx[ax] > 0 ? p - s : p - s + s * g->size(ax);
  }
};

// Centered first differences of every channel: out[axis][a*npoints + p].
std::vector<std::vector<double>> all_partials(const ImmersionSample& u) {
  const Grid& g = u.grid();
  const int n = g.n();
  const int N = u.target_dim();
  const std::size_t np = g.npoints();
  std::vector<std::vector<double>> out(n);
  for (int ax = 0; ax < n; ++ax) {
    out[ax].resize(static_cast<std::size_t>(N) * np);
    const double inv2h = 1.0 / (2.0 * g.spacing(ax));
    Walker w(g);
    for (std::size_t p = 0; p < np; ++p, w.advance()) {
      const std::size_t pu = w.up(p, ax);
      const std::size_t pd = w.dn(p, ax);
      for (int a = 0; a < N; ++a) {
        const double* ch = u.channel(a);
        out[ax][static_cast<std::size_t>(a) * np + p] =
            (ch[pu] - ch[pd]) * inv2h + u.linear_entry(a, ax);
      }
    }
  }
  return out;
}

// In-place determinant of a small row-major matrix; destroys the input.
double small_det(double* m, int dim) {
  double det = 1.0;
  for (int c = 0; c < dim; ++c) {
    int piv = c;
    for (int r = c + 1; r < dim; ++r)
      if (std::abs(m[r * dim + c]) > std::abs(m[piv * dim + c])) piv = r;
    if (piv != c) {
      for (int k = 0; k < dim; ++k) std::swap(m[c * dim + k], m[piv * dim + k]);
      det = -det;
    }
    const double d = m[c * dim + c];
    if (d == 0.0) return 0.0;
    det *= d;
    for (int r = c + 1; r < dim; ++r) {
      const double f = m[r * dim + c] / d;
      for (int k = c; k < dim; ++k) m[r * dim + k] -= f * m[c * dim + k];
    }
  }
  return det;
}

// Gauss-Jordan inverse of a small row-major matrix; returns the determinant.
double small_inverse(const double* m, int dim, double* inv) {
  double a[16];
  std::memcpy(a, m, sizeof(double) * dim * dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) inv[r * dim + c] = (r == c) ? 1.0 : 0.0;
  double det = 1.0;
  for (int c = 0; c < dim; ++c) {
    int piv = c;
    for (int r = c + 1; r < dim; ++r)
      if (std::abs(a[r * dim + c]) > std::abs(a[piv * dim + c])) piv = r;
    if (piv != c) {
      for (int k = 0; k < dim; ++k) {
        std::swap(a[c * dim + k], a[piv * dim + k]);
        std::swap(inv[c * dim + k], inv[piv * dim + k]);
      }
      det = -det;
    }
    const double d = a[c * dim + c];
    if (d == 0.0) return 0.0;
    det *= d;
    const double invd = 1.0 / d;
    for (int k = 0; k < dim; ++k) {
      a[c * dim + k] *= invd;
      inv[c * dim + k] *= invd;
    }
    for (int r = 0; r < dim; ++r) {
      if (r == c) continue;
      const double f = a[r * dim + c];
      if (f == 0.0) continue;
      for (int k = 0; k < dim; ++k) {
        a[r * dim + k] -= f * a[c * dim + k];
        inv[r * dim + k] -= f * inv[c * dim + k];
      }
    }
  }
  return det;
}

void require_surface(const Grid& g, const char* what) {
  if (g.n() != 2) throw ArgumentError(std::string(what) + " needs a two-dimensional base");
}

// Oscillation wavelengths must tile the torus exactly and stay resolved:
// an integer number of waves and at least 8 cells per wave.
void check_wavelength(const Grid& g, int axis, double eps, const char* what) {
  if (eps <= 0.0) throw ConfigError(std::string(what) + ": wavelength must be positive");
  const double waves = g.period(axis) / eps;
  if (std::abs(waves - std::round(waves)) > 1e-9 * std::max(1.0, waves))
    throw ConfigError(std::string(what) + ": wavelength does not divide the period");
  if (g.size(axis) * eps < 8.0 * g.period(axis) - 1e-9)
    throw ConfigError(std::string(what) + ": fewer than 8 cells per wave");
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int m = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = m * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (m * sxy - sx * sy) / denom;
}

}  // namespace

ImmersionSample::ImmersionSample(Grid grid, int target_dim)
    : grid_(std::move(grid)), target_dim_(target_dim) {
  if (target_dim_ < grid_.n())
    throw ArgumentError("immersion target dimension is below the base dimension");
  if (target_dim_ > 8) throw ArgumentError("immersion target dimension is capped at 8");
  data_.assign(static_cast<std::size_t>(target_dim_) * grid_.npoints(), 0.0);
  linear_.assign(static_cast<std::size_t>(target_dim_) * grid_.n(), 0.0);
}

double* ImmersionSample::channel(int a) {
  return data_.data() + static_cast<std::size_t>(a) * grid_.npoints();
}

const double* ImmersionSample::channel(int a) const {
  return data_.data() + static_cast<std::size_t>(a) * grid_.npoints();
}

void ImmersionSample::set_linear(std::vector<double> entries) {
  if (entries.size() != linear_.size())
    throw ArgumentError("linear part must be target_dim x n");
  linear_ = std::move(entries);
}

MetricField::MetricField(const Grid& g, int dim) : grid(g), n(dim) {
  data.assign(static_cast<std::size_t>(n) * n * g.npoints(), 0.0);
}

double* MetricField::entry(int i, int j) {
  return data.data() + static_cast<std::size_t>(i * n + j) * grid.npoints();
}

const double* MetricField::entry(int i, int j) const {
  return data.data() + static_cast<std::size_t>(i * n + j) * grid.npoints();
}

double MetricField::min_det() const {
  const std::size_t np = grid.npoints();
  double lo = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    double m[16];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m[i * n + j] = entry(i, j)[p];
    const double d = small_det(m, n);
    lo = (p == 0) ? d : std::min(lo, d);
  }
  return lo;
}

double* FrameField::entry(int row, int col) {
  return data.data() + static_cast<std::size_t>(row * N + col) * grid.npoints();
}

const double* FrameField::entry(int row, int col) const {
  return data.data() + static_cast<std::size_t>(row * N + col) * grid.npoints();
}

double FrameField::orthonormality_defect() const {
  const std::size_t np = grid.npoints();
  double worst = 0.0;
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) {
      const double want = (a == b) ? 1.0 : 0.0;
      for (std::size_t p = 0; p < np; ++p) {
        double dot = 0.0;
        for (int r = 0; r < N; ++r) dot += entry(r, a)[p] * entry(r, b)[p];
        worst = std::max(worst, std::abs(dot - want));
      }
    }
  return worst;
}

double FrameField::det_defect() const {
  const std::size_t np = grid.npoints();
  double worst = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    double m[64];
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) m[r * N + c] = entry(r, c)[p];
    worst = std::max(worst, std::abs(small_det(m, N) - 1.0));
  }
  return worst;
}

SffField::SffField(const Grid& g, int dim, int codimension)
    : grid(g), n(dim), codim(codimension) {
  data.assign(static_cast<std::size_t>(codim) * n * n * g.npoints(), 0.0);
}

double* SffField::entry(int m, int i, int j) {
  return data.data() + static_cast<std::size_t>((m * n + i) * n + j) * grid.npoints();
}

const double* SffField::entry(int m, int i, int j) const {
  return data.data() + static_cast<std::size_t>((m * n + i) * n + j) * grid.npoints();
}

ImmersionSample immersion_clifford(const Grid& g) {
  require_surface(g, "clifford torus");
  ImmersionSample u(g, 4);
  const std::size_t np = g.npoints();
  Walker w(g);
  std::vector<double> cx(g.size(0)), sx(g.size(0)), cy(g.size(1)), sy(g.size(1));
  for (int i = 0; i < g.size(0); ++i) {
    cx[i] = std::cos(kTwoPi * g.coord(0, i) / g.period(0));
    sx[i] = std::sin(kTwoPi * g.coord(0, i) / g.period(0));
  }
  for (int i = 0; i < g.size(1); ++i) {
    cy[i] = std::cos(kTwoPi * g.coord(1, i) / g.period(1));
    sy[i] = std::sin(kTwoPi * g.coord(1, i) / g.period(1));
  }
  for (std::size_t p = 0; p < np; ++p, w.advance()) {
    u.channel(0)[p] = cx[w.idx[0]];
    u.channel(1)[p] = sx[w.idx[0]];
    u.channel(2)[p] = cy[w.idx[1]];
    u.channel(3)[p] = sy[w.idx[1]];
  }
  return u;
}

ImmersionSample immersion_revolution(const Grid& g, double big_radius, double small_radius) {
  require_surface(g, "torus of revolution");
  if (!(big_radius > small_radius) || !(small_radius > 0.0))
    throw ArgumentError("torus of revolution needs R > r > 0");
  ImmersionSample u(g, 3);
  const std::size_t np = g.npoints();
  Walker w(g);
  for (std::size_t p = 0; p < np; ++p, w.advance()) {
    const double phi = kTwoPi * g.coord(0, w.idx[0]) / g.period(0);
    const double psi = kTwoPi * g.coord(1, w.idx[1]) / g.period(1);
    const double rad = big_radius + small_radius * std::cos(psi);
    u.channel(0)[p] = rad * std::cos(phi);
    u.channel(1)[p] = rad * std::sin(phi);
    u.channel(2)[p] = small_radius * std::sin(psi);
  }
  return u;
}

ImmersionSample immersion_cylinder(const Grid& g) {
  require_surface(g, "cylinder");
  ImmersionSample u(g, 3);
  const std::size_t np = g.npoints();
  Walker w(g);
  for (std::size_t p = 0; p < np; ++p, w.advance()) {
    const double phi = kTwoPi * g.coord(0, w.idx[0]) / g.period(0);
    u.channel(0)[p] = std::cos(phi);
    u.channel(1)[p] = std::sin(phi);
  }
  u.set_linear({0.0, 0.0, 0.0, 0.0, 0.0, 1.0});
  return u;
}

ImmersionSample immersion_graph(const Grid& g, const TrigPolyForm& height) {
  require_surface(g, "graph");
  if (height.n() != 2 || height.degree() != 0 || height.algebra()->dim() != 1)
    throw ArgumentError("graph height must be a scalar 0-form profile");
  ImmersionSample u(g, 3);
  Form h = height.sample(g);
  const double* hv = h.field(0, 0);
  std::copy(hv, hv + g.npoints(), u.channel(2));
  u.set_linear({1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  return u;
}

ImmersionSample immersion_corrugation(const Grid& g, double amplitude, double delta) {
  require_surface(g, "corrugation");
  check_wavelength(g, 0, delta, "corrugation");
  ImmersionSample u(g, 3);
  const std::size_t np = g.npoints();
  std::vector<double> prof(g.size(0));
  for (int i = 0; i < g.size(0); ++i)
    prof[i] = delta * amplitude * std::sin(kTwoPi * g.coord(0, i) / delta);
  Walker w(g);
  for (std::size_t p = 0; p < np; ++p, w.advance()) u.channel(2)[p] = prof[w.idx[0]];
  u.set_linear({1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  return u;
}

ImmersionSample immersion_affine(const Grid& g, const std::vector<double>& linear) {
  if (linear.empty() || linear.size() % g.n() != 0)
    throw ArgumentError("affine part must be target_dim x n");
  const int N = static_cast<int>(linear.size()) / g.n();
  ImmersionSample u(g, N);
  u.set_linear(linear);
  return u;
}

void save_immersion_csv(const ImmersionSample& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const Grid& g = u.grid();
  const int n = g.n();
  const int N = u.target_dim();
  for (int ax = 0; ax < n; ++ax) out << "x_index_" << ax << ",";
  for (int a = 0; a < N; ++a) out << "u_" << (a + 1) << (a + 1 == N ? "" : ",");
  out << "\n";
  char buf[32];
  Walker w(g);
  for (std::size_t p = 0; p < g.npoints(); ++p, w.advance()) {
    for (int ax = 0; ax < n; ++ax) out << w.idx[ax] << ",";
    for (int a = 0; a < N; ++a) {
      std::snprintf(buf, sizeof(buf), "%.17g", u.channel(a)[p]);
      out << buf << (a + 1 == N ? "" : ",");
    }
    out << "\n";
  }
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

ImmersionSample load_immersion_csv(const std::string& path, const Grid& g, int target_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  const int n = g.n();
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  {
    std::string want;
    for (int ax = 0; ax < n; ++ax) want += "x_index_" + std::to_string(ax) + ",";
    for (int a = 0; a < target_dim; ++a)
      want += "u_" + std::to_string(a + 1) + (a + 1 == target_dim ? "" : ",");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != want) throw ConfigError(path + ": header mismatch, expected '" + want + "'");
  }
  ImmersionSample u(g, target_dim);
  std::vector<char> seen(g.npoints(), 0);
  std::size_t rows = 0;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* s = line.c_str();
    char* end = nullptr;
    std::size_t p = 0;
    for (int ax = 0; ax < n; ++ax) {
      const long v = std::strtol(s, &end, 10);
      if (end == s || *end != ',' || v < 0 || v >= g.size(ax))
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad index column");
      p += static_cast<std::size_t>(v) * g.stride(ax);
      s = end + 1;
    }
    for (int a = 0; a < target_dim; ++a) {
      const double v = std::strtod(s, &end);
      if (end == s) throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value column");
      u.channel(a)[p] = v;
      if (a + 1 < target_dim) {
        if (*end != ',') throw ConfigError(path + ":" + std::to_string(lineno) + ": missing column");
        s = end + 1;
      } else if (*end != '\0') {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": trailing characters");
      }
    }
    if (seen[p]) throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate point");
    seen[p] = 1;
    ++rows;
  }
  if (rows != g.npoints())
    throw ConfigError(path + ": expected " + std::to_string(g.npoints()) + " rows, got " +
                      std::to_string(rows));
  return u;
}

std::vector<double> immersion_partial(const ImmersionSample& u, int axis, int a) {
  const Grid& g = u.grid();
  if (axis < 0 || axis >= g.n()) throw ArgumentError("immersion_partial: axis out of range");
  if (a < 0 || a >= u.target_dim()) throw ArgumentError("immersion_partial: channel out of range");
  std::vector<double> out(g.npoints());
  const double inv2h = 1.0 / (2.0 * g.spacing(axis));
  const double lin = u.linear_entry(a, axis);
  const double* ch = u.channel(a);
  Walker w(g);
  for (std::size_t p = 0; p < g.npoints(); ++p, w.advance())
    out[p] = (ch[w.up(p, axis)] - ch[w.dn(p, axis)]) * inv2h + lin;
  return out;
}

MetricField first_fundamental_form(const ImmersionSample& u) {
  const Grid& g = u.grid();
  const int n = g.n();
  const int N = u.target_dim();
  const std::size_t np = g.npoints();
  auto du = all_partials(u);
  MetricField met(g, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double* gij = met.entry(i, j);
      for (std::size_t p = 0; p < np; ++p) {
        double s = 0.0;
        for (int a = 0; a < N; ++a)
          s += du[i][static_cast<std::size_t>(a) * np + p] *
               du[j][static_cast<std::size_t>(a) * np + p];
        gij[p] = s;
      }
      if (j != i) std::copy(gij, gij + np, met.entry(j, i));
    }
  return met;
}

FrameField frame_field(const ImmersionSample& u) {
  const Grid& g = u.grid();
  const int n = g.n();
  const int N = u.target_dim();
  const std::size_t np = g.npoints();
  auto du = all_partials(u);

  FrameField F;
  F.grid = g;
  F.n = n;
  F.N = N;
  F.data.assign(static_cast<std::size_t>(N) * N * np, 0.0);

  double col[8];
  Walker w(g);
  for (std::size_t p = 0; p < np; ++p, w.advance()) {
    // Tangent columns: Gram-Schmidt over the axis derivatives in order.
    for (int c = 0; c < n; ++c) {
      for (int a = 0; a < N; ++a) col[a] = du[c][static_cast<std::size_t>(a) * np + p];
      for (int b = 0; b < c; ++b) {
        double dot = 0.0;
        for (int a = 0; a < N; ++a) dot += col[a] * F.entry(a, b)[p];
        for (int a = 0; a < N; ++a) col[a] -= dot * F.entry(a, b)[p];
      }
      double nrm = 0.0;
      for (int a = 0; a < N; ++a) nrm += col[a] * col[a];
      nrm = std::sqrt(nrm);
      if (nrm < kFrameTol) throw FrameError("tangent directions are degenerate");
      for (int a = 0; a < N; ++a) F.entry(a, c)[p] = col[a] / nrm;
    }
    // Normal columns: continuity against the previous point of the sweep,
    // canonical seeding at the origin or where propagation collapses.
    for (int c = n; c < N; ++c) {
      bool placed = false;
      if (p > 0) {
        for (int a = 0; a < N; ++a) col[a] = F.entry(a, c)[p - 1];
        for (int b = 0; b < c; ++b) {
          double dot = 0.0;
          for (int a = 0; a < N; ++a) dot += col[a] * F.entry(a, b)[p];
          for (int a = 0; a < N; ++a) col[a] -= dot * F.entry(a, b)[p];
        }
        double nrm = 0.0;
        for (int a = 0; a < N; ++a) nrm += col[a] * col[a];
        nrm = std::sqrt(nrm);
        if (nrm >= kFrameTol) {
          for (int a = 0; a < N; ++a) F.entry(a, c)[p] = col[a] / nrm;
          placed = true;
        }
      }
      if (!placed) {
        double best = kFrameTol;
        int best_k = -1;
        double best_col[8];
        for (int k = 0; k < N; ++k) {
          for (int a = 0; a < N; ++a) col[a] = (a == k) ? 1.0 : 0.0;
          for (int b = 0; b < c; ++b) {
            const double dot = F.entry(k, b)[p];
            for (int a = 0; a < N; ++a) col[a] -= dot * F.entry(a, b)[p];
          }
          double nrm = 0.0;
          for (int a = 0; a < N; ++a) nrm += col[a] * col[a];
          nrm = std::sqrt(nrm);
          if (nrm > best) {
            best = nrm;
            best_k = k;
            std::memcpy(best_col, col, sizeof(double) * N);
          }
        }
        if (best_k < 0) throw FrameError("no canonical seed spans the normal complement");
        for (int a = 0; a < N; ++a) F.entry(a, c)[p] = best_col[a] / best;
      }
    }
    // Orientation: flip the last normal so det = +1 pointwise.
    double m[64];
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) m[r * N + c] = F.entry(r, c)[p];
    if (small_det(m, N) < 0.0)
      for (int a = 0; a < N; ++a) F.entry(a, N - 1)[p] = -F.entry(a, N - 1)[p];
  }
  return F;
}

SffField second_fundamental_form(const ImmersionSample& u, const FrameField& frame) {
  const Grid& g = u.grid();
  const int n = g.n();
  const int N = u.target_dim();
  if (frame.grid != g || frame.n != n || frame.N != N)
    throw ArgumentError("frame does not match the immersion sample");
  const int codim = N - n;
  const std::size_t np = g.npoints();
  SffField sff(g, n, codim);
  if (codim == 0) return sff;

  double sec[8];
  Walker w(g);
  for (std::size_t p = 0; p < np; ++p, w.advance()) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        if (i == j) {
          const double invh2 = 1.0 / (g.spacing(i) * g.spacing(i));
          const std::size_t pu = w.up(p, i);
          const std::size_t pd = w.dn(p, i);
          for (int a = 0; a < N; ++a) {
            const double* ch = u.channel(a);
            sec[a] = (ch[pu] - 2.0 * ch[p] + ch[pd]) * invh2;
          }
        } else {
          const double inv4h = 1.0 / (4.0 * g.spacing(i) * g.spacing(j));
          const std::size_t puu = w.up(w.up(p, i), j);
          const std::size_t pud = w.dn(w.up(p, i), j);
          const std::size_t pdu = w.up(w.dn(p, i), j);
          const std::size_t pdd = w.dn(w.dn(p, i), j);
          for (int a = 0; a < N; ++a) {
            const double* ch = u.channel(a);
            sec[a] = (ch[puu] - ch[pud] - ch[pdu] + ch[pdd]) * inv4h;
          }
        }
        for (int m = 0; m < codim; ++m) {
          double v = 0.0;
          for (int a = 0; a < N; ++a) v += sec[a] * frame.entry(a, n + m)[p];
          sff.entry(m, i, j)[p] = v;
          if (j != i) sff.entry(m, j, i)[p] = v;
        }
      }
  }
  return sff;
}

double mean_curvature_mass(const ImmersionSample& u) {
  const Grid& g = u.grid();
  const int n = g.n();
  const int codim = u.target_dim() - n;
  if (codim == 0) throw ArgumentError("codimension-zero immersion has no normal data");
  MetricField met = first_fundamental_form(u);
  FrameField frame = frame_field(u);
  SffField sff = second_fundamental_form(u, frame);
  const std::size_t np = g.npoints();
  double mass = 0.0;
  double gm[16], ginv[16];
  for (std::size_t p = 0; p < np; ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gm[i * n + j] = met.entry(i, j)[p];
    const double det = small_inverse(gm, n, ginv);
    if (det <= 0.0) throw ArgumentError("induced metric is not positive definite");
    double h2 = 0.0;
    for (int m = 0; m < codim; ++m) {
      double hm = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) hm += ginv[i * n + j] * sff.entry(m, i, j)[p];
      h2 += hm * hm;
    }
    mass += std::sqrt(h2) * std::sqrt(det);
  }
  return mass * g.cell_volume();
}

double sff_energy(const ImmersionSample& u, double p_exp) {
  if (!(p_exp >= 1.0)) throw ArgumentError("sff_energy needs p >= 1");
  const Grid& g = u.grid();
  const int n = g.n();
  const int codim = u.target_dim() - n;
  if (codim == 0) throw ArgumentError("codimension-zero immersion has no normal data");
  MetricField met = first_fundamental_form(u);
  FrameField frame = frame_field(u);
  SffField sff = second_fundamental_form(u, frame);
  const std::size_t np = g.npoints();
  double total = 0.0;
  double gm[16], ginv[16], raised[16];
  for (std::size_t p = 0; p < np; ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gm[i * n + j] = met.entry(i, j)[p];
    const double det = small_inverse(gm, n, ginv);
    if (det <= 0.0) throw ArgumentError("induced metric is not positive definite");
    double mag2 = 0.0;
    for (int m = 0; m < codim; ++m) {
      // raised = g^{-1} II^m g^{-1}; contract with II^m entrywise.
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int k = 0; k < n; ++k) s += ginv[i * n + k] * sff.entry(m, k, l)[p];
          raised[i * n + l] = s;
        }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += raised[i * n + l] * ginv[l * n + j];
          mag2 += s * sff.entry(m, i, j)[p];
        }
    }
    total += std::pow(std::max(mag2, 0.0), 0.5 * p_exp) * std::sqrt(det);
  }
  return total * g.cell_volume();
}

std::pair<double, double> isometry_defect(const ImmersionSample& u, const MetricField& target) {
  const Grid& g = u.grid();
  if (target.grid != g || target.n != g.n())
    throw ArgumentError("target metric does not match the immersion grid");
  MetricField met = first_fundamental_form(u);
  const int n = g.n();
  const std::size_t np = g.npoints();
  double linf = 0.0;
  double l2 = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    double frob2 = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double d = met.entry(i, j)[p] - target.entry(i, j)[p];
        frob2 += d * d;
      }
    linf = std::max(linf, std::sqrt(frob2));
    l2 += frob2;
  }
  return {linf, std::sqrt(l2 * g.cell_volume())};
}

Form darboux_coframe(const ImmersionSample& u, const FrameField& frame) {
  const Grid& g = u.grid();
  const int n = g.n();
  const int N = u.target_dim();
  if (frame.grid != g || frame.n != n || frame.N != N)
    throw ArgumentError("frame does not match the immersion sample");
  const std::size_t np = g.npoints();
  auto du = all_partials(u);
  Form theta(g, 1, LieAlgebra::make("abelian:" + std::to_string(N)));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < N; ++a) {
      double* out = theta.field(i, a);
      for (std::size_t p = 0; p < np; ++p) {
        double s = 0.0;
        for (int r = 0; r < N; ++r)
          s += frame.entry(r, a)[p] * du[i][static_cast<std::size_t>(r) * np + p];
        out[p] = s;
      }
    }
  return theta;
}

Form connection_form(const FrameField& frame) {
  const Grid& g = frame.grid;
  const int n = g.n();
  const int N = frame.N;
  const std::size_t np = g.npoints();
  Form omega(g, 1, LieAlgebra::make("abelian:" + std::to_string(N * N)));
  std::vector<double> dcol(static_cast<std::size_t>(N) * np);
  for (int i = 0; i < n; ++i) {
    const double inv2h = 1.0 / (2.0 * g.spacing(i));
    for (int b = 0; b < N; ++b) {
      // dcol = centered derivative of frame column b along axis i.
      Walker w(g);
      for (std::size_t p = 0; p < np; ++p, w.advance()) {
        const std::size_t pu = w.up(p, i);
        const std::size_t pd = w.dn(p, i);
        for (int r = 0; r < N; ++r)
          dcol[static_cast<std::size_t>(r) * np + p] =
              (frame.entry(r, b)[pu] - frame.entry(r, b)[pd]) * inv2h;
      }
      // Each unordered pair accumulates both halves of the antisymmetrization
      // across the two passes of the column loop.
      for (int a = 0; a < N; ++a) {
        if (a == b) continue;
        double* oab = omega.field(i, a * N + b);
        double* oba = omega.field(i, b * N + a);
        for (std::size_t p = 0; p < np; ++p) {
          double s = 0.0;
          for (int r = 0; r < N; ++r)
            s += dcol[static_cast<std::size_t>(r) * np + p] * frame.entry(r, a)[p];
          oab[p] += 0.5 * s;
          oba[p] -= 0.5 * s;
        }
      }
    }
  }
  return omega;
}

ConnectionBlocks split_connection(const Form& omega, int n) {
  const int dim = omega.alg_dim();
  int N = 0;
  while (N * N < dim) ++N;
  if (N * N != dim) throw ArgumentError("connection coefficients are not a square matrix");
  if (n < 1 || n >= N) throw ArgumentError("tangent block size out of range");
  const Grid& g = omega.grid();
  const int codim = N - n;
  const std::size_t np = g.npoints();
  ConnectionBlocks out{
      Form(g, omega.degree(), LieAlgebra::make("abelian:" + std::to_string(n * n))),
      Form(g, omega.degree(), LieAlgebra::make("abelian:" + std::to_string(codim * n))),
      Form(g, omega.degree(), LieAlgebra::make("abelian:" + std::to_string(codim * codim)))};
  for (int comp = 0; comp < omega.ncomp(); ++comp) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        std::memcpy(out.top.field(comp, a * n + b), omega.field(comp, a * N + b),
                    sizeof(double) * np);
    for (int m = 0; m < codim; ++m) {
      for (int b = 0; b < n; ++b)
        std::memcpy(out.mixed.field(comp, m * n + b), omega.field(comp, (n + m) * N + b),
                    sizeof(double) * np);
      for (int c = 0; c < codim; ++c)
        std::memcpy(out.perp.field(comp, m * codim + c), omega.field(comp, (n + m) * N + (n + c)),
                    sizeof(double) * np);
    }
  }
  return out;
}

Form matrix_wedge(const Form& a, int rows_a, int cols_a, const Form& b, int rows_b, int cols_b) {
  if (a.degree() != 1 || b.degree() != 1)
    throw DegreeError("matrix_wedge is defined for 1-forms");
  if (a.grid() != b.grid()) throw ArgumentError("matrix_wedge: grid mismatch");
  if (cols_a != rows_b) throw ArgumentError("matrix_wedge: inner dimensions disagree");
  if (a.alg_dim() != rows_a * cols_a || b.alg_dim() != rows_b * cols_b)
    throw ArgumentError("matrix_wedge: coefficient count does not match the shape");
  const Grid& g = a.grid();
  const std::size_t np = g.npoints();
  Form out(g, 2, LieAlgebra::make("abelian:" + std::to_string(rows_a * cols_b)));
  const auto& pairs = multi_indices(g.n(), 2);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const int i = pairs[r][0];
    const int j = pairs[r][1];
    for (int aa = 0; aa < rows_a; ++aa)
      for (int bb = 0; bb < cols_b; ++bb) {
        double* dst = out.field(static_cast<int>(r), aa * cols_b + bb);
        for (int c = 0; c < cols_a; ++c) {
          const double* ai = a.field(i, aa * cols_a + c);
          const double* aj = a.field(j, aa * cols_a + c);
          const double* bi = b.field(i, c * cols_b + bb);
          const double* bj = b.field(j, c * cols_b + bb);
          for (std::size_t p = 0; p < np; ++p) dst[p] += ai[p] * bj[p] - aj[p] * bi[p];
        }
      }
  }
  return out;
}

Form matrix_transpose(const Form& a, int rows, int cols) {
  if (a.alg_dim() != rows * cols)
    throw ArgumentError("matrix_transpose: coefficient count does not match the shape");
  Form out(a.grid(), a.degree(), LieAlgebra::make("abelian:" + std::to_string(rows * cols)));
  const std::size_t np = a.grid().npoints();
  for (int comp = 0; comp < a.ncomp(); ++comp)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        std::memcpy(out.field(comp, c * rows + r), a.field(comp, r * cols + c),
                    sizeof(double) * np);
  return out;
}

Form slice_coeffs(const Form& a, int lo, int count) {
  if (lo < 0 || count < 1 || lo + count > a.alg_dim())
    throw ArgumentError("slice_coeffs: window out of range");
  Form out(a.grid(), a.degree(), LieAlgebra::make("abelian:" + std::to_string(count)));
  const std::size_t np = a.grid().npoints();
  for (int comp = 0; comp < a.ncomp(); ++comp)
    for (int c = 0; c < count; ++c)
      std::memcpy(out.field(comp, c), a.field(comp, lo + c), sizeof(double) * np);
  return out;
}

double structure_residual(const Form& theta, const Form& omega) {
  const int N = theta.alg_dim();
  if (omega.alg_dim() != N * N)
    throw ArgumentError("structure_residual: connection shape mismatch");
  if (theta.degree() != 1 || omega.degree() != 1)
    throw DegreeError("structure_residual needs 1-forms");
  Form resid = form_add(exterior_derivative(theta), matrix_wedge(omega, N, N, theta, N, 1));
  return lp_norm(resid, 2.0);
}

double cartan_lemma_check(const SffField& sff, const Form& omega_mixed, const Form& theta_top) {
  const Grid& g = theta_top.grid();
  const int n = g.n();
  const int codim = sff.codim;
  if (sff.grid != g || sff.n != n) throw ArgumentError("cartan_lemma_check: shape mismatch");
  if (theta_top.alg_dim() != n || theta_top.degree() != 1)
    throw ArgumentError("cartan_lemma_check: coframe must carry n coefficients");
  if (omega_mixed.alg_dim() != codim * n || omega_mixed.degree() != 1)
    throw ArgumentError("cartan_lemma_check: mixed block shape mismatch");
  const std::size_t np = g.npoints();
  double acc = 0.0;
  double M[16], C[16], conv[64];
  for (std::size_t p = 0; p < np; ++p) {
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i) M[a * n + i] = theta_top.field(i, a)[p];
    const double det = small_inverse(M, n, C);
    if (std::abs(det) < 1e-12) throw ArgumentError("cartan_lemma_check: coframe is degenerate");
    // conv[m][a][b] = C_pa C_qb II^m_pq: the coordinate form pushed to the frame.
    for (int m = 0; m < codim; ++m)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          double s = 0.0;
          for (int q = 0; q < n; ++q) {
            double t = 0.0;
            for (int pi = 0; pi < n; ++pi) t += C[pi * n + a] * sff.entry(m, pi, q)[p];
            s += t * C[q * n + b];
          }
          conv[(m * n + a) * n + b] = s;
        }
    for (int m = 0; m < codim; ++m)
      for (int b = 0; b < n; ++b)
        for (int i = 0; i < n; ++i) {
          double model = 0.0;
          for (int k = 0; k < n; ++k)
            model += conv[(m * n + b) * n + k] * theta_top.field(i, k)[p];
          const double r = omega_mixed.field(i, m * n + b)[p] - model;
          acc += r * r;
        }
  }
  return std::sqrt(acc * g.cell_volume());
}

Form koszul_tangent_connection(const Form& theta_top) {
  const Grid& g = theta_top.grid();
  if (g.n() != 2 || theta_top.alg_dim() != 2 || theta_top.degree() != 1)
    throw ArgumentError("koszul_tangent_connection handles two-dimensional coframes");
  const std::size_t np = g.npoints();
  Form dtheta = exterior_derivative(theta_top);
  Form beta(g, 1, LieAlgebra::make("abelian:4"));
  const double* t00 = theta_top.field(0, 0);
  const double* t01 = theta_top.field(1, 0);
  const double* t10 = theta_top.field(0, 1);
  const double* t11 = theta_top.field(1, 1);
  const double* d0 = dtheta.field(0, 0);
  const double* d1 = dtheta.field(0, 1);
  for (std::size_t p = 0; p < np; ++p) {
    const double area = t00[p] * t11[p] - t01[p] * t10[p];
    if (std::abs(area) < 1e-12)
      throw ArgumentError("koszul_tangent_connection: degenerate coframe");
    const double c0 = d0[p] / area;
    const double c1 = d1[p] / area;
    // Cramer solve of d theta = w ^ theta; with d theta + omega ^ theta = 0
    // the solution is w = -omega_01.
    const double w0 = c0 * t00[p] + c1 * t10[p];
    const double w1 = c0 * t01[p] + c1 * t11[p];
    beta.field(0, 1)[p] = -w0;
    beta.field(1, 1)[p] = -w1;
    beta.field(0, 2)[p] = w0;
    beta.field(1, 2)[p] = w1;
  }
  return beta;
}

GcrResiduals gcr_residuals(const ImmersionSample& u) {
  const int n = u.n();
  const int N = u.target_dim();
  if (N == n) throw ArgumentError("codimension-zero immersion has no normal block");
  FrameField frame = frame_field(u);
  Form omega = connection_form(frame);
  Form curv = form_add(exterior_derivative(omega), matrix_wedge(omega, N, N, omega, N, N));
  ConnectionBlocks blocks = split_connection(curv, n);
  GcrResiduals out;
  out.gauss = lp_norm(blocks.top, 1.0);
  out.codazzi = lp_norm(blocks.mixed, 1.0);
  out.ricci = lp_norm(blocks.perp, 1.0);
  if (n == 2) {
    Form theta = darboux_coframe(u, frame);
    Form beta = koszul_tangent_connection(slice_coeffs(theta, 0, 2));
    ConnectionBlocks wb = split_connection(omega, 2);
    out.intrinsic = lp_norm(form_sub(wb.top, beta), 2.0);
  }
  return out;
}

namespace {

// Oscillation normal to the flat torus in R^4, unit length and orthogonal to
// both tangent circles at every point.
ImmersionSample clifford_oscillation_member(const Grid& g, double eps, double amplitude) {
  check_wavelength(g, 0, eps, "oscillation");
  ImmersionSample u = immersion_clifford(g);
  const std::size_t np = g.npoints();
  const double scale = eps * eps * amplitude / std::sqrt(2.0);
  std::vector<double> osc(g.size(0)), cx(g.size(0)), sx(g.size(0)), cy(g.size(1)), sy(g.size(1));
  for (int i = 0; i < g.size(0); ++i) {
    osc[i] = scale * std::sin(kTwoPi * g.coord(0, i) / eps);
    cx[i] = std::cos(kTwoPi * g.coord(0, i) / g.period(0));
    sx[i] = std::sin(kTwoPi * g.coord(0, i) / g.period(0));
  }
  for (int i = 0; i < g.size(1); ++i) {
    cy[i] = std::cos(kTwoPi * g.coord(1, i) / g.period(1));
    sy[i] = std::sin(kTwoPi * g.coord(1, i) / g.period(1));
  }
  Walker w(g);
  for (std::size_t p = 0; p < np; ++p, w.advance()) {
    const double s = osc[w.idx[0]];
    u.channel(0)[p] += s * cx[w.idx[0]];
    u.channel(1)[p] += s * sx[w.idx[0]];
    u.channel(2)[p] -= s * cy[w.idx[1]];
    u.channel(3)[p] -= s * sy[w.idx[1]];
  }
  return u;
}

Form metric_defect_form(const ImmersionSample& member, const ImmersionSample& limit) {
  const Grid& g = member.grid();
  const int n = g.n();
  MetricField gm = first_fundamental_form(member);
  MetricField gl = first_fundamental_form(limit);
  Form out(g, 0, LieAlgebra::make("abelian:" + std::to_string(n * n)));
  const std::size_t np = g.npoints();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double* dst = out.field(0, i * n + j);
      const double* a = gm.entry(i, j);
      const double* b = gl.entry(i, j);
      for (std::size_t p = 0; p < np; ++p) dst[p] = a[p] - b[p];
    }
  return out;
}

Form quad_term_form(const ImmersionSample& u) {
  const int n = u.n();
  const int codim = u.target_dim() - n;
  FrameField frame = frame_field(u);
  Form omega = connection_form(frame);
  ConnectionBlocks blocks = split_connection(omega, n);
  Form quad = matrix_wedge(matrix_transpose(blocks.mixed, codim, n), n, codim, blocks.mixed,
                           codim, n);
  // Entry (0,1) of the antisymmetric tangent matrix: the scalar content on a
  // two-dimensional base.
  return slice_coeffs(quad, 1, 1);
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return std::string(buf);
}

}  // namespace

ImmersionSequenceReport immersion_sequence_experiment(const ImmersionFamilyConfig& cfg) {
  const bool clifford = cfg.kind == "clifford-osc";
  if (!clifford && cfg.kind != "corrugation")
    throw ConfigError("unknown immersion family '" + cfg.kind + "'");
  if (!(cfg.amplitude > 0.0)) throw ConfigError("immersion family amplitude must be positive");
  if (!(cfg.sff_p >= 1.0)) throw ConfigError("immersion family needs p >= 1");
  if (cfg.bank_size < 1) throw ConfigError("bank size must be positive");
  if (cfg.fit_points < 2 || cfg.metric_fit_points < 2)
    throw ConfigError("limit fits need at least two points");
  if (!(cfg.tol_rel > 0.0)) throw ConfigError("tolerance must be positive");

  const std::vector<double> eps = cfg.schedule.values();
  const int members = static_cast<int>(eps.size());
  const auto scalar2 = LieAlgebra::make("abelian:1");
  const auto matrix2 = LieAlgebra::make("abelian:4");
  const auto qbank = make_test_bank(2, 2, scalar2, cfg.bank_size, cfg.seed);
  const auto mbank = make_test_bank(2, 0, matrix2, cfg.bank_size, cfg.seed + 101);
  const std::vector<double> fractions{0.001, 0.005, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0};

  const auto build_member = [&](const Grid& g, double e) {
    return clifford ? clifford_oscillation_member(g, e, cfg.amplitude)
                    : immersion_corrugation(g, cfg.amplitude, e);
  };
  const auto build_limit = [&](const Grid& g) {
    return clifford ? immersion_clifford(g)
                    : immersion_affine(g, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
  };

  ImmersionSequenceReport rep;
  rep.quad.epsilons = eps;
  rep.metric.epsilons = eps;
  rep.quad.grid_sizes.resize(members);
  rep.metric.grid_sizes.resize(members);
  rep.quad.pairings.assign(members, std::vector<double>(cfg.bank_size, 0.0));
  rep.metric.pairings.assign(members, std::vector<double>(cfg.bank_size, 0.0));
  rep.quad.surrogate_norms.resize(members);
  rep.metric.surrogate_norms.resize(members);
  rep.quad.lp_bounds.resize(members);
  rep.metric.lp_bounds.resize(members);
  rep.sff_lp.resize(members);
  rep.gcr_gauss.resize(members);
  rep.gcr_codazzi.resize(members);
  rep.gcr_ricci.resize(members);
  rep.equi_fractions = fractions;
  rep.equi.resize(members);

  run_indexed_jobs(members, cfg.threads, [&](int i) {
    const int nside = cfg.policy.resolve(eps[i]);
    const Grid g(2, {nside, nside});
    rep.quad.grid_sizes[i] = nside;
    rep.metric.grid_sizes[i] = nside;
    const ImmersionSample member = build_member(g, eps[i]);
    const ImmersionSample limit = build_limit(g);

    const Form quad = quad_term_form(member);
    for (int j = 0; j < cfg.bank_size; ++j)
      rep.quad.pairings[i][j] = pairing(quad, qbank[j].sample(g));

    const Form defect = metric_defect_form(member, limit);
    for (int j = 0; j < cfg.bank_size; ++j)
      rep.metric.pairings[i][j] = pairing(defect, mbank[j].sample(g));

    rep.sff_lp[i] = std::pow(sff_energy(member, cfg.sff_p), 1.0 / cfg.sff_p);
    const GcrResiduals gcr = gcr_residuals(member);
    rep.gcr_gauss[i] = gcr.gauss;
    rep.gcr_codazzi[i] = gcr.codazzi;
    rep.gcr_ricci[i] = gcr.ricci;
    const double gmax = std::max(gcr.gauss, std::max(gcr.codazzi, gcr.ricci));
    rep.quad.surrogate_norms[i] = gmax;
    rep.metric.surrogate_norms[i] = gmax;
    rep.quad.lp_bounds[i] = rep.sff_lp[i];
    rep.metric.lp_bounds[i] = rep.sff_lp[i];

    FrameField frame = frame_field(member);
    Form omega = connection_form(frame);
    ConnectionBlocks blocks = split_connection(omega, 2);
    rep.equi[i] = equi_integrability_modulus(blocks.mixed, 2.0, fractions);
  });

  // Targets live on the finest grid of the schedule.
  {
    const int nside = cfg.policy.resolve(eps.back());
    const Grid g(2, {nside, nside});
    const ImmersionSample limit = build_limit(g);
    const Form quad = quad_term_form(limit);
    rep.quad.targets.resize(cfg.bank_size);
    for (int j = 0; j < cfg.bank_size; ++j)
      rep.quad.targets[j] = pairing(quad, qbank[j].sample(g));
    rep.metric.targets.assign(cfg.bank_size, 0.0);
    rep.limit_gcr = gcr_residuals(limit);
  }

  fit_report_columns(rep.quad, cfg.fit_points);
  fit_report_columns(rep.metric, cfg.metric_fit_points);

  const bool bounded = bounded_norm_sequence(rep.sff_lp);
  const bool quad_ok = rep.quad.max_gap <= cfg.tol_rel * rep.quad.scale;
  const bool metric_ok = rep.metric.max_gap <= cfg.tol_rel * rep.metric.scale;
  double member_gcr = 0.0;
  for (int i = 0; i < members; ++i)
    member_gcr = std::max(member_gcr,
                          std::max(rep.gcr_gauss[i], std::max(rep.gcr_codazzi[i], rep.gcr_ricci[i])));
  const double limit_gcr_max =
      std::max(rep.limit_gcr.gauss, std::max(rep.limit_gcr.codazzi, rep.limit_gcr.ricci));
  const bool gcr_ok = limit_gcr_max <= 2.0 * member_gcr + 1e-12;

  rep.hypothesis_violation = !bounded;
  rep.quad.hypothesis_ok = bounded;
  rep.metric.hypothesis_ok = bounded;
  rep.quad.verdict = quad_ok ? "CONVERGES" : "FAILS";
  rep.metric.verdict = metric_ok ? "CONVERGES" : "FAILS";
  rep.verdict = (bounded && quad_ok && metric_ok && gcr_ok) ? "CONVERGES" : "FAILS";

  std::string note;
  if (!bounded)
    note += "curvature bound violated: |II|_p grew from " + short_num(rep.sff_lp.front()) +
            " to " + short_num(rep.sff_lp.back()) + "; ";
  if (!metric_ok)
    note += "persistent metric gap " + short_num(rep.metric.max_gap) + " vs tolerance " +
            short_num(cfg.tol_rel * rep.metric.scale) + "; ";
  if (!quad_ok)
    note += "quadratic-term gap " + short_num(rep.quad.max_gap) + " vs tolerance " +
            short_num(cfg.tol_rel * rep.quad.scale) + "; ";
  if (!gcr_ok)
    note += "limit flatness residual " + short_num(limit_gcr_max) + " exceeds twice the member level " +
            short_num(member_gcr) + "; ";
  if (note.empty())
    note = "limit matches on " + std::to_string(cfg.bank_size) + " test forms; max gap " +
           short_num(std::max(rep.quad.max_gap, rep.metric.max_gap));
  else
    note.erase(note.size() - 2);
  rep.note = note;
  rep.quad.note = rep.note;
  rep.metric.note = rep.note;
  return rep;
}

CorrugationReport corrugation_experiment(const CorrugationConfig& cfg) {
  if (!(cfg.amplitude > 0.0)) throw ConfigError("corrugation amplitude must be positive");
  if (!(cfg.rate_min > 0.0)) throw ConfigError("rate threshold must be positive");
  if (cfg.flatten_grid < 8) throw ConfigError("flattening grid is too coarse");
  if (cfg.flatten_deltas.size() < 2)
    throw ConfigError("flattening family needs at least two amplitudes");
  for (double d : cfg.flatten_deltas)
    if (!(d > 0.0)) throw ConfigError("flattening amplitudes must be positive");

  CorrugationReport rep;
  rep.deltas = cfg.schedule.values();
  const int members = static_cast<int>(rep.deltas.size());
  rep.grid_sizes.resize(members);
  rep.masses.resize(members);
  run_indexed_jobs(members, cfg.threads, [&](int i) {
    const int nside = cfg.policy.resolve(rep.deltas[i]);
    const Grid g(2, {nside, nside});
    rep.grid_sizes[i] = nside;
    rep.masses[i] = mean_curvature_mass(immersion_corrugation(g, cfg.amplitude, rep.deltas[i]));
  });
  std::vector<double> inv_delta(members);
  for (int i = 0; i < members; ++i) inv_delta[i] = 1.0 / rep.deltas[i];
  rep.mass_exponent = loglog_slope(inv_delta, rep.masses);

  rep.flatten_deltas = cfg.flatten_deltas;
  const int fam = static_cast<int>(cfg.flatten_deltas.size());
  rep.flatten_defect_l2.resize(fam);
  rep.flatten_defect_linf.resize(fam);
  rep.flatten_masses.resize(fam);
  const Grid g2(2, {cfg.flatten_grid, cfg.flatten_grid});
  MetricField flat(g2, 2);
  std::fill(flat.entry(0, 0), flat.entry(0, 0) + g2.npoints(), 1.0);
  std::fill(flat.entry(1, 1), flat.entry(1, 1) + g2.npoints(), 1.0);
  run_indexed_jobs(fam, cfg.threads, [&](int i) {
    TrigPolyForm height(2, 0, LieAlgebra::make("abelian:1"));
    const int tab[2] = {2, 0};  // sin(2 pi x0), constant along x1
    height.coef(0, 0, tab) = cfg.flatten_deltas[i] * cfg.amplitude;
    const ImmersionSample u = immersion_graph(g2, height);
    const auto defect = isometry_defect(u, flat);
    rep.flatten_defect_linf[i] = defect.first;
    rep.flatten_defect_l2[i] = defect.second;
    rep.flatten_masses[i] = mean_curvature_mass(u);
  });
  rep.defect_exponent = loglog_slope(rep.flatten_deltas, rep.flatten_defect_l2);

  const bool mass_ok = rep.mass_exponent >= cfg.rate_min;
  const bool defect_ok = rep.defect_exponent >= cfg.rate_min;
  const bool bounded = bounded_norm_sequence(rep.flatten_masses);
  rep.pass = mass_ok && defect_ok && bounded;
  rep.note = "mass exponent " + short_num(rep.mass_exponent) + " in 1/delta; defect exponent " +
             short_num(rep.defect_exponent) + " in delta" +
             (bounded ? "" : "; flattening masses not bounded");
  return rep;
}

}  // namespace cartanlab
