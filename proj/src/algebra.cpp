#include "cartanlab/algebra.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "cartanlab/errors.hpp"
#include "cartanlab/rng.hpp"

namespace cartanlab {

namespace {

// row-major m x m
std::vector<double> commutator(const std::vector<double>& a,
                               const std::vector<double>& b, int m) {
  std::vector<double> out(static_cast<std::size_t>(m) * m, 0.0);
  for (int r = 0; r < m; ++r)
    for (int t = 0; t < m; ++t) {
      double v = 0.0;
      for (int s = 0; s < m; ++s)
        v += a[r * m + s] * b[s * m + t] - b[r * m + s] * a[s * m + t];
      out[r * m + t] = v;
    }
  return out;
}

double vec_norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void normalize(std::vector<double>& x) {
  const double n = vec_norm(x);
  if (n > 0.0)
    for (double& v : x) v /= n;
}

// B(x,y)_k = sum_ij c[k][i][j] x_i y_j with dense c of size d^3.
void apply_bilinear(const std::vector<double>& c, int d,
                    const std::vector<double>& x, const std::vector<double>& y,
                    std::vector<double>& out) {
  out.assign(d, 0.0);
  for (int k = 0; k < d; ++k) {
    double v = 0.0;
    for (int i = 0; i < d; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* row = &c[(static_cast<std::size_t>(k) * d + i) * d];
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += row[j] * y[j];
      v += xi * acc;
    }
    out[k] = v;
  }
}

// Norm of the bilinear bracket map over unit vectors, by alternating
// maximization (fix one argument, power-iterate the induced linear map).
// Multi-start: every basis pair plus a few seeded random pairs.  The basis
// pairs alone can sit at a non-global critical value (for so(m), m >= 4, the
// extremal pair mixes two basis planes), hence the random starts.
double bilinear_norm(const std::vector<double>& c, int d) {
  bool all_zero = true;
  for (double v : c)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) return 0.0;

  std::vector<std::vector<double>> xs;
  std::vector<std::vector<double>> ys;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      std::vector<double> x(d, 0.0), y(d, 0.0);
      x[i] = 1.0;
      y[j] = 1.0;
      xs.push_back(std::move(x));
      ys.push_back(std::move(y));
    }
  Rng rng(0x5ca1ab1eULL);
  for (int r = 0; r < 8; ++r) {
    std::vector<double> x(d), y(d);
    for (int i = 0; i < d; ++i) x[i] = rng.symm();
    for (int i = 0; i < d; ++i) y[i] = rng.symm();
    normalize(x);
    normalize(y);
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }

  double best = 0.0;
  std::vector<double> bx, tmp, z;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    std::vector<double> x = xs[s];
    std::vector<double> y = ys[s];
    double prev = 0.0;
    for (int round = 0; round < 200; ++round) {
      // optimal y for fixed x: top right-singular vector of M_x, via power
      // iteration on M_x^T M_x starting from the current y
      for (int it = 0; it < 8; ++it) {
        apply_bilinear(c, d, x, y, tmp);  // M_x y
        // z = M_x^T tmp: z_j = sum_ki c[k][i][j] x_i tmp_k
        z.assign(d, 0.0);
        for (int k = 0; k < d; ++k)
          for (int i = 0; i < d; ++i) {
            const double w = x[i] * tmp[k];
            if (w == 0.0) continue;
            const double* row = &c[(static_cast<std::size_t>(k) * d + i) * d];
            for (int j = 0; j < d; ++j) z[j] += row[j] * w;
          }
        if (vec_norm(z) == 0.0) break;
        y = z;
        normalize(y);
      }
      // optimal x for fixed y
      for (int it = 0; it < 8; ++it) {
        apply_bilinear(c, d, x, y, tmp);  // N_y x
        z.assign(d, 0.0);
        for (int k = 0; k < d; ++k)
          for (int j = 0; j < d; ++j) {
            const double w = y[j] * tmp[k];
            if (w == 0.0) continue;
            for (int i = 0; i < d; ++i)
              z[i] += c[(static_cast<std::size_t>(k) * d + i) * d + j] * w;
          }
        if (vec_norm(z) == 0.0) break;
        x = z;
        normalize(x);
      }
      apply_bilinear(c, d, x, y, tmp);
      const double val = vec_norm(tmp);
      if (val > best) best = val;
      if (std::abs(val - prev) < 1e-15) break;
      prev = val;
    }
  }
  return best;
}

struct ParsedLabel {
  enum class Kind { abelian, so, so_pq } kind;
  int a = 0;
  int b = 0;
};

ParsedLabel parse_label(const std::string& label) {
  const auto colon = label.find(':');
  if (colon == std::string::npos)
    throw ConfigError("algebra label must look like abelian:d, so:m, or so:p,q; got '" +
                      label + "'");
  const std::string kind = label.substr(0, colon);
  const std::string args = label.substr(colon + 1);
  auto parse_int = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("bad integer '" + s + "' in algebra label '" + label + "'");
    return std::stoi(s);
  };
  ParsedLabel out{};
  const auto comma = args.find(',');
  if (kind == "abelian") {
    if (comma != std::string::npos)
      throw ConfigError("abelian takes one dimension: '" + label + "'");
    out.kind = ParsedLabel::Kind::abelian;
    out.a = parse_int(args);
    if (out.a < 1) throw ConfigError("abelian dimension must be >= 1");
    return out;
  }
  if (kind == "so") {
    if (comma == std::string::npos) {
      out.kind = ParsedLabel::Kind::so;
      out.a = parse_int(args);
      if (out.a < 2) throw ConfigError("so(m) needs m >= 2");
      return out;
    }
    out.kind = ParsedLabel::Kind::so_pq;
    out.a = parse_int(args.substr(0, comma));
    out.b = parse_int(args.substr(comma + 1));
    if (out.a < 1 || out.b < 0 || out.a + out.b < 2)
      throw ConfigError("so(p,q) needs p >= 1, q >= 0, p+q >= 2");
    return out;
  }
  throw ConfigError("unknown algebra kind '" + kind + "' in '" + label + "'");
}

}  // namespace

std::shared_ptr<const LieAlgebra> LieAlgebra::make(const std::string& label) {
  const ParsedLabel parsed = parse_label(label);
  auto alg = std::shared_ptr<LieAlgebra>(new LieAlgebra());
  alg->label_ = label;

  if (parsed.kind == ParsedLabel::Kind::abelian) {
    alg->dim_ = parsed.a;
    alg->msize_ = 0;
    alg->scale_ = 1.0;
    alg->dense_.assign(static_cast<std::size_t>(alg->dim_) * alg->dim_ * alg->dim_,
                       0.0);
    return alg;
  }

  const int p = parsed.a;
  const int q = (parsed.kind == ParsedLabel::Kind::so) ? 0 : parsed.b;
  const int m = p + q;
  const int d = m * (m - 1) / 2;
  alg->dim_ = d;
  alg->msize_ = m;

  // generator per lexicographic pair a < b; antisymmetric within a block,
  // symmetric across blocks so that tX I_pq = -I_pq X holds
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(d);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
  alg->basis_.resize(d);
  for (int t = 0; t < d; ++t) {
    const auto [a, b] = pairs[t];
    std::vector<double> gen(static_cast<std::size_t>(m) * m, 0.0);
    const bool cross = (a < p) != (b < p);
    gen[a * m + b] = 1.0;
    gen[b * m + a] = cross ? 1.0 : -1.0;
    alg->basis_[t] = std::move(gen);
  }

  // raw structure constants by brute-force commutation; a commutator's
  // coefficient on the pair (a,b) generator is its (a,b) entry
  std::vector<double> raw(static_cast<std::size_t>(d) * d * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const auto z = commutator(alg->basis_[i], alg->basis_[j], m);
      for (int k = 0; k < d; ++k) {
        const auto [a, b] = pairs[k];
        const double v = z[a * m + b];
        if (v != 0.0) {
          raw[(static_cast<std::size_t>(k) * d + i) * d + j] = v;
          raw[(static_cast<std::size_t>(k) * d + j) * d + i] = -v;
        }
      }
    }

  const double op_norm = bilinear_norm(raw, d);
  alg->scale_ = (op_norm > 1.0) ? 1.0 / op_norm : 1.0;

  alg->dense_.resize(raw.size());
  for (std::size_t idx = 0; idx < raw.size(); ++idx)
    alg->dense_[idx] = alg->scale_ * raw[idx];
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double c = alg->dense_[(static_cast<std::size_t>(k) * d + i) * d + j];
        if (c != 0.0) alg->terms_.push_back({k, i, j, c});
      }
  return alg;
}

double LieAlgebra::structure_constant(int k, int i, int j) const {
  return dense_[(static_cast<std::size_t>(k) * dim_ + i) * dim_ + j];
}

void LieAlgebra::bracket(const double* x, const double* y, double* out) const {
  std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(dim_));
  for (const BracketTerm& t : terms_) out[t.k] += t.c * x[t.i] * y[t.j];
}

std::vector<double> LieAlgebra::bracket(const std::vector<double>& x,
                                        const std::vector<double>& y) const {
  if (static_cast<int>(x.size()) != dim_ || static_cast<int>(y.size()) != dim_)
    throw ArgumentError("bracket: operand length does not match algebra dim");
  std::vector<double> out(dim_, 0.0);
  bracket(x.data(), y.data(), out.data());
  return out;
}

double LieAlgebra::inner(const double* x, const double* y) const {
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) s += x[i] * y[i];
  return s;
}

double LieAlgebra::inner(const std::vector<double>& x,
                         const std::vector<double>& y) const {
  if (static_cast<int>(x.size()) != dim_ || static_cast<int>(y.size()) != dim_)
    throw ArgumentError("inner: operand length does not match algebra dim");
  return inner(x.data(), y.data());
}

double LieAlgebra::norm(const double* x) const { return std::sqrt(inner(x, x)); }

double LieAlgebra::norm(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw ArgumentError("norm: operand length does not match algebra dim");
  return norm(x.data());
}

}  // namespace cartanlab
