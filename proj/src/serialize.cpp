#include "cartanlab/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <vector>

#include "cartanlab/errors.hpp"

namespace cartanlab {
namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ArgumentError("form snapshot: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_form_binary(const Form& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArgumentError("cannot open for writing: " + path);
  const Grid& g = f.grid();
  put_u32(os, static_cast<std::uint32_t>(g.n()));
  for (int ax = 0; ax < g.n(); ++ax) put_u32(os, static_cast<std::uint32_t>(g.size(ax)));
  put_u32(os, static_cast<std::uint32_t>(f.degree()));
  put_u32(os, static_cast<std::uint32_t>(f.alg_dim()));

  const std::size_t np = g.npoints();
  const int nc = f.ncomp(), d = f.alg_dim();
  std::vector<double> row(static_cast<std::size_t>(nc) * d);
  for (std::size_t p = 0; p < np; ++p) {
    std::size_t s = 0;
    for (int c = 0; c < nc; ++c)
      for (int a = 0; a < d; ++a) row[s++] = f.field(c, a)[p];
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!os) throw ArgumentError("write failed: " + path);
}

Form read_form_binary(const std::string& path, AlgebraPtr algebra) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open for reading: " + path);
  const int n = static_cast<int>(get_u32(is));
  if (n < 1 || n > 4) throw ArgumentError("form snapshot: bad dimension");
  std::vector<int> sizes(n);
  for (int ax = 0; ax < n; ++ax) sizes[ax] = static_cast<int>(get_u32(is));
  const int k = static_cast<int>(get_u32(is));
  const int d = static_cast<int>(get_u32(is));
  if (!algebra || algebra->dim() != d)
    throw ArgumentError("form snapshot: algebra dimension mismatch");

  Grid g(n, sizes);
  Form f(g, k, std::move(algebra));
  const std::size_t np = g.npoints();
  const int nc = f.ncomp();
  std::vector<double> row(static_cast<std::size_t>(nc) * d);
  for (std::size_t p = 0; p < np; ++p) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!is) throw ArgumentError("form snapshot: truncated payload");
    std::size_t s = 0;
    for (int c = 0; c < nc; ++c)
      for (int a = 0; a < d; ++a) f.field(c, a)[p] = row[s++];
  }
  return f;
}

void write_form_csv(const Form& f, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ArgumentError("cannot open for writing: " + path);
  const Grid& g = f.grid();
  for (int ax = 0; ax < g.n(); ++ax) os << "i" << ax << ",";
  os << "comp,coeff,value\n";

  std::vector<int> idx(g.n(), 0);
  char buf[40];
  const std::size_t np = g.npoints();
  for (std::size_t p = 0; p < np; ++p) {
    for (int c = 0; c < f.ncomp(); ++c)
      for (int a = 0; a < f.alg_dim(); ++a) {
        for (int ax = 0; ax < g.n(); ++ax) os << idx[ax] << ",";
        std::snprintf(buf, sizeof buf, "%.17g", f.field(c, a)[p]);
        os << c << "," << a << "," << buf << "\n";
      }
    for (int ax = g.n() - 1; ax >= 0; --ax) {
      if (++idx[ax] < g.size(ax)) break;
      idx[ax] = 0;
    }
  }
  if (!os) throw ArgumentError("write failed: " + path);
}

void write_algebra_sidecar(const std::string& path, const std::string& label) {
  std::ofstream os(path + ".meta", std::ios::trunc);
  if (!os) throw ArgumentError("cannot open for writing: " + path + ".meta");
  os << "algebra " << label << "\n";
}

std::string read_algebra_sidecar(const std::string& path) {
  std::ifstream is(path + ".meta");
  if (!is) throw ArgumentError("cannot open for reading: " + path + ".meta");
  std::string key, label;
  is >> key >> label;
  if (key != "algebra" || label.empty())
    throw ArgumentError("malformed sidecar: " + path + ".meta");
  return label;
}

}  // namespace cartanlab
