#pragma once

#include <string>

#include "cartanlab/forms.hpp"

namespace cartanlab {

// Binary snapshot layout: little-endian uint32 header {n, sizes[0..n), k, d}
// followed by npoints*ncomp*d float64 values in point-major order (per point:
// components, per component: algebra coefficients). Grid periods are not
// stored; snapshots describe unit tori.
void write_form_binary(const Form& f, const std::string& path);

// Reads a snapshot written by write_form_binary. The algebra must match the
// stored coefficient dimension d.
Form read_form_binary(const std::string& path, AlgebraPtr algebra);

// Plot-ready CSV (one row per point/component/coefficient); intended for
// small grids.
void write_form_csv(const Form& f, const std::string& path);

// Sidecar metadata holding the algebra label, stored at path + ".meta".
void write_algebra_sidecar(const std::string& path, const std::string& label);
std::string read_algebra_sidecar(const std::string& path);

}  // namespace cartanlab
