#pragma once

#include <string>

#include "mvr/mesh.hpp"

namespace mvr {

// Format by extension: .obj (positions + vn normals) or .ply (ASCII, double
// precision positions/normals and per-vertex RGB albedo when present).
// ASCII doubles are printed with 17 significant digits, so geometry
// round-trips bit-exact.
void export_mesh(const TriMesh& mesh, const std::string& path);
TriMesh import_mesh(const std::string& path);

}  // namespace mvr
