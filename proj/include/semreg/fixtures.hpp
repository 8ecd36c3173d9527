#pragma once

#include "semreg/correspondence.hpp"
#include "semreg/mesh.hpp"

namespace semreg::fixtures {

// Unit icosphere: subdivisions 0,1,2,3 give 12/42/162/642 vertices.
TriMesh icosphere(int subdivisions);

TriMesh single_triangle();

// Two triangles sharing a diagonal (a fan-triangulated unit quad).
TriMesh quad_fan();

// Rotation by angle_deg about the y axis applied to every vertex.
TriMesh rotated_y(const TriMesh& mesh, double angle_deg);

// Anisotropic scale (1.0, 0.7, 1.3) followed by a twist about the y axis
// with angle rate_rad per unit height. Connectivity is preserved, so vertex i
// of the result corresponds to vertex i of the input.
TriMesh scaled_and_bent(const TriMesh& mesh, double rate_rad = 0.6);

// Maps every vertex of `mesh` to itself: lowest incident face, corner
// barycentric.
CorrespondenceMap identity_map(const TriMesh& mesh);

} // namespace semreg::fixtures
