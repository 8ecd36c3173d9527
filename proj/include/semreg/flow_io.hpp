#pragma once

#include "semreg/camera.hpp"
#include "semreg/correspondence.hpp"
#include "semreg/mesh.hpp"
#include "semreg/parallel.hpp"
#include "semreg/raster.hpp"

#include <string>
#include <vector>

namespace semreg {

// Binary flow-map container, the interface to any external 2D correspondence
// producer. Layout (little-endian):
//   magic "SFLW", version u32 = 1, view count u32;
//   per view: camera index u32, width u32, height u32,
//             then height*width records of 3 f32 (u, v, valid in {0,1}),
//             row-major from the top-left pixel.
inline constexpr std::uint32_t kFlowFileVersion = 1;

void write_flows(const std::string& path, const std::vector<FlowMap>& maps);

// Reads and validates a flow file. When `rig` is given, the view count and
// per-view dimensions must match it.
std::vector<FlowMap> read_flows(const std::string& path, const CameraRig* rig = nullptr);

// Synthesizes ground-truth flows: rasterize the source per camera; at each
// covered pixel interpolate the per-vertex corresponded target positions
// (reconstructed from the map's barycentrics) and emit
// project(target point) - pixel NDC. Validity equals source coverage, no
// occlusion filtering; `erode_pixels` optionally shrinks the validity mask.
std::vector<FlowMap> oracle_flows(const TriMesh& source, const TriMesh& target,
                                  const CorrespondenceMap& gt, const CameraRig& rig,
                                  ThreadPool& pool, int erode_pixels = 0);

} // namespace semreg
