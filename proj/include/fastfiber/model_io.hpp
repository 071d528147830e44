#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fastfiber/mesh.hpp"

namespace fastfiber {

// Model file: one JSON document with `surfaces` (vertices, triangles,
// conductivity_in/out), `wires` (nodes, segments, radii, 6 tensor entries per
// segment) and `white_matter_index`. Coordinates in meters, conductivities in
// S/m. Loading validates the full model.
HeadModel load_model(const std::string& path);
void save_model(const HeadModel& model, const std::string& path);

HeadModel model_from_json_text(const std::string& text);
std::string model_to_json_text(const HeadModel& model);

// Named dense matrices in a flat binary layout (name, dims, row-major f64),
// for cross-implementation diffing of assembled blocks.
struct NamedMatrix {
  std::string name;
  Eigen::MatrixXd data;
};
void write_matrix_dump(const std::string& path, const std::vector<NamedMatrix>& blocks);
std::vector<NamedMatrix> read_matrix_dump(const std::string& path);

}  // namespace fastfiber
