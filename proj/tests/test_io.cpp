#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fastfiber/errors.hpp"
#include "fastfiber/model_io.hpp"

using namespace fastfiber;

namespace {

HeadModel tiny_model() {
  HeadModel model;
  model.surfaces = generate_nested_spheres({0.08, 0.09}, 1);
  model.conductivities = {0.13, 1.79, 0.0};
  model.white_matter_index = 1;
  model.wires = generate_orthogonal_fibers(0.08, 0.05, 4, 1e-7);
  build_fiber_tensors(model.wires, 1.3, 0.13);
  return model;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/fastfiber_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("model JSON round trip is exact") {
  HeadModel model = tiny_model();
  TempFile f("roundtrip.json");
  save_model(model, f.path);
  HeadModel back = load_model(f.path);

  REQUIRE(back.n_surfaces() == model.n_surfaces());
  for (int i = 0; i < model.n_surfaces(); ++i) {
    CHECK(back.surfaces[i].triangles == model.surfaces[i].triangles);
    REQUIRE(back.surfaces[i].n_vertices() == model.surfaces[i].n_vertices());
    for (int v = 0; v < model.surfaces[i].n_vertices(); ++v)
      CHECK(back.surfaces[i].vertices[v] == model.surfaces[i].vertices[v]);
  }
  CHECK(back.conductivities == model.conductivities);
  CHECK(back.wires.segments == model.wires.segments);
  CHECK(back.wires.radii == model.wires.radii);
  for (int n = 0; n < model.wires.n_nodes(); ++n)
    CHECK(back.wires.nodes[n] == model.wires.nodes[n]);
  for (int s = 0; s < model.wires.n_segments(); ++s)
    CHECK(back.wires.tensors[s] == model.wires.tensors[s]);
  CHECK(back.white_matter_index == model.white_matter_index);

  // serialization is deterministic
  CHECK(model_to_json_text(model) == model_to_json_text(back));
}

TEST_CASE("malformed model file reports a line number") {
  TempFile f("broken.json");
  {
    std::ofstream out(f.path);
    out << "{\n \"surfaces\": [\n {\n";
  }
  try {
    load_model(f.path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("loading enforces geometry validation") {
  HeadModel model = tiny_model();
  SUBCASE("open surface rejected") {
    model.surfaces[0].triangles.pop_back();
    // model_to_json_text does not validate; only save/load do
    std::string text = model_to_json_text(model);
    CHECK_THROWS_AS(model_from_json_text(text), GeometryError);
  }
  SUBCASE("equal conductivities rejected") {
    std::string text = model_to_json_text(model);
    auto pos = text.find("0.13");
    text.replace(pos, 4, "1.79");
    CHECK_THROWS_AS(model_from_json_text(text), Error);
  }
}

TEST_CASE("binary block dump round trip") {
  std::vector<NamedMatrix> blocks(2);
  blocks[0].name = "G_ss";
  blocks[0].data = Eigen::MatrixXd::Random(5, 7);
  blocks[1].name = "rhs_s";
  blocks[1].data = Eigen::MatrixXd::Random(5, 1);
  TempFile f("blocks.bin");
  write_matrix_dump(f.path, blocks);
  auto back = read_matrix_dump(f.path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "G_ss");
  CHECK(back[1].name == "rhs_s");
  CHECK((back[0].data - blocks[0].data).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back[1].data - blocks[1].data).cwiseAbs().maxCoeff() == 0.0);
}
