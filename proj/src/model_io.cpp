#include "fastfiber/model_io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fastfiber/errors.hpp"

namespace fastfiber {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_of_byte(const std::string& text, size_t byte) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + std::min(byte, text.size()), '\n'));
}

json parse_with_line(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": parse error at line " + std::to_string(line_of_byte(text, e.byte)) +
                     ": " + e.what());
  }
}

Vec3 to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element coordinate array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

HeadModel model_from_json_text(const std::string& text) {
  json j = parse_with_line(text, "model");
  HeadModel model;
  try {
    if (!j.contains("surfaces") || !j["surfaces"].is_array() || j["surfaces"].empty())
      throw ParseError("model: missing or empty 'surfaces'");
    std::vector<double> sigma_in, sigma_out;
    int sid = 1;
    for (const auto& js : j["surfaces"]) {
      SurfaceMesh s;
      s.surface_id = sid++;
      for (const auto& v : js.at("vertices")) s.vertices.push_back(to_vec3(v));
      for (const auto& t : js.at("triangles")) {
        if (!t.is_array() || t.size() != 3) throw ParseError("triangle needs 3 indices");
        s.triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
      }
      sigma_in.push_back(js.at("conductivity_in").get<double>());
      sigma_out.push_back(js.at("conductivity_out").get<double>());
      model.surfaces.push_back(std::move(s));
    }
    for (size_t i = 0; i + 1 < sigma_out.size(); ++i)
      if (sigma_out[i] != sigma_in[i + 1])
        throw GeometryError("conductivity_out of surface " + std::to_string(i + 1) +
                            " disagrees with conductivity_in of surface " + std::to_string(i + 2));
    model.conductivities = sigma_in;
    model.conductivities.push_back(sigma_out.back());

    if (j.contains("wires") && !j["wires"].is_null()) {
      const auto& jw = j["wires"];
      for (const auto& n : jw.at("nodes")) model.wires.nodes.push_back(to_vec3(n));
      for (const auto& s : jw.at("segments")) {
        if (!s.is_array() || s.size() != 2) throw ParseError("segment needs 2 indices");
        model.wires.segments.push_back({s[0].get<int>(), s[1].get<int>()});
      }
      for (const auto& r : jw.at("radii")) model.wires.radii.push_back(r.get<double>());
      for (const auto& t : jw.at("tensors")) {
        if (!t.is_array() || t.size() != 6)
          throw ParseError("tensor needs 6 unique entries (xx,xy,xz,yy,yz,zz)");
        Mat3 m;
        m << t[0].get<double>(), t[1].get<double>(), t[2].get<double>(),
             t[1].get<double>(), t[3].get<double>(), t[4].get<double>(),
             t[2].get<double>(), t[4].get<double>(), t[5].get<double>();
        model.wires.tensors.push_back(m);
      }
    }
    model.white_matter_index = j.value("white_matter_index", 1);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  validate_model(model);
  return model;
}

std::string model_to_json_text(const HeadModel& model) {
  json j;
  j["surfaces"] = json::array();
  for (int i = 0; i < model.n_surfaces(); ++i) {
    const auto& s = model.surfaces[i];
    json js;
    js["conductivity_in"] = model.sigma_in(i);
    js["conductivity_out"] = model.sigma_out(i);
    js["vertices"] = json::array();
    for (const auto& v : s.vertices) js["vertices"].push_back({v.x(), v.y(), v.z()});
    js["triangles"] = json::array();
    for (const auto& t : s.triangles) js["triangles"].push_back({t[0], t[1], t[2]});
    j["surfaces"].push_back(std::move(js));
  }
  if (!model.wires.empty()) {
    json jw;
    jw["nodes"] = json::array();
    for (const auto& n : model.wires.nodes) jw["nodes"].push_back({n.x(), n.y(), n.z()});
    jw["segments"] = json::array();
    for (const auto& s : model.wires.segments) jw["segments"].push_back({s[0], s[1]});
    jw["radii"] = model.wires.radii;
    jw["tensors"] = json::array();
    for (const auto& m : model.wires.tensors)
      jw["tensors"].push_back({m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)});
    j["wires"] = std::move(jw);
  }
  j["white_matter_index"] = model.white_matter_index;
  return j.dump(1);
}

HeadModel load_model(const std::string& path) {
  return model_from_json_text(read_file(path));
}

void save_model(const HeadModel& model, const std::string& path) {
  validate_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << model_to_json_text(model) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

void write_matrix_dump(const std::string& path, const std::vector<NamedMatrix>& blocks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const char magic[8] = {'F', 'F', 'B', 'L', 'K', '1', 0, 0};
  out.write(magic, 8);
  std::uint64_t count = blocks.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& b : blocks) {
    char name[16] = {};
    std::snprintf(name, sizeof(name), "%s", b.name.c_str());
    out.write(name, 16);
    std::uint64_t rows = b.data.rows(), cols = b.data.cols();
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < cols; ++c) {
        double v = b.data(r, c);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<NamedMatrix> read_matrix_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 6) != "FFBLK1") throw ParseError(path + ": bad block dump magic");
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  std::vector<NamedMatrix> blocks;
  for (std::uint64_t i = 0; i < count; ++i) {
    char name[17] = {};
    in.read(name, 16);
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (!in) throw ParseError(path + ": truncated block dump");
    NamedMatrix m;
    m.name = name;
    m.data.resize(rows, cols);
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < cols; ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        m.data(r, c) = v;
      }
    if (!in) throw ParseError(path + ": truncated block dump");
    blocks.push_back(std::move(m));
  }
  return blocks;
}

}  // namespace fastfiber
