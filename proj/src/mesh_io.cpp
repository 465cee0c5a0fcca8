#include "mvr/mesh_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mvr {

namespace {

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string e = path.substr(dot + 1);
  for (auto& c : e) c = static_cast<char>(std::tolower(c));
  return e;
}

void write_obj(const TriMesh& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& v : m.vertices)
    std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  for (const auto& n : m.vertex_normals)
    std::fprintf(f, "vn %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
  const bool with_n = !m.vertex_normals.empty();
  for (const auto& [a, b, c] : m.faces) {
    if (with_n)
      std::fprintf(f, "f %u//%u %u//%u %u//%u\n", a + 1, a + 1, b + 1, b + 1, c + 1, c + 1);
    else
      std::fprintf(f, "f %u %u %u\n", a + 1, b + 1, c + 1);
  }
  std::fclose(f);
}

void write_ply(const TriMesh& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  const bool with_n = !m.vertex_normals.empty();
  const bool with_a = m.has_albedo();
  std::fprintf(f, "ply\nformat ascii 1.0\n");
  std::fprintf(f, "element vertex %zu\n", m.vertices.size());
  std::fprintf(f, "property double x\nproperty double y\nproperty double z\n");
  if (with_n) std::fprintf(f, "property double nx\nproperty double ny\nproperty double nz\n");
  if (with_a)
    std::fprintf(f, "property double red\nproperty double green\nproperty double blue\n");
  std::fprintf(f, "element face %zu\n", m.faces.size());
  std::fprintf(f, "property list uchar int vertex_indices\nend_header\n");
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const auto& v = m.vertices[i];
    std::fprintf(f, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
    if (with_n) {
      const auto& n = m.vertex_normals[i];
      std::fprintf(f, " %.17g %.17g %.17g", n.x(), n.y(), n.z());
    }
    if (with_a) {
      const auto& a = m.vertex_albedo[i];
      std::fprintf(f, " %.17g %.17g %.17g", a.x(), a.y(), a.z());
    }
    std::fprintf(f, "\n");
  }
  for (const auto& [a, b, c] : m.faces) std::fprintf(f, "3 %u %u %u\n", a, b, c);
  std::fclose(f);
}

TriMesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh: " + path);
  TriMesh m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Eigen::Vector3d v;
      ss >> v.x() >> v.y() >> v.z();
      m.vertices.push_back(v);
    } else if (tag == "vn") {
      Eigen::Vector3d n;
      ss >> n.x() >> n.y() >> n.z();
      m.vertex_normals.push_back(n);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> fidx{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        fidx[k] = static_cast<std::uint32_t>(std::stoul(tok.substr(0, tok.find('/')))) - 1;
      }
      m.faces.push_back(fidx);
    }
  }
  if (!m.vertex_normals.empty() && m.vertex_normals.size() != m.vertices.size())
    throw std::runtime_error("obj: normal count does not match vertex count in " + path);
  return m;
}

TriMesh read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh: " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw std::runtime_error("not a PLY file: " + path);

  std::size_t n_verts = 0, n_faces = 0;
  std::vector<std::string> vert_props;
  std::string element;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw std::runtime_error("only ascii PLY supported: " + path);
    } else if (tag == "element") {
      std::size_t n;
      ss >> element >> n;
      if (element == "vertex") n_verts = n;
      else if (element == "face") n_faces = n;
    } else if (tag == "property" && element == "vertex") {
      std::string type, name;
      ss >> type >> name;
      vert_props.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }

  auto prop_index = [&](const char* name) {
    for (std::size_t i = 0; i < vert_props.size(); ++i)
      if (vert_props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = prop_index("x"), iy = prop_index("y"), iz = prop_index("z");
  const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
  const int ir = prop_index("red"), ig = prop_index("green"), ib = prop_index("blue");
  if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("ply: missing x/y/z in " + path);

  TriMesh m;
  m.vertices.resize(n_verts);
  if (inx >= 0) m.vertex_normals.resize(n_verts);
  if (ir >= 0) m.vertex_albedo.resize(n_verts);
  std::vector<double> vals(vert_props.size());
  for (std::size_t v = 0; v < n_verts; ++v) {
    if (!std::getline(in, line)) throw std::runtime_error("ply: truncated vertex list in " + path);
    std::istringstream ss(line);
    for (auto& x : vals) ss >> x;
    m.vertices[v] = {vals[ix], vals[iy], vals[iz]};
    if (inx >= 0) m.vertex_normals[v] = {vals[inx], vals[iny], vals[inz]};
    if (ir >= 0) m.vertex_albedo[v] = {vals[ir], vals[ig], vals[ib]};
  }
  m.faces.resize(n_faces);
  for (std::size_t f = 0; f < n_faces; ++f) {
    if (!std::getline(in, line)) throw std::runtime_error("ply: truncated face list in " + path);
    std::istringstream ss(line);
    int cnt;
    ss >> cnt;
    if (cnt != 3) throw std::runtime_error("ply: only triangle faces supported in " + path);
    ss >> m.faces[f][0] >> m.faces[f][1] >> m.faces[f][2];
  }
  return m;
}

}  // namespace

void export_mesh(const TriMesh& mesh, const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "obj") write_obj(mesh, path);
  else if (ext == "ply") write_ply(mesh, path);
  else throw std::runtime_error("unsupported mesh format: " + path);
}

TriMesh import_mesh(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "obj") return read_obj(path);
  if (ext == "ply") return read_ply(path);
  throw std::runtime_error("unsupported mesh format: " + path);
}

}  // namespace mvr
