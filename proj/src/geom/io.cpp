#include "cardioflow/geom/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cardioflow/error.hpp"
#include "cardioflow/file_util.hpp"

namespace cardioflow::geom {

namespace {

std::string location(int line) { return "line " + std::to_string(line); }

Vec3 parse_vec3(std::istringstream& ss, int line) {
  Vec3 v;
  if (!(ss >> v.x() >> v.y() >> v.z())) throw IoError(location(line) + ": expected three coordinates");
  if (!v.allFinite()) throw NonFiniteError(location(line) + ": non-finite coordinate");
  return v;
}

void set_precision(std::ostream& out) { out << std::setprecision(17); }

}  // namespace

TriMesh read_obj(std::istream& in) {
  TriMesh mesh;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream ss(text);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      mesh.vertices.push_back(parse_vec3(ss, line));
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ss >> token) {
        const std::string head = token.substr(0, token.find('/'));
        int idx = 0;
        try {
          idx = std::stoi(head);
        } catch (const std::exception&) {
          throw IoError(location(line) + ": bad face index '" + token + "'");
        }
        idx = idx < 0 ? static_cast<int>(mesh.vertices.size()) + idx : idx - 1;
        poly.push_back(idx);
      }
      if (poly.size() < 3) throw IoError(location(line) + ": face with fewer than three vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.emplace_back(poly[0], poly[k], poly[k + 1]);
    }
  }
  check_indices(mesh);
  return mesh;
}

TriMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_obj(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_obj(std::ostream& out, const TriMesh& mesh) {
  set_precision(out);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ostringstream ss;
  write_obj(ss, mesh);
  atomic_write(path, ss.str());
}

PointCloud read_ply(std::istream& in) {
  std::string text;
  if (!std::getline(in, text) || text.rfind("ply", 0) != 0) throw IoError("not a PLY file");
  std::size_t count = 0;
  std::vector<std::string> props;
  bool in_vertex = false;
  while (std::getline(in, text)) {
    std::istringstream ss(text);
    std::string tag;
    ss >> tag;
    if (tag == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw IoError("only ASCII PLY is supported, got " + fmt);
    } else if (tag == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> count;
    } else if (tag == "property" && in_vertex) {
      std::string type, name;
      ss >> type >> name;
      props.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  int ix = -1, iy = -1, iz = -1, iphase = -1, islice = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    const int k = static_cast<int>(i);
    if (props[i] == "x") ix = k;
    if (props[i] == "y") iy = k;
    if (props[i] == "z") iz = k;
    if (props[i] == "phase") iphase = k;
    if (props[i] == "slice") islice = k;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw IoError("PLY vertex element lacks x/y/z");
  PointCloud pc;
  std::vector<double> row(props.size());
  for (std::size_t n = 0; n < count; ++n) {
    for (auto& r : row) {
      if (!(in >> r)) throw IoError("PLY truncated at vertex " + std::to_string(n));
    }
    const Vec3 p(row[ix], row[iy], row[iz]);
    if (!p.allFinite()) throw NonFiniteError("PLY vertex " + std::to_string(n) + " is not finite");
    pc.points.push_back(p);
    if (iphase >= 0) pc.phase.push_back(static_cast<int>(row[iphase]));
    if (islice >= 0) pc.slice.push_back(static_cast<int>(row[islice]));
  }
  return pc;
}

void write_ply(std::ostream& out, const PointCloud& pc) {
  set_precision(out);
  out << "ply\nformat ascii 1.0\nelement vertex " << pc.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (pc.has_phase()) out << "property int phase\n";
  if (pc.has_slice()) out << "property int slice\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (pc.has_phase()) out << ' ' << pc.phase[i];
    if (pc.has_slice()) out << ' ' << pc.slice[i];
    out << '\n';
  }
}

PointCloud read_points_text(std::istream& in) {
  PointCloud pc;
  std::string text;
  int line = 0;
  int arity = -1;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    std::istringstream ss(text);
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof()) throw IoError(location(line) + ": unparsable value");
    const int n = static_cast<int>(vals.size());
    if (n < 3 || n > 5) throw IoError(location(line) + ": expected 3 to 5 values, got " + std::to_string(n));
    if (arity >= 0 && n != arity) {
      throw IoError(location(line) + ": " + std::to_string(n) + " values, previous lines had " +
                    std::to_string(arity));
    }
    arity = n;
    const Vec3 p(vals[0], vals[1], vals[2]);
    if (!p.allFinite()) throw NonFiniteError(location(line) + ": non-finite coordinate");
    pc.points.push_back(p);
    if (n >= 4) pc.phase.push_back(static_cast<int>(vals[3]));
    if (n >= 5) pc.slice.push_back(static_cast<int>(vals[4]));
  }
  return pc;
}

void write_points_text(std::ostream& out, const PointCloud& pc) {
  set_precision(out);
  // A slice column without a phase column would be read back as a phase.
  const bool phase = pc.has_phase() || pc.has_slice();
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (phase) out << ' ' << (pc.has_phase() ? pc.phase[i] : 0);
    if (pc.has_slice()) out << ' ' << pc.slice[i];
    out << '\n';
  }
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return path.extension() == ".ply" ? read_ply(in) : read_points_text(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& pc) {
  std::ostringstream ss;
  if (path.extension() == ".ply") {
    write_ply(ss, pc);
  } else {
    write_points_text(ss, pc);
  }
  atomic_write(path, ss.str());
}

}  // namespace cardioflow::geom
