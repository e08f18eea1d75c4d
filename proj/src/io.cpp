#include "fracmap/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fracmap {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string require_prefix(const std::string& line, const std::string& key) {
  if (line.rfind(key, 0) != 0)
    throw io_error("FHM1: expected header line '" + key + "...', got '" + line + "'");
  return line.substr(key.size());
}

double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw io_error("trailing characters");
    return v;
  } catch (const io_error&) {
    throw;
  } catch (const std::exception&) {
    throw io_error("malformed number: '" + s + "'");
  }
}

std::vector<double> parse_doubles(const std::string& s) {
  std::istringstream is(s);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw io_error("malformed number list: '" + s + "'");
  return out;
}

}  // namespace

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw io_error("cannot open for writing: " + tmp);
    os << content;
    if (!os) throw io_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw io_error("rename failed: " + path);
}

// ---------------------------------------------------------------------------
// FHM1

void write_field(const VectorField& u, const std::string& path, bool binary) {
  u.validate();
  if (u.exterior.kind != Exterior::Kind::None &&
      (!u.exterior.offset.empty() || u.exterior.scale != 1.0))
    throw io_error("write_field: pulled-back exterior descriptors are not serializable");
  std::ostringstream os;
  os << "FHM1\n";
  os << "n=" << u.spec.n << " d=" << u.spec.d << "\n";
  os << "origin=";
  for (int a = 0; a < u.spec.n; ++a)
    os << (a ? " " : "") << fmt17(u.spec.origin[a]);
  os << "\n";
  os << "h=" << fmt17(u.spec.h) << "\n";
  os << "counts=";
  for (int a = 0; a < u.spec.n; ++a) os << (a ? " " : "") << u.spec.counts[a];
  os << "\n";
  os << "exterior=" << u.exterior.describe() << "\n";
  if (binary) {
    os.write(reinterpret_cast<const char*>(u.values.data()),
             static_cast<std::streamsize>(u.values.size() * sizeof(double)));
  } else {
    for (std::int64_t i = 0; i < u.spec.total(); ++i) {
      const auto v = u.at(i);
      for (int k = 0; k < u.spec.d; ++k) os << (k ? "," : "") << fmt17(v[k]);
      os << "\n";
    }
  }
  write_text_atomic(path, os.str());
}

VectorField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open field file: " + path);
  std::string line;
  auto getline_req = [&](const char* what) {
    if (!std::getline(is, line)) throw io_error(std::string("FHM1: missing ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  getline_req("magic");
  if (line != "FHM1") throw io_error("not an FHM1 file: " + path);

  VectorField u;
  getline_req("dimensions");
  {
    const auto parts = split(line, ' ');
    if (parts.size() != 2) throw io_error("FHM1: bad dimension line");
    u.spec.n = static_cast<int>(parse_double(require_prefix(parts[0], "n=")));
    u.spec.d = static_cast<int>(parse_double(require_prefix(parts[1], "d=")));
  }
  getline_req("origin");
  u.spec.origin = parse_doubles(require_prefix(line, "origin="));
  getline_req("h");
  u.spec.h = parse_double(require_prefix(line, "h="));
  getline_req("counts");
  {
    const auto vals = parse_doubles(require_prefix(line, "counts="));
    for (double v : vals) u.spec.counts.push_back(static_cast<int>(v));
  }
  getline_req("exterior");
  {
    const std::string ext = require_prefix(line, "exterior=");
    const auto parts = split(ext, ' ');
    if (parts[0] == "none") {
      u.exterior = Exterior::none();
    } else if (parts[0] == "vortex") {
      u.exterior = Exterior::vortex();
    } else if (parts[0] == "wave") {
      u.exterior = Exterior::wave();
    } else if (parts[0] == "constant") {
      std::vector<double> c;
      for (std::size_t i = 1; i < parts.size(); ++i)
        if (!parts[i].empty()) c.push_back(parse_double(parts[i]));
      u.exterior = Exterior::constant_value(std::move(c));
    } else {
      throw io_error("FHM1: unknown exterior '" + ext + "'");
    }
  }
  try {
    u.spec.validate();
  } catch (const std::exception& e) {
    throw io_error(std::string("FHM1: bad header: ") + e.what());
  }

  const std::int64_t count = u.spec.total() * u.spec.d;
  // sniff: binary payload is exactly count doubles
  const std::streampos data_start = is.tellg();
  is.seekg(0, std::ios::end);
  const std::streamoff bytes = is.tellg() - data_start;
  is.seekg(data_start);
  u.values.resize(count);
  if (bytes == static_cast<std::streamoff>(count * sizeof(double))) {
    is.read(reinterpret_cast<char*>(u.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw io_error("FHM1: short binary payload");
  } else {
    for (std::int64_t i = 0; i < u.spec.total(); ++i) {
      getline_req("data row");
      const auto cells = split(line, ',');
      if (static_cast<int>(cells.size()) != u.spec.d)
        throw io_error("FHM1: bad row arity at node " + std::to_string(i));
      for (int k = 0; k < u.spec.d; ++k)
        u.values[i * u.spec.d + k] = parse_double(cells[k]);
    }
  }
  // the vortex placeholder convention is part of the descriptor
  if (u.exterior.kind == Exterior::Kind::Vortex && u.spec.n == 2) {
    const double zero[2] = {0.0, 0.0};
    u.flagged = {u.spec.nearest_node(zero)};
  }
  u.validate();
  return u;
}

// ---------------------------------------------------------------------------
// CSVs

void write_measure(const DiscreteMeasure& mu, const std::string& path) {
  mu.validate();
  std::ostringstream os;
  const bool radii = mu.has_radii();
  for (int a = 0; a < mu.n; ++a) os << "x" << (a + 1) << ",";
  os << "weight";
  if (radii) os << ",radius";
  os << "\n";
  for (const auto& atom : mu.atoms) {
    for (int a = 0; a < mu.n; ++a) os << fmt17(atom.x[a]) << ",";
    os << fmt17(atom.weight);
    if (radii) os << "," << fmt17(atom.radius);
    os << "\n";
  }
  write_text_atomic(path, os.str());
}

DiscreteMeasure read_measure(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open measure file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw io_error("measure file empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  int n = 0;
  bool radii = false;
  for (const auto& col : header) {
    if (col == "weight") continue;
    if (col == "radius") {
      radii = true;
      continue;
    }
    ++n;
  }
  if (n < 1) throw io_error("measure file: no coordinate columns");
  DiscreteMeasure mu;
  mu.n = n;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != n + 1 + (radii ? 1 : 0))
      throw io_error("measure file: bad row arity: " + line);
    DiscreteMeasure::Atom a;
    for (int i = 0; i < n; ++i) a.x.push_back(parse_double(cells[i]));
    a.weight = parse_double(cells[n]);
    if (radii) a.radius = parse_double(cells[n + 1]);
    mu.atoms.push_back(std::move(a));
  }
  mu.validate();
  return mu;
}

void write_points(const std::vector<std::vector<double>>& pts,
                  const std::string& path) {
  std::ostringstream os;
  const int n = pts.empty() ? 2 : static_cast<int>(pts.front().size());
  for (int a = 0; a < n; ++a) os << (a ? "," : "") << "x" << (a + 1);
  os << "\n";
  for (const auto& p : pts) {
    for (int a = 0; a < n; ++a) os << (a ? "," : "") << fmt17(p[a]);
    os << "\n";
  }
  write_text_atomic(path, os.str());
}

std::vector<std::vector<double>> read_points(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open point file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw io_error("point file empty: " + path);
  std::vector<std::vector<double>> pts;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    std::vector<double> p;
    for (const auto& c : cells) p.push_back(parse_double(c));
    pts.push_back(std::move(p));
  }
  return pts;
}

void write_density_curve(const DensityCurve& curve, const std::string& path) {
  std::ostringstream os;
  os << "r,theta\n";
  for (std::size_t i = 0; i < curve.radii.size(); ++i)
    os << fmt17(curve.radii[i]) << "," << fmt17(curve.thetas[i]) << "\n";
  write_text_atomic(path, os.str());
}

void write_audit(const MonotonicityAudit& audit, const std::string& path) {
  std::ostringstream os;
  os << "rho,r,lhs,rhs,mismatch\n";
  for (const auto& row : audit.rows)
    os << fmt17(row.rho) << "," << fmt17(row.r) << "," << fmt17(row.lhs) << ","
       << fmt17(row.rhs) << "," << fmt17(row.mismatch) << "\n";
  write_text_atomic(path, os.str());
}

void write_stratum(const Stratum& st, int n, const std::string& path) {
  std::ostringstream os;
  for (int a = 0; a < n; ++a) os << "x" << (a + 1) << ",";
  os << "witness_scale,witness_defect\n";
  for (const auto& w : st.members) {
    for (int a = 0; a < n; ++a) os << fmt17(w.x[a]) << ",";
    os << fmt17(w.scale) << "," << fmt17(w.defect) << "\n";
  }
  write_text_atomic(path, os.str());
}

void write_minimize_log(const MinimizeResult& res, const std::string& path) {
  std::ostringstream os;
  os << "iteration,energy,step,residual\n";
  for (const auto& row : res.log)
    os << row.iteration << "," << fmt17(row.energy) << "," << fmt17(row.step)
       << "," << fmt17(row.residual) << "\n";
  write_text_atomic(path, os.str());
}

void write_tree(const CoveringTree& tree, const std::string& path) {
  nlohmann::json j;
  j["root_energy"] = tree.root_energy;
  j["k"] = tree.params.k;
  j["delta"] = tree.params.delta;
  j["rho"] = tree.params.rho;
  j["r"] = tree.params.r;
  j["R"] = tree.params.R;
  j["nodes"] = nlohmann::json::array();
  for (const auto& nd : tree.nodes) {
    nlohmann::json nj;
    nj["id"] = nd.id;
    nj["parent"] = nd.parent;
    nj["center"] = nd.center;
    nj["radius"] = nd.radius;
    nj["class"] = to_string(nd.cls);
    if (nd.has_certificate) {
      nj["certificate"] = {{"energy_before", nd.cert_energy_before},
                           {"sup_after", nd.cert_sup_after},
                           {"drop", nd.cert_drop}};
    }
    j["nodes"].push_back(std::move(nj));
  }
  write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace fracmap
