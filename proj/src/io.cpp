#include "shrinkerlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "shrinkerlab/errors.hpp"

namespace shrinkerlab {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string curve_csv(const DiscreteCurve& curve) {
  std::string out = "x,y\n";
  for (const Vec2& p : curve.points()) out += format_double(p.x()) + "," + format_double(p.y()) + "\n";
  return out;
}

DiscreteCurve parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "x,y") throw InvalidCurve("curve CSV must start with header x,y");
  std::vector<Vec2> pts;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidCurve("row " + std::to_string(row) + " has no comma");
    try {
      size_t used = 0;
      const double x = std::stod(line.substr(0, comma), &used);
      const std::string ys = line.substr(comma + 1);
      size_t used_y = 0;
      const double y = std::stod(ys, &used_y);
      if (used_y != ys.size()) throw std::invalid_argument("trailing characters");
      pts.emplace_back(x, y);
    } catch (const std::exception&) {
      throw InvalidCurve("row " + std::to_string(row) + " is not a pair of numbers: " + line);
    }
  }
  return DiscreteCurve(std::move(pts));
}

DiscreteCurve read_curve(const std::filesystem::path& path) { return parse_curve_csv(read_text(path)); }

nlohmann::json trajectory_index(const FlowTrajectory& traj) {
  nlohmann::json j;
  j["picture"] = to_string(traj.picture());
  j["times"] = traj.times();
  j["m"] = traj.node_count();
  if (const auto& s = traj.singular_data()) {
    j["singularData"] = {{"T", s->T}, {"x0", {s->x0.x(), s->x0.y()}}};
  } else {
    j["singularData"] = nullptr;
  }
  return j;
}

std::vector<std::filesystem::path> write_trajectory(const std::filesystem::path& dir, const std::string& stem,
                                                    const FlowTrajectory& traj) {
  std::vector<std::filesystem::path> written;
  for (size_t k = 0; k < traj.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "_%05zu.csv", k);
    const auto path = dir / (stem + name);
    write_text(path, curve_csv(traj[k].curve));
    written.push_back(path);
  }
  const auto index = dir / (stem + ".json");
  write_text(index, trajectory_index(traj).dump(2) + "\n");
  written.push_back(index);
  return written;
}

}  // namespace shrinkerlab
