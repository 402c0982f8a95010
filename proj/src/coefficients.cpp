#include "facepipe/coefficients.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace facepipe {

CoefficientSet zero_coefficients(const MorphableBasis& basis) {
  CoefficientSet c;
  c.alpha = Eigen::VectorXd::Zero(basis.dim_id());
  c.beta = Eigen::VectorXd::Zero(basis.dim_exp());
  c.delta = Eigen::VectorXd::Zero(basis.dim_tex());
  return c;
}

CoefficientSet form_mixed_coefficients(const CoefficientSet& gt, const CoefficientSet& est,
                                       const AttributeSelector& sel) {
  CoefficientSet out = gt;
  if (sel.alpha) {
    if (est.alpha.size() != gt.alpha.size())
      throw std::invalid_argument("form_mixed_coefficients: alpha dim mismatch");
    out.alpha = est.alpha;
  }
  if (sel.beta) {
    if (est.beta.size() != gt.beta.size())
      throw std::invalid_argument("form_mixed_coefficients: beta dim mismatch");
    out.beta = est.beta;
  }
  if (sel.delta) {
    if (est.delta.size() != gt.delta.size())
      throw std::invalid_argument("form_mixed_coefficients: delta dim mismatch");
    out.delta = est.delta;
  }
  if (sel.gamma) out.gamma = est.gamma;
  if (sel.pose) out.pose = est.pose;
  return out;
}

namespace {

std::string format_values(const Eigen::VectorXd& v) {
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    if (i) out += ' ';
    out += buf;
  }
  return out;
}

Eigen::VectorXd parse_values(const std::string& s, const std::string& name) {
  std::istringstream in(s);
  std::vector<double> vals;
  double x;
  while (in >> x) vals.push_back(x);
  if (!in.eof())
    throw std::runtime_error("coefficients: bad number in record '" + name + "'");
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

}  // namespace

void write_coefficients(const CoefficientSet& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << "dims = " << c.alpha.size() << " " << c.beta.size() << " " << c.delta.size() << "\n";
  out << "alpha = " << format_values(c.alpha) << "\n";
  out << "beta = " << format_values(c.beta) << "\n";
  out << "delta = " << format_values(c.delta) << "\n";
  out << "gamma = " << format_values(c.gamma.gamma) << "\n";
  Eigen::VectorXd pose(6);
  pose << c.pose.euler, c.pose.translation;
  out << "pose = " << format_values(pose) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CoefficientFile read_coefficient_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  CoefficientFile file;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("coefficients: missing '=' at " + path.string() + ":" +
                               std::to_string(lineno));
    std::string name = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
    Eigen::VectorXd v = parse_values(value, name);
    if (name == "dims") {
      if (v.size() != 3) throw std::runtime_error("coefficients: dims needs 3 values");
      file.dims = Eigen::Vector3i(static_cast<int>(v[0]), static_cast<int>(v[1]),
                                  static_cast<int>(v[2]));
    } else if (name == "alpha") {
      file.alpha = v;
    } else if (name == "beta") {
      file.beta = v;
    } else if (name == "delta") {
      file.delta = v;
    } else if (name == "gamma") {
      if (v.size() != 27) throw std::runtime_error("coefficients: gamma needs 27 values");
      file.gamma = v;
    } else if (name == "pose") {
      if (v.size() != 6) throw std::runtime_error("coefficients: pose needs 6 values");
      file.pose = v;
    } else {
      throw std::runtime_error("coefficients: unknown record '" + name + "' in " + path.string());
    }
  }
  return file;
}

CoefficientSet to_coefficient_set(const CoefficientFile& file, const MorphableBasis& basis,
                                  const Illumination& default_gamma, const Pose& default_pose) {
  auto check_dim = [](const Eigen::VectorXd& v, Eigen::Index want, const char* name) {
    if (v.size() != want)
      throw std::runtime_error(std::string("coefficients: ") + name + " has wrong length");
  };
  CoefficientSet c = zero_coefficients(basis);
  c.gamma = default_gamma;
  c.pose = default_pose;
  if (file.alpha) {
    check_dim(*file.alpha, basis.dim_id(), "alpha");
    c.alpha = *file.alpha;
  }
  if (file.beta) {
    check_dim(*file.beta, basis.dim_exp(), "beta");
    c.beta = *file.beta;
  }
  if (file.delta) {
    check_dim(*file.delta, basis.dim_tex(), "delta");
    c.delta = *file.delta;
  }
  if (file.gamma) c.gamma.gamma = *file.gamma;
  if (file.pose) {
    c.pose.euler = file.pose->head<3>();
    c.pose.translation = file.pose->tail<3>();
  }
  return c;
}

}  // namespace facepipe
