#include "amsqn/problems.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace amsqn::problems {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  // row-major payload
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index jx = 0; jx < cols; ++jx) m(i, jx) = j.at(i).at(jx).get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

} // namespace

std::string save_instance_json(const ProblemInstance& p) {
  json doc;
  doc["kind"] = to_string(p.kind);
  doc["m"] = p.a.rows();
  doc["n"] = p.a.cols();
  doc["p"] = p.p;
  doc["n_classes"] = p.n_classes;
  doc["hidden"] = p.hidden;
  doc["seed"] = p.seed;
  doc["cbar"] = p.cbar;
  doc["omega"] = p.omega;
  doc["sigma"] = p.sigma;
  doc["regime"] = to_string(p.regime);
  doc["grad_normalization"] = p.grad_normalization;
  doc["a"] = matrix_to_json(p.a);
  doc["b"] = vector_to_json(p.b);
  doc["planted"] = vector_to_json(p.planted);
  return doc.dump();
}

ProblemInstance load_instance_json(const std::string& text) {
  const json doc = json::parse(text);
  ProblemInstance p;
  p.kind = problem_kind_from_string(doc.at("kind").get<std::string>());
  p.p = doc.at("p").get<double>();
  p.n_classes = doc.at("n_classes").get<int>();
  p.hidden = doc.at("hidden").get<int>();
  p.seed = doc.at("seed").get<std::uint64_t>();
  p.cbar = doc.at("cbar").get<double>();
  p.omega = doc.at("omega").get<double>();
  p.sigma = doc.at("sigma").get<double>();
  p.regime = regime_from_string(doc.at("regime").get<std::string>());
  p.grad_normalization = doc.at("grad_normalization").get<std::string>();
  p.a = matrix_from_json(doc.at("a"));
  p.b = vector_from_json(doc.at("b"));
  p.planted = vector_from_json(doc.at("planted"));
  if (p.a.rows() != doc.at("m").get<Index>() || p.a.cols() != doc.at("n").get<Index>())
    throw std::runtime_error("instance JSON: payload shape disagrees with header");
  return p;
}

void save_instance_file(const ProblemInstance& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << save_instance_json(p);
}

ProblemInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_instance_json(buf.str());
}

} // namespace amsqn::problems
