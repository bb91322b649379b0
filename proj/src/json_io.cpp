#include "cfslab/json_io.hpp"

#include <fstream>

namespace cfslab {

Json complex_to_json(const cplx& z) { return Json::array({z.real(), z.imag()}); }

Json matrix_to_json(const Mat& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Mat matrix_from_json(const Json& j) {
  int rows = static_cast<int>(j.size());
  int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Mat m(rows, cols);
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b)
      m(a, b) = cplx(j[a][b][0].get<double>(), j[a][b][1].get<double>());
  return m;
}

Json system_to_json(const DiscreteSystem& sys) {
  Json j;
  j["spin_dimension"] = sys.n;
  j["hilbert_dimension"] = sys.f;
  j["kappa"] = sys.kappa;
  j["r"] = sys.r;
  j["s"] = sys.s;
  Json pts = Json::array();
  for (int i = 0; i < sys.size(); ++i) {
    Json p;
    p["weight"] = sys.weights[i];
    p["time"] = sys.times[i];
    p["matrix"] = matrix_to_json(sys.points[i]);
    pts.push_back(p);
  }
  j["points"] = pts;
  return j;
}

DiscreteSystem system_from_json(const Json& j) {
  DiscreteSystem sys;
  sys.n = j.at("spin_dimension").get<int>();
  sys.f = j.at("hilbert_dimension").get<int>();
  sys.kappa = j.at("kappa").get<double>();
  sys.r = j.value("r", 0.0);
  sys.s = j.value("s", 0.0);
  for (const auto& p : j.at("points")) {
    sys.weights.push_back(p.at("weight").get<double>());
    sys.times.push_back(p.at("time").get<double>());
    sys.points.push_back(matrix_from_json(p.at("matrix")));
  }
  return sys;
}

DiscreteSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  return system_from_json(j);
}

void save_system(const DiscreteSystem& sys, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << system_to_json(sys).dump(2) << "\n";
}

}  // namespace cfslab
