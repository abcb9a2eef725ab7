#ifndef BLOCKGP_IO_HPP
#define BLOCKGP_IO_HPP

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockgp/data.hpp"
#include "blockgp/design.hpp"

namespace blockgp {

/// All floating-point output carries 17 significant digits (round-trip safe).
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace io_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw std::invalid_argument(path + ": row with " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(t.header.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        row[i] = std::stod(cells[i]);
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ": cannot parse '" + cells[i] + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace io_detail

/// Dataset CSV: header x1,...,xp,y[,slice].
inline Dataset read_dataset_csv(const std::string& path) {
  const auto t = io_detail::read_table(path);
  int p = 0;
  while (p < static_cast<int>(t.header.size()) && t.header[p] == "x" + std::to_string(p + 1)) ++p;
  if (p == 0 || p >= static_cast<int>(t.header.size()) || t.header[p] != "y") {
    throw std::invalid_argument(path + ": expected header x1,...,xp,y[,slice]");
  }
  const bool with_slice =
      static_cast<int>(t.header.size()) == p + 2 && t.header[p + 1] == "slice";
  if (static_cast<int>(t.header.size()) != p + 1 && !with_slice) {
    throw std::invalid_argument(path + ": unexpected trailing columns");
  }
  Dataset ds;
  const int n = static_cast<int>(t.rows.size());
  ds.X.resize(n, p);
  ds.y.resize(n);
  if (with_slice) ds.slice.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < p; ++d) ds.X(i, d) = t.rows[i][d];
    ds.y(i) = t.rows[i][p];
    if (with_slice) ds.slice[i] = static_cast<int>(t.rows[i][p + 1]);
  }
  ds.validate();
  return ds;
}

inline void write_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  for (int d = 0; d < ds.p(); ++d) out << "x" << (d + 1) << ",";
  out << "y";
  if (ds.has_slices()) out << ",slice";
  out << "\n";
  for (int i = 0; i < ds.n(); ++i) {
    for (int d = 0; d < ds.p(); ++d) out << fmt17(ds.X(i, d)) << ",";
    out << fmt17(ds.y(i));
    if (ds.has_slices()) out << "," << ds.slice[i];
    out << "\n";
  }
}

/// Design CSV: x1,...,xp,slice.
inline void write_design_csv(const std::string& path, const SlicedDesign& d) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  const int p = static_cast<int>(d.points.cols());
  for (int c = 0; c < p; ++c) out << "x" << (c + 1) << ",";
  out << "slice\n";
  for (int r = 0; r < d.points.rows(); ++r) {
    for (int c = 0; c < p; ++c) out << fmt17(d.points(r, c)) << ",";
    out << d.slice_of[r] << "\n";
  }
}

inline SlicedDesign read_design_csv(const std::string& path) {
  const auto t = io_detail::read_table(path);
  int p = 0;
  while (p < static_cast<int>(t.header.size()) && t.header[p] == "x" + std::to_string(p + 1)) ++p;
  if (p == 0 || static_cast<int>(t.header.size()) != p + 1 || t.header[p] != "slice") {
    throw std::invalid_argument(path + ": expected header x1,...,xp,slice");
  }
  SlicedDesign d;
  const int n = static_cast<int>(t.rows.size());
  d.points.resize(n, p);
  d.slice_of.resize(n);
  int kmax = 0;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < p; ++c) d.points(i, c) = t.rows[i][c];
    d.slice_of[i] = static_cast<int>(t.rows[i][p]);
    kmax = std::max(kmax, d.slice_of[i]);
  }
  d.k = kmax;
  d.m = (kmax > 0 && n % kmax == 0) ? n / kmax : 0;
  return d;
}

/// Partition CSV: a single `block` column aligned with the dataset rows.
inline void write_partition_csv(const std::string& path, const Partition& part, int n) {
  std::vector<int> label(n, 0);
  for (int b = 0; b < part.k(); ++b) {
    for (int i : part.blocks[b]) label[i] = b + 1;
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << "block\n";
  for (int i = 0; i < n; ++i) out << label[i] << "\n";
}

inline Partition read_partition_csv(const std::string& path, int n) {
  const auto t = io_detail::read_table(path);
  if (t.header.size() != 1 || t.header[0] != "block") {
    throw std::invalid_argument(path + ": expected a single `block` column");
  }
  if (static_cast<int>(t.rows.size()) != n) {
    throw std::invalid_argument(path + ": row count does not match dataset");
  }
  int k = 0;
  for (const auto& r : t.rows) k = std::max(k, static_cast<int>(r[0]));
  Partition part;
  part.blocks.assign(k, {});
  for (int i = 0; i < n; ++i) {
    const int b = static_cast<int>(t.rows[i][0]);
    if (b < 1 || b > k) throw std::invalid_argument(path + ": invalid block label");
    part.blocks[b - 1].push_back(i);
  }
  part.validate(n);
  return part;
}

/// Test-point CSV: header x1,...,xp.
inline Eigen::MatrixXd read_points_csv(const std::string& path) {
  const auto t = io_detail::read_table(path);
  int p = 0;
  while (p < static_cast<int>(t.header.size()) && t.header[p] == "x" + std::to_string(p + 1)) ++p;
  if (p == 0 || p != static_cast<int>(t.header.size())) {
    throw std::invalid_argument(path + ": expected header x1,...,xp");
  }
  Eigen::MatrixXd X(t.rows.size(), p);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (int c = 0; c < p; ++c) X(static_cast<int>(i), c) = t.rows[i][c];
  }
  return X;
}

inline void write_points_csv(const std::string& path, const Eigen::MatrixXd& X) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  for (int c = 0; c < X.cols(); ++c) out << "x" << (c + 1) << (c + 1 < X.cols() ? "," : "\n");
  for (int r = 0; r < X.rows(); ++r) {
    for (int c = 0; c < X.cols(); ++c) out << fmt17(X(r, c)) << (c + 1 < X.cols() ? "," : "\n");
  }
}

/// Prediction CSV: x1,...,xp,mean,sd,lo3,hi3 with 3-sigma bands.
inline void write_predictions_csv(const std::string& path, const Eigen::MatrixXd& X,
                                  const std::vector<PredictionResult>& preds) {
  if (static_cast<int>(preds.size()) != X.rows()) {
    throw std::invalid_argument("write_predictions_csv: size mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  for (int c = 0; c < X.cols(); ++c) out << "x" << (c + 1) << ",";
  out << "mean,sd,lo3,hi3\n";
  for (int r = 0; r < X.rows(); ++r) {
    const double sd = std::sqrt(std::max(preds[r].variance, 0.0));
    for (int c = 0; c < X.cols(); ++c) out << fmt17(X(r, c)) << ",";
    out << fmt17(preds[r].mean) << "," << fmt17(sd) << "," << fmt17(preds[r].mean - 3.0 * sd)
        << "," << fmt17(preds[r].mean + 3.0 * sd) << "\n";
  }
}

/// FittedModel JSON. Written by hand so every float carries 17 significant
/// digits and key order is stable.
inline std::string fitted_model_json(const FittedModel& fit) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"method\": \"" << fit.method << "\",\n";
  out << "  \"basis\": \"" << fit.basis.name() << "\",\n";
  out << "  \"beta\": [";
  for (int i = 0; i < fit.params.beta.size(); ++i) {
    out << (i ? ", " : "") << fmt17(fit.params.beta(i));
  }
  out << "],\n";
  out << "  \"sigma2\": " << fmt17(fit.params.sigma2) << ",\n";
  out << "  \"phi\": [";
  for (int i = 0; i < fit.params.phi.phi.size(); ++i) {
    out << (i ? ", " : "") << fmt17(fit.params.phi.phi(i));
  }
  out << "],\n";
  out << "  \"objective\": " << fmt17(fit.objective) << ",\n";
  out << "  \"converged\": " << (fit.converged ? "true" : "false") << ",\n";
  out << "  \"wall_time_s\": " << fmt17(fit.wall_time_s) << "\n";
  out << "}\n";
  return out.str();
}

inline void write_fitted_model_json(const std::string& path, const FittedModel& fit) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << fitted_model_json(fit);
}

inline FittedModel read_fitted_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  nlohmann::json j;
  in >> j;
  FittedModel fit;
  fit.method = j.at("method").get<std::string>();
  const std::string basis = j.value("basis", "constant");
  if (basis == "constant") {
    fit.basis = BasisSpec::constant();
  } else if (basis == "linear") {
    fit.basis = BasisSpec::linear();
  } else {
    throw std::invalid_argument(path + ": basis '" + basis + "' cannot be restored");
  }
  const auto beta = j.at("beta").get<std::vector<double>>();
  fit.params.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  fit.params.sigma2 = j.at("sigma2").get<double>();
  const auto phi = j.at("phi").get<std::vector<double>>();
  fit.params.phi = RoughnessParams(Eigen::Map<const Eigen::VectorXd>(phi.data(), phi.size()));
  fit.objective = j.value("objective", 0.0);
  fit.wall_time_s = j.value("wall_time_s", 0.0);
  fit.converged = j.value("converged", true);
  return fit;
}

}  // namespace blockgp

#endif  // BLOCKGP_IO_HPP
