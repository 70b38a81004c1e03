#include "tpr/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "tpr/version.hpp"

namespace tpr {

namespace {

template <typename Derived>
Json vector_json(const Eigen::MatrixBase<Derived>& v) {
  Json arr = Json::array();
  for (Index k = 0; k < v.size(); ++k) arr.push_back(static_cast<double>(v[k]));
  return arr;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::vector<double> number_list(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_array())
    throw std::invalid_argument(fmt::format("instance JSON: missing array '{}'", key));
  std::vector<double> out;
  for (const auto& v : doc.at(key)) {
    if (!v.is_number()) throw std::invalid_argument(fmt::format("instance JSON: non-numeric entry in '{}'", key));
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

Json instance_to_json(const ProblemInstance<double>& inst) {
  Json gt = Json::array();
  for (Index k = 0; k < inst.n(); ++k) {
    gt.push_back(inst.ground_truth[k].real());
    gt.push_back(inst.ground_truth[k].imag());
  }
  Json vectors = Json::array();
  const auto& P = inst.ensemble.plus();
  for (Index i = 0; i < P.rows(); ++i)
    for (Index j = 0; j < P.cols(); ++j) vectors.push_back(P(i, j));
  Json doc;
  doc["version"] = kVersion;
  doc["n"] = inst.n();
  doc["m"] = inst.m();
  doc["seed"] = inst.ensemble.seed();
  doc["sigma"] = inst.ensemble.sigma();
  doc["ground_truth"] = std::move(gt);
  doc["vectors"] = std::move(vectors);
  doc["measurements"] = vector_json(inst.measurements);
  return doc;
}

ProblemInstance<double> instance_from_json(const Json& doc) {
  for (const char* key : {"n", "m", "sigma"})
    if (!doc.contains(key)) throw std::invalid_argument(fmt::format("instance JSON: missing '{}'", key));
  const auto n = doc.at("n").get<Index>();
  const auto m = doc.at("m").get<Index>();
  if (n < 1 || m < 1) throw std::invalid_argument("instance JSON: n and m must be >= 1");
  const double sigma = doc.at("sigma").get<double>();
  const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
  const auto gt = number_list(doc, "ground_truth");
  const auto vectors = number_list(doc, "vectors");
  const auto y = number_list(doc, "measurements");
  if (gt.size() != static_cast<std::size_t>(2 * n))
    throw std::invalid_argument("instance JSON: ground_truth must hold 2n numbers");
  if (vectors.size() != static_cast<std::size_t>(2 * n * m))
    throw std::invalid_argument("instance JSON: vectors must hold m * 2n numbers");
  if (y.size() != static_cast<std::size_t>(m)) throw std::invalid_argument("instance JSON: measurements must hold m numbers");

  DenseMatrix<double> rows(m, 2 * n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < 2 * n; ++j) rows(i, j) = vectors[static_cast<std::size_t>(i * 2 * n + j)];
  ComplexVector<double> x(n);
  for (Index k = 0; k < n; ++k)
    x[k] = {gt[static_cast<std::size_t>(2 * k)], gt[static_cast<std::size_t>(2 * k + 1)]};
  auto inst = make_instance(SensingEnsemble<double>(std::move(rows), sigma, seed), x);
  for (Index i = 0; i < m; ++i) {
    const double stored = y[static_cast<std::size_t>(i)];
    const double fresh = inst.measurements[i];
    if (std::abs(stored - fresh) > kMeasurementTolerance * std::max(1.0, std::abs(fresh)))
      throw std::invalid_argument(
          fmt::format("instance JSON: measurement {} is {} but the vectors give {}", i, stored, fresh));
  }
  return inst;
}

Json estimate_to_json(const OpNormEstimate<double>& est) {
  Json probe = Json::array();
  for (int s = 0; s < 4; ++s) probe.push_back(vector_json(est.probe[s]));
  Json doc;
  doc["value"] = est.value;
  doc["probe"] = std::move(probe);
  doc["restarts_used"] = est.restarts_used;
  doc["iterations"] = est.iterations;
  doc["converged"] = est.converged;
  return doc;
}

Json region_report_to_json(const RegionReport<double>& rep) {
  Json doc;
  doc["in_r1"] = rep.in_r1;
  doc["in_r2"] = rep.in_r2;
  doc["in_r3"] = rep.in_r3;
  doc["grad_g_norm"] = rep.grad_g_norm;
  doc["grad_f_norm"] = rep.grad_f_norm;
  doc["critical_threshold"] = rep.critical_threshold;
  doc["saddle_witness"] = rep.saddle_witness;
  doc["min_hess_eig"] = rep.min_hess_eig ? Json(*rep.min_hess_eig) : Json(nullptr);
  doc["hess_scale"] = rep.hess_scale;
  doc["orbit_dist_rel"] = rep.orbit_dist_rel;
  doc["classification"] = std::string(to_string(rep.classification));
  return doc;
}

Json certificate_to_json(const CertificateReport<double>& cert) {
  Json doc;
  doc["min_margin"] = finite_or_null(cert.min_margin);
  doc["states_checked"] = cert.states_checked;
  doc["per_measurement"] = vector_json(cert.per_measurement);
  return doc;
}

void write_provenance(std::ostream& out, const Json& provenance) {
  out << "# tpr " << kVersion << '\n';
  out << "# config " << provenance.dump() << '\n';
}

void write_coverage_csv(std::ostream& out, const CoverageResult<double>& cov, const Json& provenance) {
  write_provenance(out, provenance);
  const Index d = cov.samples.empty() ? 0 : cov.samples.front().x.size();
  std::string header;
  for (Index k = 0; k < d; ++k) header += fmt::format("x{},", k);
  out << header << "r1,r2,r3,covered\n";
  for (const auto& s : cov.samples) {
    std::string line;
    for (Index k = 0; k < d; ++k) line += format_number(s.x[k]) + ',';
    line += fmt::format("{},{},{},{}\n", int(s.r1), int(s.r2), int(s.r3), int(s.covered()));
    out << line;
  }
}

void write_trajectory_csv(std::ostream& out, const Trajectory<double>& traj, Index m, bool time_column,
                          const Json& provenance) {
  write_provenance(out, provenance);
  out << (time_column ? "t" : "k") << ",loss,normalized_loss,orbit_dist_rel,certificate_margin\n";
  const double md = static_cast<double>(m);
  for (std::size_t k = 0; k < traj.loss.size(); ++k) {
    const std::string index = time_column ? format_number(traj.time[k]) : fmt::format("{}", k);
    out << fmt::format("{},{},{},{},{}\n", index, traj.loss[k], traj.loss[k] / md, traj.orbit_dist_rel[k],
                       traj.certificate_margin[k]);
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  write_text_file(path, doc.dump(2) + '\n');
}

}  // namespace tpr
