#include "shapekernel/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "shapekernel/error.hpp"

namespace shapekernel {

Json vec_to_json(const Vec& v) {
  Json j = Json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw Error("expected a JSON array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Json mat_to_json(const Mat& m) {
  Json j = Json::array();
  for (int r = 0; r < m.rows(); ++r) j.push_back(vec_to_json(m.row(r).transpose()));
  return j;
}

Mat mat_from_json(const Json& j) {
  if (!j.is_array()) throw Error("expected a JSON matrix");
  if (j.empty()) return Mat();
  const size_t cols = j[0].size();
  Mat m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols) throw Error("ragged JSON matrix");
    m.row(r) = vec_from_json(j[r]).transpose();
  }
  return m;
}

Json kernel_to_json(const KernelSpec& k) {
  Json j;
  j["kind"] = k.kind_name();
  j["smoothness"] = k.smoothness();
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          j["sigma"] = vec_to_json(v.sigma);
        } else if constexpr (std::is_same_v<T, LaplacianKernel>) {
          j["rate"] = v.rate;
          j["dim"] = v.dim;
        } else if constexpr (std::is_same_v<T, DecomposableGaussianKernel>) {
          j["sigma"] = vec_to_json(v.sigma);
          j["output_cov"] = mat_to_json(v.output_cov);
        } else {
          j["A"] = mat_to_json(v.A);
          j["B"] = mat_to_json(v.B);
        }
      },
      k.variant());
  j["fingerprint"] = k.fingerprint();
  return j;
}

KernelSpec kernel_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int s = j.value("smoothness", 2);
  if (kind == "gaussian") {
    if (j.at("sigma").is_number()) return KernelSpec::gaussian(j.value("dim", 1), j["sigma"].get<double>(), s);
    return KernelSpec::gaussian(vec_from_json(j["sigma"]), s);
  }
  if (kind == "laplacian") return KernelSpec::laplacian(j.at("rate").get<double>(), j.value("dim", 1));
  if (kind == "decomposable_gaussian")
    return KernelSpec::decomposable_gaussian(vec_from_json(j.at("sigma")), mat_from_json(j.at("output_cov")), s);
  if (kind == "lti_control") return KernelSpec::lti_control(mat_from_json(j.at("A")), mat_from_json(j.at("B")));
  throw Error("unknown kernel kind '" + kind + "'");
}

Json functional_to_json(const DiffFunctional& d) {
  Json terms = Json::array();
  for (const auto& t : d.terms())
    terms.push_back({{"output", t.output}, {"order", t.order.orders()}, {"coeff", t.coeff}});
  return terms;
}

DiffFunctional functional_from_json(const Json& j) {
  std::vector<FunctionalTerm> terms;
  for (const auto& t : j)
    terms.push_back(FunctionalTerm{t.value("output", 0), MultiIndex(t.at("order").get<std::vector<int>>()),
                                   t.value("coeff", 1.0)});
  return DiffFunctional(std::move(terms));
}

Json atom_to_json(const Atom& a) {
  return {{"point", vec_to_json(a.point)}, {"functional", functional_to_json(a.functional)}};
}

Atom atom_from_json(const Json& j) {
  return Atom{vec_from_json(j.at("point")), functional_from_json(j.at("functional"))};
}

Json model_to_json(const Model& m) {
  Json j;
  j["kernel"] = kernel_to_json(m.kernel());
  j["kernel_fingerprint"] = m.kernel().fingerprint();
  Json atoms = Json::array();
  for (const auto& a : m.basis()) atoms.push_back(atom_to_json(a));
  j["atoms"] = atoms;
  j["coeffs"] = vec_to_json(m.coeffs());
  j["bias"] = vec_to_json(m.bias());
  j["norm"] = m.norm();
  return j;
}

Model model_from_json(const Json& j) {
  KernelSpec k = kernel_from_json(j.at("kernel"));
  if (j.contains("kernel_fingerprint") && j["kernel_fingerprint"].get<std::string>() != k.fingerprint())
    throw Error("model kernel fingerprint mismatch");
  std::vector<Atom> basis;
  for (const auto& a : j.at("atoms")) basis.push_back(atom_from_json(a));
  Vec coeffs = vec_from_json(j.at("coeffs"));
  if (coeffs.size() != Eigen::Index(basis.size())) throw Error("model coefficient count differs from atom count");
  Vec bias = j.contains("bias") ? vec_from_json(j["bias"]) : Vec();
  return Model(std::move(k), std::move(basis), std::move(coeffs), std::move(bias));
}

void save_model(const std::string& path, const Model& m) { write_text_file(path, model_to_json(m).dump(1)); }

Model load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

namespace {

Json form_to_json(const AffineForm& f) {
  Json evals = Json::array();
  for (const auto& [c, a] : f.evals) evals.push_back({{"coef", c}, {"atom", atom_to_json(a)}});
  return {{"constant", f.constant}, {"evals", evals}, {"bias", vec_to_json(f.bias)}};
}

Json element_to_json(const RkhsElement& e) {
  Json out = Json::array();
  for (const auto& [c, a] : e.terms) out.push_back({{"coef", c}, {"atom", atom_to_json(a)}});
  return out;
}

}  // namespace

Json record_to_json(const ConicConstraintRecord& r) {
  Json j;
  j["constraint"] = r.provenance.constraint;
  j["element"] = r.provenance.element;
  j["shifted"] = bool(r.shift);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, LinearRecord>) {
          j["type"] = b.equality ? "linear_eq" : "linear";
          j["expr"] = form_to_json(b.expr);
        } else if constexpr (std::is_same_v<T, SocBufferRecord>) {
          j["type"] = "soc_buffer";
          j["expr"] = form_to_json(b.expr);
          j["eta"] = b.eta;
        } else if constexpr (std::is_same_v<T, Rsoc2x2Record>) {
          j["type"] = "rsoc2x2";
          j["m11"] = form_to_json(b.m11);
          j["m12"] = form_to_json(b.m12);
          j["m22"] = form_to_json(b.m22);
          j["eta"] = b.eta;
        } else {
          j["type"] = "omega_inclusion";
          j["lhs"] = form_to_json(b.lhs);
          j["center"] = element_to_json(b.center);
          j["radius"] = b.radius;
          if (b.has_halfspace)
            j["halfspace"] = {{"normal", element_to_json(b.halfspace.normal)}, {"offset", b.halfspace.offset}};
        }
      },
      r.body);
  return j;
}

Json program_to_json(const ConeProgram& p) {
  Json j;
  Json vars = Json::array();
  for (const auto& v : p.variable_blocks()) vars.push_back({{"name", v.name}, {"offset", v.offset}, {"size", v.size}});
  j["variables"] = vars;
  j["num_vars"] = p.num_vars();
  j["P"] = mat_to_json(p.P);
  j["q"] = vec_to_json(p.q);
  j["objective_constant"] = p.objective_constant;
  Json blocks = Json::array();
  for (const auto& b : p.blocks()) {
    Json rows = Json::array();
    for (int r = b.row_offset; r < b.row_offset + b.dim; ++r) {
      Json entries = Json::array();
      for (const auto& [c, v] : p.row(r)) entries.push_back({c, v});
      rows.push_back({{"coeffs", entries}, {"constant", p.row_constant(r)}});
    }
    blocks.push_back({{"cone", cone_kind_name(b.kind)}, {"tag", b.tag}, {"rows", rows}});
  }
  j["blocks"] = blocks;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error("invalid JSON in '" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw Error("CSV row width differs from header");
  rows_.push_back(std::move(row));
}

void CsvTable::add_numbers(const std::vector<double>& row) {
  std::vector<std::string> r;
  for (double v : row) r.push_back(csv_number(v));
  add_row(std::move(r));
}

std::string CsvTable::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_field(r[i]);
    os << "\r\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return os.str();
}

void CsvTable::write(const std::string& path) const { write_text_file(path, str()); }

}  // namespace shapekernel
