#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "shapekernel/conic.hpp"
#include "shapekernel/tighten.hpp"

namespace shapekernel {

using Json = nlohmann::json;

Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j);
Json mat_to_json(const Mat& m);  // row-major nested arrays
Mat mat_from_json(const Json& j);

Json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const Json& j);

Json functional_to_json(const DiffFunctional& d);
DiffFunctional functional_from_json(const Json& j);

Json atom_to_json(const Atom& a);
Atom atom_from_json(const Json& j);

// Includes the kernel and its fingerprint; loading checks the fingerprint.
Json model_to_json(const Model& m);
Model model_from_json(const Json& j);
void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

Json record_to_json(const ConicConstraintRecord& r);
Json program_to_json(const ConeProgram& p);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Fixed-format number for CSV output; identical bits give identical text.
std::string csv_number(double v);

class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> row);
  void add_numbers(const std::vector<double>& row);
  std::string str() const;
  void write(const std::string& path) const;
  size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace shapekernel
