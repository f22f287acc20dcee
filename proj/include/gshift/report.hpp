#pragma once

// Report serialization: JSON text with keys in sorted order, floats at 17
// significant digits and non-finite values spelled "inf", "-inf" or "nan".

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gshift/shift_bounds.hpp"
#include "gshift/verification.hpp"

namespace gshift::cli {

/// %.17g, or "inf" / "-inf" / "nan".
std::string format_number(double x);

/// Finite doubles stay numbers; non-finite ones become their string spelling.
nlohmann::json number(double x);

/// Inverse of number(): accepts numbers and the non-finite spellings.
double read_number(const nlohmann::json& node);

std::string write_report(const nlohmann::json& doc);
nlohmann::json read_report(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string write_csv(const CsvTable& table);

void write_file(const std::filesystem::path& path, std::string_view text);

/// Provenance records attached to every numeric result.
nlohmann::json analytic();
nlohmann::json quadrature(double tolerance);
nlohmann::json monte_carlo(const McEstimate& e);

nlohmann::json to_json(const McEstimate& e);
nlohmann::json to_json(const BoundReport<double>& r);
nlohmann::json to_json(const PowerReport<double>& r);
nlohmann::json to_json(const SandwichVerdict& v);
nlohmann::json to_json(const DerivativeReport& r);

}  // namespace gshift::cli
