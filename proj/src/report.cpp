#include "gshift/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gshift/errors.hpp"

namespace gshift::cli {

using nlohmann::json;

namespace {

void write_value(const json& node, int depth, std::string& out) {
  const std::string pad(2 * static_cast<std::size_t>(depth + 1), ' ');
  const std::string close(2 * static_cast<std::size_t>(depth), ' ');
  switch (node.type()) {
    case json::value_t::object: {
      if (node.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      // nlohmann::json objects iterate in sorted key order.
      for (const auto& [key, value] : node.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(key).dump() + ": ";
        write_value(value, depth + 1, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (node.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        write_value(node[i], depth + 1, out);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float: {
      const double x = node.get<double>();
      if (!std::isfinite(x)) {
        out += json(format_number(x)).dump();
        return;
      }
      std::string s = format_number(x);
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += node.dump();
  }
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json number(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

double read_number(const json& node) {
  if (node.is_number()) return node.get<double>();
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw Error("read_number: not a number: " + node.dump());
}

std::string write_report(const json& doc) {
  std::string out;
  write_value(doc, 0, out);
  out += "\n";
  return out;
}

json read_report(std::string_view text) { return json::parse(text); }

std::string write_csv(const CsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_cell(cells[i]);
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

json analytic() { return {{"method", "analytic"}}; }

json quadrature(double tolerance) { return {{"method", "quadrature"}, {"tolerance", tolerance}}; }

json monte_carlo(const McEstimate& e) {
  return {{"method", "monte_carlo"}, {"seed", e.seed.seed}, {"stream", e.seed.stream}, {"samples", e.samples}};
}

json to_json(const McEstimate& e) {
  return {{"value", number(e.value)},
          {"std_error", number(e.std_error)},
          {"samples", e.samples},
          {"hits", e.hits},
          {"provenance", monte_carlo(e)}};
}

json to_json(const BoundReport<double>& r) {
  return {{"t", r.t},
          {"mahalanobis", r.mahalanobis},
          {"exponent_a", number(r.exponent_a.is_infinite() ? std::numeric_limits<double>::infinity()
                                                            : r.exponent_a.value())},
          {"exponent_exactness", std::string(to_string(r.exponent_exactness))},
          {"lower", r.lower},
          {"upper", r.upper},
          {"provenance", analytic()}};
}

json to_json(const PowerReport<double>& r) {
  return {{"theta", r.theta},
          {"alpha", r.alpha},
          {"beta_lower", r.beta_lower},
          {"beta_upper", r.beta_upper},
          {"provenance", analytic()}};
}

json to_json(const SandwichVerdict& v) {
  return {{"bounds", to_json(v.bounds)},
          {"numerator", to_json(v.numerator)},
          {"denominator", to_json(v.denominator)},
          {"ratio", number(v.ratio)},
          {"ratio_std_error", number(v.ratio_std_error)},
          {"lower_z", number(v.lower_z)},
          {"upper_z", number(v.upper_z)},
          {"z_threshold", v.z_threshold},
          {"pass", v.pass}};
}

json to_json(const DerivativeReport& r) {
  return {{"t", r.t},
          {"step", r.step},
          {"finite_difference", to_json(r.finite_difference)},
          {"direct", to_json(r.direct)},
          {"current", to_json(r.current)},
          {"difference", number(r.difference)},
          {"tolerance", number(r.tolerance)},
          {"floor", number(r.floor)},
          {"floor_margin_fd", number(r.floor_margin_fd)},
          {"floor_margin_direct", number(r.floor_margin_direct)},
          {"identity_ok", r.identity_ok},
          {"floor_ok", r.floor_ok},
          {"pass", r.pass}};
}

}  // namespace gshift::cli
