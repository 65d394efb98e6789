#include "splitee/io.hpp"

#include "splitee/errors.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace splitee {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& field, const std::string& where) {
  const std::string text = trim(field);
  if (text.empty()) fail(ErrorKind::ParseError, where + ": missing value");
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorKind::ParseError, where + ": '" + text + "' is not a number");
  }
  if (!std::isfinite(value)) fail(ErrorKind::ParseError, where + ": non-finite value");
  return value;
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, source + ": empty file, header required");
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (auto& f : split_fields(line)) {
    std::string name = trim(f);
    if (name.empty()) fail(ErrorKind::ParseError, source + ": empty column name in header");
    if (!seen.insert(name).second) fail(ErrorKind::ParseError, source + ": duplicate column '" + name + "'");
    names.push_back(std::move(name));
  }
  std::vector<double> values;
  Index rows = 0;
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() != names.size()) {
      fail(ErrorKind::ParseError, where + ": expected " + std::to_string(names.size()) +
                                      " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      values.push_back(parse_number(fields[j], where + " column '" + names[j] + "'"));
    }
    ++rows;
  }
  const Index cols = static_cast<Index>(names.size());
  RowMatrix table = Eigen::Map<RowMatrix>(values.data(), rows, cols);
  return Dataset(std::move(names), std::move(table));
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) fail(ErrorKind::InvalidArgument, "cannot format value");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& names = data.names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    const Observation row = data.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FileNotFound, "cannot write '" + path + "'");
  write_csv(out, data);
}

SplitAssignment read_splits(const std::string& path) {
  const Dataset table = read_csv(path);
  IndicatorMatrix ind(table.rows(), table.cols());
  for (Index i = 0; i < table.rows(); ++i) {
    for (Index b = 0; b < table.cols(); ++b) {
      const double v = table.values()(i, b);
      if (v != 0.0 && v != 1.0) {
        fail(ErrorKind::ParseError, path + ": split entries must be 0 or 1");
      }
      ind(i, b) = static_cast<std::uint8_t>(v);
    }
  }
  return SplitAssignment::from_indicators(std::move(ind));
}

namespace {

using nlohmann::json;
namespace act = activity;

template <std::size_t N>
std::array<double, N> array_from(const json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N) fail(ErrorKind::ParseError, std::string("'") + key + "' has the wrong length");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

void write_score_file(const std::string& path, const ScoreFile& file) {
  json j;
  j["format_version"] = ScoreFile::kFormatVersion;
  j["components"] = std::vector<std::string>(act::component_names().begin(),
                                             act::component_names().end());
  j["covariates"] = file.covariates;
  const auto& p = file.params;
  j["params"] = {
      {"b", p.b},
      {"c", p.c},
      {"d", p.d},
      {"theta_sitting_other", p.theta_sit},
      {"theta_tv", p.theta_tv},
      {"theta_sleep1", p.theta_sleep1},
      {"theta_sleep2", p.theta_sleep2},
      {"z_coef", std::vector<double>(p.z_coef.data(), p.z_coef.data() + p.z_coef.size())},
  };
  const auto& s = file.scaling;
  j["scaling"] = {{"offset", s.offset}, {"maximum", s.maximum}, {"x_min", s.x_min},
                  {"x_max", s.x_max},   {"argmin", s.argmin},   {"argmax", s.argmax},
                  {"total", s.total},   {"factor", s.factor}};
  std::ofstream out(path);
  if (!out) fail(ErrorKind::FileNotFound, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

ScoreFile read_score_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open '" + path + "'");
  ScoreFile out;
  try {
    const json j = json::parse(in);
    const int version = j.at("format_version").get<int>();
    if (version != ScoreFile::kFormatVersion) {
      fail(ErrorKind::ParseError, path + ": unsupported format_version " + std::to_string(version));
    }
    out.covariates = j.at("covariates").get<std::vector<std::string>>();
    const json& p = j.at("params");
    out.params.b = array_from<act::kAerobic>(p, "b");
    out.params.c = array_from<act::kAerobic>(p, "c");
    out.params.d = array_from<act::kAerobic>(p, "d");
    out.params.theta_sit = p.at("theta_sitting_other").get<double>();
    out.params.theta_tv = p.at("theta_tv").get<double>();
    out.params.theta_sleep1 = p.at("theta_sleep1").get<double>();
    out.params.theta_sleep2 = p.at("theta_sleep2").get<double>();
    const auto z = p.at("z_coef").get<std::vector<double>>();
    out.params.z_coef = Eigen::Map<const Vector>(z.data(), static_cast<Index>(z.size()));
    const json& s = j.at("scaling");
    out.scaling.offset = array_from<act::kComponents>(s, "offset");
    out.scaling.maximum = array_from<act::kComponents>(s, "maximum");
    out.scaling.x_min = array_from<act::kComponents>(s, "x_min");
    out.scaling.x_max = array_from<act::kComponents>(s, "x_max");
    out.scaling.argmin = array_from<act::kComponents>(s, "argmin");
    out.scaling.argmax = array_from<act::kComponents>(s, "argmax");
    out.scaling.total = s.at("total").get<double>();
    out.scaling.factor = s.at("factor").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, path + ": " + e.what());
  }
  out.params.validate();
  return out;
}

}  // namespace splitee
