#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "hbma/errors.hpp"
#include "hbma/io.hpp"

namespace hbma {

namespace {

constexpr const char* kModule = "io-formats";

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// One CSV record; double quotes may wrap fields and "" escapes a quote.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

struct CsvRows {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvRows read_numeric_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  CsvRows out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (out.header.empty()) {
      out.header = std::move(fields);
      continue;
    }
    if (fields.size() != out.header.size()) {
      throw ParseError(kModule, path.filename().string() + " line " + std::to_string(line_no) + ": expected " +
                                    std::to_string(out.header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      double v = 0.0;
      bool ok = false;
      try {
        std::size_t used = 0;
        v = std::stod(fields[i], &used);
        ok = used == fields[i].size() && std::isfinite(v);
      } catch (const std::exception&) {
      }
      if (!ok) {
        throw ParseError(kModule, path.filename().string() + " line " + std::to_string(line_no) + ", column '" +
                                      out.header[i] + "': non-numeric cell '" + fields[i] + "'");
      }
      row.push_back(v);
    }
    out.rows.push_back(std::move(row));
  }
  if (out.header.empty()) throw ParseError(kModule, path.filename().string() + " is empty");
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Converts the wavelength column to a grid, honoring the unit declared in
// the first header cell.
GridPtr grid_from_csv(const CsvRows& csv, const std::filesystem::path& path) {
  std::string unit = csv.header.front();
  std::transform(unit.begin(), unit.end(), unit.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  double factor = 1.0;
  if (unit == "wavelength_nm") {
    factor = 1e-3;
  } else if (unit != "wavelength_um") {
    throw ParseError(kModule, path.filename().string() + ": first column must be 'wavelength_um' or 'wavelength_nm', found '" +
                                  csv.header.front() + "'");
  }
  std::vector<double> w;
  w.reserve(csv.rows.size());
  for (const auto& row : csv.rows) w.push_back(row[0] * factor);
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (!(w[i] > w[i - 1])) {
      throw ParseError(kModule, path.filename().string() + ": wavelengths are not strictly increasing at row " +
                                    std::to_string(i + 1));
    }
  }
  try {
    return make_grid(std::move(w));
  } catch (const InputError& e) {
    throw ParseError(kModule, path.filename().string() + ": " + e.what());
  }
}

std::vector<Spectrum> spectra_from_csv(const CsvRows& csv, const GridPtr& grid) {
  std::vector<Spectrum> out;
  const auto n = static_cast<Eigen::Index>(csv.rows.size());
  for (std::size_t col = 1; col < csv.header.size(); ++col) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = csv.rows[static_cast<std::size_t>(i)][col];
    out.emplace_back(csv.header[col], grid, std::move(v));
  }
  return out;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(kModule, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(kModule, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError(kModule, "failed writing '" + path.string() + "'");
}

SpectralLibrary read_library(const std::filesystem::path& csv_path, const std::filesystem::path& hierarchy_path) {
  const CsvRows csv = read_numeric_csv(csv_path);
  if (csv.header.size() < 2) throw ParseError(kModule, csv_path.filename().string() + " has no spectrum columns");
  std::set<std::string> names;
  for (std::size_t i = 1; i < csv.header.size(); ++i) {
    if (csv.header[i].empty()) throw ParseError(kModule, "empty spectrum name in column " + std::to_string(i + 1));
    if (!names.insert(csv.header[i]).second) {
      throw ParseError(kModule, "duplicate spectrum name '" + csv.header[i] + "'");
    }
  }
  const GridPtr grid = grid_from_csv(csv, csv_path);

  nlohmann::json hierarchy = nlohmann::json::object();
  if (!hierarchy_path.empty()) {
    const std::string text = read_text_file(hierarchy_path);
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      try {
        hierarchy = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(kModule, hierarchy_path.filename().string() + ": " + e.what());
      }
      if (!hierarchy.is_object()) throw ParseError(kModule, "hierarchy file must hold a JSON object");
    }
  }

  std::vector<Spectrum> spectra;
  for (auto& s : spectra_from_csv(csv, grid)) {
    std::vector<std::string> path{"Unlabeled"};
    if (auto it = hierarchy.find(s.name()); it != hierarchy.end()) {
      if (!it->is_array() || it->empty()) {
        throw ParseError(kModule, "hierarchy entry '" + s.name() + "' must be a non-empty array of class labels");
      }
      path.clear();
      for (const auto& label : *it) {
        if (!label.is_string()) throw ParseError(kModule, "hierarchy entry '" + s.name() + "' has a non-string label");
        path.push_back(label.get<std::string>());
      }
      if (path.front() == ClassHierarchy::root_name) {
        throw ParseError(kModule, "hierarchy entry '" + s.name() + "' must not include the implicit root 'Library'");
      }
    }
    spectra.push_back(s.renamed(s.name(), std::move(path)));
  }
  return SpectralLibrary(grid, std::move(spectra));
}

void write_library_csv(const SpectralLibrary& library, const std::filesystem::path& csv_path) {
  std::ostringstream out;
  out << std::setprecision(17) << "wavelength_um";
  for (const auto& s : library.spectra()) out << "," << csv_field(s.name());
  out << "\n";
  for (std::size_t b = 0; b < library.grid()->size(); ++b) {
    out << (*library.grid())[b];
    for (const auto& s : library.spectra()) out << "," << s.values()[static_cast<Eigen::Index>(b)];
    out << "\n";
  }
  write_text_file(csv_path, out.str());
}

void write_hierarchy_json(const SpectralLibrary& library, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& s : library.spectra()) j[s.name()] = s.class_path();
  write_text_file(path, j.dump(2) + "\n");
}

Spectrum read_spectrum_csv(const std::filesystem::path& csv_path) {
  const CsvRows csv = read_numeric_csv(csv_path);
  if (csv.header.size() < 2) throw ParseError(kModule, csv_path.filename().string() + " has no spectrum column");
  const GridPtr grid = grid_from_csv(csv, csv_path);
  return spectra_from_csv(csv, grid).front();
}

void write_spectrum_csv(const Spectrum& spectrum, const std::filesystem::path& csv_path) {
  std::ostringstream out;
  out << std::setprecision(17) << "wavelength_um," << csv_field(spectrum.name()) << "\n";
  for (std::size_t b = 0; b < spectrum.size(); ++b) {
    out << (*spectrum.grid())[b] << "," << spectrum.values()[static_cast<Eigen::Index>(b)] << "\n";
  }
  write_text_file(csv_path, out.str());
}

std::optional<std::size_t> Table::column(const std::string& name) const {
  auto it = std::find(headers.begin(), headers.end(), name);
  if (it == headers.end()) return std::nullopt;
  return static_cast<std::size_t>(it - headers.begin());
}

Table read_table_csv(const std::filesystem::path& csv_path) {
  const CsvRows csv = read_numeric_csv(csv_path);
  std::set<std::string> seen;
  for (const auto& h : csv.header) {
    if (!seen.insert(h).second) throw ParseError(kModule, "duplicate column '" + h + "'");
  }
  Table t;
  t.headers = csv.header;
  t.values.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(csv.header.size()));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = csv.rows[r][c];
    }
  }
  return t;
}

RegressionProblem make_table_problem(const Table& table, const std::string& response) {
  const auto col = table.column(response);
  if (!col) throw InputError(kModule, "response column '" + response + "' not found");
  if (table.headers.size() < 2) throw InputError(kModule, "table needs at least one predictor column");
  RegressionProblem p;
  p.intercept = true;
  p.response = table.values.col(static_cast<Eigen::Index>(*col));
  p.candidates.resize(table.values.rows(), table.values.cols() - 1);
  Eigen::Index out = 0;
  for (std::size_t c = 0; c < table.headers.size(); ++c) {
    if (c == *col) continue;
    p.candidates.col(out++) = table.values.col(static_cast<Eigen::Index>(c));
    p.names.push_back(table.headers[c]);
  }
  return p;
}

}  // namespace hbma
