// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cam/draws.hpp"
#include "cam/error.hpp"

namespace cam {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

char detect_delimiter(const std::string& line) {
  return line.find('\t') != std::string::npos ? '\t' : ',';
}

bool parse_number(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

std::string location(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

struct Lines {
  Header header;
  std::vector<std::pair<std::size_t, std::string>> rows;  // (line number, text)
};

Lines read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Lines out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      const std::string body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) out.header.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      continue;
    }
    out.rows.emplace_back(number, line);
  }
  return out;
}

void write_header(std::ostream& out, const Header& header) {
  for (const auto& [key, value] : header) out << "# " << key << '=' << value << '\n';
}

}  // namespace

std::string header_value(const Header& header, const std::string& key) {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  return "";
}

void write_dataset(const fs::path& path, const Dataset& data, const Header& header) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  Header full = {{"kind", to_string(data.kind)}};
  for (const auto& kv : header) {
    if (kv.first != "kind") full.push_back(kv);
  }
  write_header(out, full);
  out << "unit,index,value" << (data.has_covariate() ? ",x" : "") << '\n';
  for (std::size_t j = 0; j < data.units.size(); ++j) {
    const std::string name = j < data.unit_names.size() ? data.unit_names[j] : std::to_string(j + 1);
    for (std::size_t i = 0; i < data.units[j].size(); ++i) {
      out << name << ',' << i + 1 << ',' << format_double(data.units[j][i]);
      if (data.has_covariate()) out << ',' << format_double(data.covariate[j]);
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetFile read_dataset(const fs::path& path) {
  Lines lines = read_lines(path);
  if (lines.rows.empty()) throw ValidationError(path.string() + " holds no data");
  DatasetFile file;
  file.header = lines.header;
  const std::string kind = header_value(lines.header, "kind");
  file.data.kind = kind.empty() ? DataKind::continuous : parse_data_kind(kind);

  const char delim = detect_delimiter(lines.rows.front().second);
  const auto columns = split(lines.rows.front().second, delim);
  if (columns.size() < 3 || columns[0] != "unit" || columns[2] != "value") {
    throw ValidationError(location(path, lines.rows.front().first) +
                          ": expected columns unit,index,value[,x]");
  }
  const bool has_x = columns.size() >= 4 && columns[3] == "x";
  std::map<std::string, std::size_t> unit_index;
  for (std::size_t r = 1; r < lines.rows.size(); ++r) {
    const auto& [number, text] = lines.rows[r];
    const auto fields = split(text, delim);
    if (fields.size() != columns.size()) {
      throw ValidationError(location(path, number) + ": expected " + std::to_string(columns.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    double value = 0.0;
    if (!parse_number(fields[2], value)) {
      throw ValidationError(location(path, number) + ": value '" + fields[2] + "' is not a number");
    }
    auto [it, inserted] = unit_index.try_emplace(fields[0], file.data.units.size());
    if (inserted) {
      file.data.units.emplace_back();
      file.data.unit_names.push_back(fields[0]);
      if (has_x) {
        double x = 0.0;
        if (!parse_number(fields[3], x)) {
          throw ValidationError(location(path, number) + ": covariate '" + fields[3] + "' is not a number");
        }
        file.data.covariate.push_back(x);
      }
    }
    file.data.units[it->second].push_back(value);
  }
  validate_dataset(file.data).throw_if_invalid();
  return file;
}

void write_truth(const fs::path& path, const Truth& truth, const Header& header) {
  if (truth.dc.size() != truth.oc.size()) throw ParameterError("truth shapes disagree");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_header(out, header);
  out << "unit,index,dc,oc\n";
  for (std::size_t j = 0; j < truth.dc.size(); ++j) {
    for (std::size_t i = 0; i < truth.oc[j].size(); ++i) {
      out << j + 1 << ',' << i + 1 << ',' << truth.dc[j] + 1 << ',' << truth.oc[j][i] + 1 << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Truth read_truth(const fs::path& path) {
  Lines lines = read_lines(path);
  if (lines.rows.empty()) throw ValidationError(path.string() + " holds no data");
  const char delim = detect_delimiter(lines.rows.front().second);
  const auto columns = split(lines.rows.front().second, delim);
  if (columns != std::vector<std::string>{"unit", "index", "dc", "oc"}) {
    throw ValidationError(path.string() + ": expected columns unit,index,dc,oc");
  }
  Truth truth;
  for (std::size_t r = 1; r < lines.rows.size(); ++r) {
    const auto& [number, text] = lines.rows[r];
    const auto fields = split(text, delim);
    double v[4];
    if (fields.size() != 4) throw ValidationError(location(path, number) + ": expected 4 fields");
    for (int c = 0; c < 4; ++c) {
      if (!parse_number(fields[static_cast<std::size_t>(c)], v[c]) || v[c] < 1 || v[c] != std::floor(v[c])) {
        throw ValidationError(location(path, number) + ": labels and indices are positive integers");
      }
    }
    const auto j = static_cast<std::size_t>(v[0]) - 1;
    if (j == truth.dc.size()) {
      truth.dc.push_back(static_cast<int>(v[2]) - 1);
      truth.oc.emplace_back();
    } else if (j + 1 != truth.dc.size()) {
      throw ValidationError(location(path, number) + ": units must appear in order");
    }
    if (static_cast<std::size_t>(v[1]) != truth.oc[j].size() + 1) {
      throw ValidationError(location(path, number) + ": observation indices must be consecutive");
    }
    truth.oc[j].push_back(static_cast<int>(v[3]) - 1);
  }
  return truth;
}

Dataset load_abundance_table(const fs::path& path) {
  Lines lines = read_lines(path);
  if (lines.rows.empty()) throw ValidationError(path.string() + " holds no data");
  const char delim = detect_delimiter(lines.rows.front().second);
  std::vector<std::vector<std::string>> cells;
  for (const auto& [number, text] : lines.rows) cells.push_back(split(text, delim));

  double scratch = 0.0;
  // A header row is any first row with a non-numeric cell past the first column;
  // a name column is any first column with a non-numeric cell below the header.
  bool header_row = false;
  for (std::size_t c = 1; c < cells.front().size(); ++c) {
    if (!parse_number(cells.front()[c], scratch)) header_row = true;
  }
  if (cells.front().size() == 1 && !parse_number(cells.front()[0], scratch)) header_row = true;
  const std::size_t first_data = header_row ? 1 : 0;
  bool name_col = false;
  for (std::size_t r = first_data; r < cells.size(); ++r) {
    if (!cells[r].empty() && !parse_number(cells[r][0], scratch)) name_col = true;
  }
  if (first_data >= cells.size()) throw ValidationError(path.string() + " holds no data rows");

  const std::size_t width = cells[first_data].size();
  const std::size_t offset = name_col ? 1 : 0;
  if (width <= offset) throw ValidationError(path.string() + " has no count columns");
  const std::size_t J = width - offset;

  Dataset data;
  data.kind = DataKind::count;
  data.units.assign(J, {});
  if (header_row) {
    const auto& head = cells.front();
    const std::size_t head_offset = head.size() == J ? 0 : offset;
    if (head.size() != J && head.size() != width) {
      throw ValidationError(location(path, lines.rows.front().first) + ": header has " +
                            std::to_string(head.size()) + " fields, rows have " + std::to_string(width));
    }
    for (std::size_t j = 0; j < J; ++j) data.unit_names.push_back(head[j + head_offset]);
  }
  for (std::size_t r = first_data; r < cells.size(); ++r) {
    const std::size_t number = lines.rows[r].first;
    if (cells[r].size() != width) {
      throw ValidationError(location(path, number) + ": ragged row (" + std::to_string(cells[r].size()) +
                            " fields, expected " + std::to_string(width) + ")");
    }
    if (name_col) data.item_names.push_back(cells[r][0]);
    for (std::size_t j = 0; j < J; ++j) {
      const std::string& text = cells[r][j + offset];
      double v = 0.0;
      if (!parse_number(text, v) || !std::isfinite(v)) {
        throw ValidationError(location(path, number) + ": '" + text + "' is not a count");
      }
      if (v < 0.0) throw ValidationError(location(path, number) + ": negative count " + text);
      if (v != std::floor(v)) throw ValidationError(location(path, number) + ": non-integer count " + text);
      data.units[j].push_back(v);
    }
  }
  return data;
}

}  // namespace cam
