// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/draws.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cam/error.hpp"
#include "cam/random.hpp"

namespace cam {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const fs::path& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError("malformed number '" + text + "' in " + where.string());
  }
  return value;
}

long parse_long(const std::string& text, const fs::path& where) {
  long value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError("malformed integer '" + text + "' in " + where.string());
  }
  return value;
}

// Reads a CSV with a header row; returns the data rows.
std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_fields(line));
  }
  return rows;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw NumericError("cannot format value");
  return std::string(buf, ptr);
}

Draw project_state(const SamplerState& state, long sweep) {
  Draw d;
  d.sweep = sweep;
  d.S = state.S;
  d.M = state.M;
  const int K = state.K_active;
  const int L = state.L_active;
  d.pi.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) d.pi[static_cast<std::size_t>(k)] = std::exp(state.log_pi[k]);
  std::vector<char> occupied(static_cast<std::size_t>(K), 0);
  for (int s : state.S) occupied[static_cast<std::size_t>(s)] = 1;
  for (int k = 0; k < K; ++k) {
    if (!occupied[static_cast<std::size_t>(k)]) continue;
    std::vector<double> w(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) w[static_cast<std::size_t>(l)] = std::exp(state.log_omega(l, k));
    d.omega.emplace_back(k, std::move(w));
  }
  d.atoms.assign(state.theta.begin(), state.theta.begin() + L);
  d.alpha = state.alpha;
  d.beta = state.beta;
  d.reg_coeff = state.reg_coeff;
  d.K_active = K;
  d.L_active = L;
  return d;
}

void write_drawstore(const DrawStore& store, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::size_t J = store.unit_sizes.size();

  {
    auto out = open_out(dir / "S.csv");
    out << "draw";
    for (std::size_t j = 0; j < J; ++j) out << ",unit_" << j + 1;
    out << '\n';
    for (std::size_t t = 0; t < store.draws.size(); ++t) {
      out << t + 1;
      for (int s : store.draws[t].S) out << ',' << s + 1;
      out << '\n';
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    auto out = open_out(dir / ("M_unit" + std::to_string(j + 1) + ".csv"));
    out << "draw";
    for (int i = 0; i < store.unit_sizes[j]; ++i) out << ",obs_" << i + 1;
    out << '\n';
    for (std::size_t t = 0; t < store.draws.size(); ++t) {
      out << t + 1;
      for (int m : store.draws[t].M[j]) out << ',' << m + 1;
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "atoms.csv");
    out << "draw,label,mu,sigma2\n";
    for (std::size_t t = 0; t < store.draws.size(); ++t) {
      const auto& atoms = store.draws[t].atoms;
      for (std::size_t l = 0; l < atoms.size(); ++l) {
        out << t + 1 << ',' << l + 1 << ',' << format_double(atoms[l].mu) << ','
            << format_double(atoms[l].sigma2) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "weights.csv");
    out << "draw,level,cluster,atom,weight\n";
    for (std::size_t t = 0; t < store.draws.size(); ++t) {
      const Draw& d = store.draws[t];
      for (std::size_t k = 0; k < d.pi.size(); ++k) {
        out << t + 1 << ",outer," << k + 1 << ",," << format_double(d.pi[k]) << '\n';
      }
      for (const auto& [k, w] : d.omega) {
        for (std::size_t l = 0; l < w.size(); ++l) {
          out << t + 1 << ",inner," << k + 1 << ',' << l + 1 << ',' << format_double(w[l])
              << '\n';
        }
      }
    }
  }
  {
    auto out = open_out(dir / "scalars.csv");
    out << "draw,sweep,alpha,beta,reg_coeff,K_active,L_active\n";
    for (std::size_t t = 0; t < store.draws.size(); ++t) {
      const Draw& d = store.draws[t];
      out << t + 1 << ',' << d.sweep << ',' << format_double(d.alpha) << ','
          << format_double(d.beta) << ',' << format_double(d.reg_coeff) << ',' << d.K_active
          << ',' << d.L_active << '\n';
    }
  }
  {
    nlohmann::ordered_json meta;
    meta["sampler"] = store.meta.sampler;
    meta["model"] = store.meta.model;
    meta["seed"] = store.meta.seed;
    meta["chain"] = store.meta.chain;
    meta["rng_algorithm_version"] = RngStream::kAlgorithmVersion;
    meta["num_draws"] = store.draws.size();
    meta["unit_sizes"] = store.unit_sizes;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [key, value] : store.meta.config) config[key] = value;
    meta["config"] = config;
    meta["warnings"] = store.meta.warnings;
    nlohmann::ordered_json diag = nlohmann::ordered_json::object();
    for (const auto& [key, value] : store.meta.diagnostics) diag[key] = value;
    meta["diagnostics"] = diag;
    auto out = open_out(dir / "meta.json");
    out << meta.dump(2) << '\n';
  }
}

DrawStore read_drawstore(const fs::path& dir) {
  DrawStore store;
  {
    auto in = open_in(dir / "meta.json");
    nlohmann::ordered_json meta;
    try {
      in >> meta;
      store.meta.sampler = meta.at("sampler").get<std::string>();
      store.meta.model = meta.at("model").get<std::string>();
      store.meta.seed = meta.at("seed").get<std::uint64_t>();
      store.meta.chain = meta.at("chain").get<int>();
      store.unit_sizes = meta.at("unit_sizes").get<std::vector<int>>();
      for (const auto& [key, value] : meta.at("config").items()) {
        store.meta.config.emplace_back(key, value.get<std::string>());
      }
      store.meta.warnings = meta.at("warnings").get<std::vector<std::string>>();
      for (const auto& [key, value] : meta.at("diagnostics").items()) {
        store.meta.diagnostics[key] = value.get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed meta.json in " + dir.string() + ": " + e.what());
    }
  }
  const std::size_t J = store.unit_sizes.size();

  const fs::path s_path = dir / "S.csv";
  const auto s_rows = read_rows(s_path);
  store.draws.resize(s_rows.size());
  for (std::size_t t = 0; t < s_rows.size(); ++t) {
    if (s_rows[t].size() != J + 1) throw IoError("ragged row in " + s_path.string());
    auto& S = store.draws[t].S;
    S.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
      S[j] = static_cast<int>(parse_long(s_rows[t][j + 1], s_path)) - 1;
    }
    store.draws[t].M.resize(J);
  }
  for (std::size_t j = 0; j < J; ++j) {
    const fs::path m_path = dir / ("M_unit" + std::to_string(j + 1) + ".csv");
    const auto rows = read_rows(m_path);
    if (rows.size() != store.draws.size()) throw IoError("draw count mismatch in " + m_path.string());
    const auto nj = static_cast<std::size_t>(store.unit_sizes[j]);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != nj + 1) throw IoError("ragged row in " + m_path.string());
      auto& M = store.draws[t].M[j];
      M.resize(nj);
      for (std::size_t i = 0; i < nj; ++i) {
        M[i] = static_cast<int>(parse_long(rows[t][i + 1], m_path)) - 1;
      }
    }
  }
  {
    const fs::path a_path = dir / "atoms.csv";
    for (const auto& row : read_rows(a_path)) {
      if (row.size() != 4) throw IoError("ragged row in " + a_path.string());
      const long t = parse_long(row[0], a_path) - 1;
      if (t < 0 || static_cast<std::size_t>(t) >= store.draws.size()) {
        throw IoError("draw index out of range in " + a_path.string());
      }
      store.draws[static_cast<std::size_t>(t)].atoms.push_back(
          {parse_double(row[2], a_path), parse_double(row[3], a_path)});
    }
  }
  {
    const fs::path c_path = dir / "scalars.csv";
    const auto rows = read_rows(c_path);
    if (rows.size() != store.draws.size()) throw IoError("draw count mismatch in " + c_path.string());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != 7) throw IoError("ragged row in " + c_path.string());
      Draw& d = store.draws[t];
      d.sweep = parse_long(rows[t][1], c_path);
      d.alpha = parse_double(rows[t][2], c_path);
      d.beta = parse_double(rows[t][3], c_path);
      d.reg_coeff = parse_double(rows[t][4], c_path);
      d.K_active = static_cast<int>(parse_long(rows[t][5], c_path));
      d.L_active = static_cast<int>(parse_long(rows[t][6], c_path));
    }
  }
  return store;
}

DrawStore pool_chains(const std::vector<DrawStore>& chains) {
  if (chains.empty()) throw ParameterError("no chains to pool");
  DrawStore pooled;
  pooled.meta = chains.front().meta;
  pooled.unit_sizes = chains.front().unit_sizes;
  for (const auto& chain : chains) {
    if (chain.unit_sizes != pooled.unit_sizes) {
      throw ValidationError("chains were fitted to datasets of different shape");
    }
    pooled.draws.insert(pooled.draws.end(), chain.draws.begin(), chain.draws.end());
  }
  return pooled;
}

}  // namespace cam
