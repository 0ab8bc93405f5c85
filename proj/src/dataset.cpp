#include <chrono>
#include <cstdio>
#include <fstream>

#include "fragflow/app.hpp"
#include "json.hpp"

namespace fragflow::app {

std::vector<std::string> load_smiles_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    size_t end = line.find_first_of(" \t", start);
    lines.push_back(line.substr(start, end == std::string::npos ? end : end - start));
  }
  return lines;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Corpus corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    size_t end = line.find_first_of(" \t", start);
    std::string smiles = line.substr(start, end == std::string::npos ? end : end - start);
    try {
      auto mol = chem::parse_smiles(smiles);
      corpus.canonical.push_back(chem::canonical_smiles(mol));
      corpus.mols.push_back(std::move(mol));
    } catch (const chem::SmilesError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (corpus.mols.empty()) throw DataError(path + ": no molecules");
  return corpus;
}

void write_smiles_file(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << "\n";
}

void write_sample_file(const std::string& path,
                       const std::vector<flow::SampleResult>& results,
                       const std::map<std::string, std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [k, v] : header) out << "# " << k << "=" << v << "\n";
  for (const auto& r : results) {
    if (r.status == flow::SampleStatus::Valid)
      out << r.smiles << "\n";
    else
      out << "# invalid:" << flow::sample_status_name(r.status) << "\n";
  }
}

SampleFileContents read_sample_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  SampleFileContents out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') {
      std::string rest = line.substr(start + 1);
      size_t s2 = rest.find_first_not_of(" \t");
      if (s2 == std::string::npos) continue;
      rest = rest.substr(s2);
      if (rest.rfind("invalid:", 0) == 0) {
        ++out.set.invalid_by_status[rest.substr(8)];
        ++out.set.n_total;
      } else {
        size_t eq = rest.find('=');
        if (eq != std::string::npos)
          out.header[rest.substr(0, eq)] = rest.substr(eq + 1);
      }
      continue;
    }
    size_t end = line.find_first_of(" \t", start);
    out.set.valid_smiles.push_back(
        line.substr(start, end == std::string::npos ? end : end - start));
    ++out.set.n_total;
  }
  return out;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config_digest"] = manifest.config_digest;
  j["code_version"] = manifest.code_version;
  j["wall_seconds"] = manifest.wall_seconds;
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [k, v] : manifest.phase_seeds) seeds[k] = v;
  j["phase_seeds"] = seeds;
  j["artifacts"] = manifest.artifacts;
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    out << j.dump(2) << "\n";
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename manifest into place: " + path);
}

const char* code_version() { return "fragflow 0.1.0"; }

}  // namespace fragflow::app
