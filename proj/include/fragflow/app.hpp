#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fragflow/chem.hpp"
#include "fragflow/flow.hpp"
#include "fragflow/metrics.hpp"

namespace fragflow::app {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

// Flat key=value configuration: file contents overridden by CLI pairs.
class Config {
 public:
  static Config from_file(const std::string& path);
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::string require_str(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  const std::map<std::string, std::string>& entries() const { return kv_; }
  uint64_t digest() const;

 private:
  std::map<std::string, std::string> kv_;
};

// ---------- SMILES file IO ----------

struct Corpus {
  std::vector<chem::MolGraph> mols;
  std::vector<std::string> canonical;
};

// Line-delimited SMILES, UTF-8, one molecule per line, '#' comments and
// blank lines skipped. Parsing failures raise DataError with line numbers.
Corpus load_corpus(const std::string& path);
std::vector<std::string> load_smiles_lines(const std::string& path);
void write_smiles_file(const std::string& path, const std::vector<std::string>& lines);

// Sample files keep invalid entries as "# invalid:<status>" comment lines so
// the plain corpus reader still works on them.
struct SampleFileContents {
  std::map<std::string, std::string> header;
  metrics::SampleSet set;
};

void write_sample_file(const std::string& path,
                       const std::vector<flow::SampleResult>& results,
                       const std::map<std::string, std::string>& header);
SampleFileContents read_sample_file(const std::string& path);

// ---------- toy corpus ----------

// Deterministic block-assembled molecules: distinct canonical SMILES,
// each built from 2-6 ring/linker/terminal blocks glued by single bonds.
std::vector<std::string> toy_corpus(int n, uint64_t seed);

// ---------- run manifest ----------

struct RunManifest {
  std::string command;
  uint64_t config_digest = 0;
  std::string code_version;
  double wall_seconds = 0.0;
  std::map<std::string, uint64_t> phase_seeds;
  std::vector<std::string> artifacts;
};

// Written atomically (temp file + rename).
void write_manifest(const std::string& path, const RunManifest& manifest);

const char* code_version();

}  // namespace fragflow::app
