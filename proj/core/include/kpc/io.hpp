#pragma once

// Persistence: model archives, experiment configs, dataset loaders, metric
// logs.
//
// Archive layout: 8-byte magic "KPCMODEL", a u64 little-endian manifest
// length, a sorted-key JSON manifest, then tightly packed little-endian f64
// blocks at the byte offsets the manifest records.

#include "kpc/train.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kpc {

constexpr std::uint32_t kArchiveFormatVersion = 1;

struct LoadedModel {
  RnnClassifier model;
  std::map<std::string, double> metrics;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

// Atomic (temp file + rename).  Sparse operators are stored as their dense
// materialization; loading re-sparsifies by dropping exact zeros, so the
// pruned pattern survives.  Saving a loaded model reproduces the archive
// byte for byte.
void save_model(const std::string& path, const RnnClassifier& model,
                const std::map<std::string, double>& metrics, std::uint64_t seed,
                std::uint64_t config_hash);
LoadedModel load_model(const std::string& path);

struct DatasetSpec {
  std::string format = "toy";  // toy | csv | idx
  std::string path;            // csv file, or idx image file
  std::string labels_path;     // idx label file
  Index sequences = 128;       // toy generator parameters
  Index timesteps = 16;
  Index features = 8;
  std::uint64_t seed = 7;
};

struct ExperimentConfig {
  CellSpec spec;
  bool bidirectional = false;
  Index classes = 2;
  TrainConfig train;
  DatasetSpec dataset;
  std::string out_dir = ".";
};

// Throws ParseError on malformed JSON, unknown enum values, or referenced
// dataset files that do not exist.
ExperimentConfig load_experiment_config(const std::string& path);
// Canonical sorted-key form; the hash input.
std::string canonical_config_json(const ExperimentConfig& cfg);
std::uint64_t experiment_config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t v);

Dataset load_dataset(const DatasetSpec& spec);
// Header "seq_id,label,f0,...", one timestep per row, rows grouped by seq_id.
Dataset load_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data);
// Big-endian magics 0x803 (images) / 0x801 (labels), u8 payload scaled to
// [0,1]; each image row becomes one timestep.
Dataset load_dataset_idx(const std::string& images_path, const std::string& labels_path);

// "# config_hash=<hex> seed=<n>" comment, then epoch,loss,accuracy rows.
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       std::uint64_t config_hash_value, std::uint64_t seed);

}  // namespace kpc
