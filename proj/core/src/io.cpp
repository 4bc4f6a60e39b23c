#include "kpc/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "archive format assumes a little-endian host");

namespace kpc {

namespace {

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw ParseError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ParseError("rename " + tmp + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return std::move(os).str();
}

constexpr char kMagic[8] = {'K', 'P', 'C', 'M', 'O', 'D', 'E', 'L'};

struct Block {
  std::string name;
  Matd data;
};

void collect_blocks(const CellParams& cell, const std::string& prefix, std::vector<Block>& out) {
  for (std::size_t i = 0; i < cell.ops.size(); ++i) {
    const LinearOperator& op = cell.ops[i];
    const std::string base = prefix + "op" + std::to_string(i) + ".";
    switch (op.kind()) {
      case LinearOperator::Kind::Dense:
        out.push_back({base + "w", op.dense_weight()});
        break;
      case LinearOperator::Kind::Kron:
        out.push_back({base + "b", op.kron_pair().B});
        out.push_back({base + "c", op.kron_pair().C});
        break;
      case LinearOperator::Kind::LowRank:
        out.push_back({base + "u", op.low_rank_pair().U});
        out.push_back({base + "v", op.low_rank_pair().V});
        break;
      case LinearOperator::Kind::Sparse:
        out.push_back({base + "w", op.sparse_matrix().materialize()});
        break;
    }
  }
  if (cell.bias.size() > 0) out.push_back({prefix + "bias", cell.bias});
  if (cell.use_scalars) {
    Matd s(2, 1);
    s(0, 0) = cell.alpha_raw;
    s(1, 0) = cell.beta_raw;
    out.push_back({prefix + "scalars", s});
  }
}

const char* archive_kind_name(OperatorKind k) { return operator_kind_name(k); }

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << v;
  return os.str();
}

void save_model(const std::string& path, const RnnClassifier& model,
                const std::map<std::string, double>& metrics, std::uint64_t seed,
                std::uint64_t config_hash) {
  std::vector<Block> blocks;
  collect_blocks(model.cell, "cell.", blocks);
  if (model.bidirectional) collect_blocks(model.cell_bwd, "bwd.", blocks);
  blocks.push_back({"head.w", model.head_w});
  blocks.push_back({"head.b", model.head_b});

  nlohmann::json manifest;
  manifest["format_version"] = kArchiveFormatVersion;
  manifest["spec"] = {{"family", family_name(model.spec.family)},
                      {"input_size", model.spec.input_size},
                      {"hidden_size", model.spec.hidden_size},
                      {"kind", archive_kind_name(model.spec.kind)},
                      {"bias", model.spec.bias},
                      {"per_gate", model.spec.per_gate}};
  manifest["bidirectional"] = model.bidirectional;
  manifest["classes"] = model.num_classes;
  nlohmann::json jmetrics = nlohmann::json::object();
  for (const auto& [k, v] : metrics)
    if (std::isfinite(v)) jmetrics[k] = v;  // JSON has no NaN/inf
  manifest["metrics"] = std::move(jmetrics);
  manifest["seed"] = seed;
  manifest["config_hash"] = config_hash;

  std::int64_t offset = 0;
  nlohmann::json block_list = nlohmann::json::array();
  for (const Block& b : blocks) {
    block_list.push_back({{"name", b.name},
                          {"rows", b.data.rows()},
                          {"cols", b.data.cols()},
                          {"offset", offset}});
    offset += static_cast<std::int64_t>(b.data.size()) * 8;
  }
  manifest["blocks"] = std::move(block_list);

  const std::string mtext = manifest.dump();
  std::string bytes;
  bytes.reserve(16 + mtext.size() + static_cast<std::size_t>(offset));
  bytes.append(kMagic, sizeof(kMagic));
  const std::uint64_t mlen = mtext.size();
  bytes.append(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  bytes.append(mtext);
  for (const Block& b : blocks)
    bytes.append(reinterpret_cast<const char*>(b.data.data()),
                 static_cast<std::size_t>(b.data.size()) * 8);
  write_file_atomic(path, bytes);
}

namespace {

struct BlockReader {
  const std::string* path;
  const char* data_start;
  std::size_t data_size;
  std::map<std::string, std::tuple<Index, Index, std::int64_t>> index;

  Matd read(const std::string& name) const {
    const auto it = index.find(name);
    if (it == index.end())
      throw ParseError(*path + ": archive is missing block '" + name + "'");
    const auto [rows, cols, offset] = it->second;
    const std::int64_t nbytes = static_cast<std::int64_t>(rows) * cols * 8;
    if (rows < 0 || cols < 0 || offset < 0 ||
        static_cast<std::size_t>(offset + nbytes) > data_size)
      throw ParseError(*path + ": block '" + name + "' escapes the data section");
    Matd m(rows, cols);
    std::memcpy(m.data(), data_start + offset, static_cast<std::size_t>(nbytes));
    return m;
  }
  Vecd read_vector(const std::string& name) const {
    const Matd m = read(name);
    if (m.cols() != 1)
      throw ParseError(*path + ": block '" + name + "' is not a column vector");
    return m.col(0);
  }
};

CellParams load_cell(const BlockReader& blocks, const CellSpec& spec, const std::string& prefix) {
  CellParams cell;
  const std::size_t n_ops = spec.per_gate ? static_cast<std::size_t>(gate_count(spec.family)) : 1;
  for (std::size_t i = 0; i < n_ops; ++i) {
    const std::string base = prefix + "op" + std::to_string(i) + ".";
    switch (spec.kind) {
      case OperatorKind::Dense:
        cell.ops.push_back(LinearOperator::dense(blocks.read(base + "w")));
        break;
      case OperatorKind::Kron:
        cell.ops.push_back(LinearOperator::kron(blocks.read(base + "b"), blocks.read(base + "c")));
        break;
      case OperatorKind::LowRank:
        cell.ops.push_back(
            LinearOperator::low_rank(blocks.read(base + "u"), blocks.read(base + "v")));
        break;
      case OperatorKind::Sparse:
        cell.ops.push_back(LinearOperator::sparse(SparseCSRd::from_dense(blocks.read(base + "w"))));
        break;
    }
    const Index want_rows = spec.per_gate ? spec.hidden_size : spec.stacked_rows();
    if (cell.ops.back().rows() != want_rows || cell.ops.back().cols() != spec.concat_size())
      throw ParseError(*blocks.path + ": operator '" + base + "' is " +
                       std::to_string(cell.ops.back().rows()) + "x" +
                       std::to_string(cell.ops.back().cols()) + ", spec wants " +
                       std::to_string(want_rows) + "x" + std::to_string(spec.concat_size()));
  }
  if (spec.bias) cell.bias = blocks.read_vector(prefix + "bias");
  if (spec.family == CellFamily::FastRnn) {
    const Vecd s = blocks.read_vector(prefix + "scalars");
    if (s.size() != 2) throw ParseError(*blocks.path + ": scalars block must have 2 entries");
    cell.use_scalars = true;
    cell.alpha_raw = s(0);
    cell.beta_raw = s(1);
  }
  return cell;
}

}  // namespace

LoadedModel load_model(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path + ": not a model archive (bad magic)");
  std::uint64_t mlen = 0;
  std::memcpy(&mlen, bytes.data() + 8, sizeof(mlen));
  if (16 + mlen > bytes.size())
    throw ParseError(path + ": manifest length " + std::to_string(mlen) + " exceeds file size");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad manifest: " + e.what());
  }

  LoadedModel out;
  try {
    const std::uint32_t version = manifest.at("format_version").get<std::uint32_t>();
    if (version != kArchiveFormatVersion)
      throw ParseError(path + ": unsupported archive version " + std::to_string(version) +
                       " (expected " + std::to_string(kArchiveFormatVersion) + ")");

    const auto& jspec = manifest.at("spec");
    CellSpec spec;
    spec.family = parse_family(jspec.at("family").get<std::string>());
    spec.kind = parse_operator_kind(jspec.at("kind").get<std::string>());
    spec.input_size = jspec.at("input_size").get<Index>();
    spec.hidden_size = jspec.at("hidden_size").get<Index>();
    spec.bias = jspec.at("bias").get<bool>();
    spec.per_gate = jspec.at("per_gate").get<bool>();

    BlockReader blocks;
    blocks.path = &path;
    blocks.data_start = bytes.data() + 16 + mlen;
    blocks.data_size = bytes.size() - 16 - mlen;
    for (const auto& jb : manifest.at("blocks"))
      blocks.index[jb.at("name").get<std::string>()] = {jb.at("rows").get<Index>(),
                                                        jb.at("cols").get<Index>(),
                                                        jb.at("offset").get<std::int64_t>()};

    out.model.spec = spec;
    out.model.bidirectional = manifest.at("bidirectional").get<bool>();
    out.model.num_classes = manifest.at("classes").get<Index>();
    out.model.cell = load_cell(blocks, spec, "cell.");
    if (out.model.bidirectional) out.model.cell_bwd = load_cell(blocks, spec, "bwd.");
    out.model.head_w = blocks.read("head.w");
    out.model.head_b = blocks.read_vector("head.b");
    const Index features = spec.hidden_size * (out.model.bidirectional ? 2 : 1);
    if (out.model.head_w.rows() != out.model.num_classes || out.model.head_w.cols() != features)
      throw ParseError(path + ": head.w shape does not match classes x features");

    if (manifest.contains("metrics"))
      for (const auto& [k, v] : manifest.at("metrics").items())
        out.metrics[k] = v.get<double>();
    out.seed = manifest.at("seed").get<std::uint64_t>();
    out.config_hash = manifest.at("config_hash").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad manifest field: " + e.what());
  }
  return out;
}

// ============================================================
// experiment configs
// ============================================================

namespace {

TrainConfig::Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return TrainConfig::Optimizer::Sgd;
  if (s == "adam") return TrainConfig::Optimizer::Adam;
  throw ParseError("unknown optimizer '" + s + "' (expected sgd|adam)");
}

const char* optimizer_name(TrainConfig::Optimizer o) {
  return o == TrainConfig::Optimizer::Sgd ? "sgd" : "adam";
}

void require_file(const std::string& context, const std::string& p) {
  if (p.empty()) throw ParseError(context + ": path is empty");
  if (!std::filesystem::exists(p)) throw ParseError(context + ": no such file: " + p);
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  ExperimentConfig cfg;
  try {
    cfg.spec.family = parse_family(j.at("family").get<std::string>());
    cfg.spec.input_size = j.at("input_size").get<Index>();
    cfg.spec.hidden_size = j.at("hidden_size").get<Index>();
    cfg.spec.kind = parse_operator_kind(j.value("operator", std::string("dense")));
    cfg.spec.bias = j.value("bias", true);
    cfg.spec.per_gate = j.value("per_gate", false);
    cfg.bidirectional = j.value("bidirectional", false);
    cfg.classes = j.value("classes", Index(2));
    cfg.out_dir = j.value("out_dir", std::string("."));

    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.optimizer = parse_optimizer(t.value("optimizer", std::string("adam")));
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.bptt_len = t.value("bptt_len", cfg.train.bptt_len);
      cfg.train.clip_norm = t.value("clip_norm", cfg.train.clip_norm);
      cfg.train.seed = t.value("seed", cfg.train.seed);
      cfg.train.target_sparsity = t.value("target_sparsity", cfg.train.target_sparsity);
      cfg.train.lowrank_budget = t.value("lowrank_budget", cfg.train.lowrank_budget);
    }

    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      cfg.dataset.format = d.value("format", std::string("toy"));
      cfg.dataset.path = d.value("path", std::string());
      cfg.dataset.labels_path = d.value("labels_path", std::string());
      cfg.dataset.sequences = d.value("sequences", cfg.dataset.sequences);
      cfg.dataset.timesteps = d.value("timesteps", cfg.dataset.timesteps);
      cfg.dataset.features = d.value("features", cfg.dataset.features);
      cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  if (cfg.dataset.format == "csv") {
    require_file(path + ": dataset.path", cfg.dataset.path);
  } else if (cfg.dataset.format == "idx") {
    require_file(path + ": dataset.path", cfg.dataset.path);
    require_file(path + ": dataset.labels_path", cfg.dataset.labels_path);
  } else if (cfg.dataset.format != "toy") {
    throw ParseError(path + ": unknown dataset format '" + cfg.dataset.format +
                     "' (expected toy|csv|idx)");
  }
  return cfg;
}

std::string canonical_config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["family"] = family_name(cfg.spec.family);
  j["input_size"] = cfg.spec.input_size;
  j["hidden_size"] = cfg.spec.hidden_size;
  j["operator"] = operator_kind_name(cfg.spec.kind);
  j["bias"] = cfg.spec.bias;
  j["per_gate"] = cfg.spec.per_gate;
  j["bidirectional"] = cfg.bidirectional;
  j["classes"] = cfg.classes;
  j["out_dir"] = cfg.out_dir;
  j["train"] = {{"optimizer", optimizer_name(cfg.train.optimizer)},
                {"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"bptt_len", cfg.train.bptt_len},
                {"clip_norm", cfg.train.clip_norm},
                {"seed", cfg.train.seed},
                {"target_sparsity", cfg.train.target_sparsity},
                {"lowrank_budget", cfg.train.lowrank_budget}};
  j["dataset"] = {{"format", cfg.dataset.format},
                  {"path", cfg.dataset.path},
                  {"labels_path", cfg.dataset.labels_path},
                  {"sequences", cfg.dataset.sequences},
                  {"timesteps", cfg.dataset.timesteps},
                  {"features", cfg.dataset.features},
                  {"seed", cfg.dataset.seed}};
  return j.dump();
}

std::uint64_t experiment_config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(canonical_config_json(cfg));
}

// ============================================================
// datasets
// ============================================================

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.format == "toy")
    return make_separable_dataset(spec.sequences, spec.timesteps, spec.features, spec.seed);
  if (spec.format == "csv") return load_dataset_csv(spec.path);
  if (spec.format == "idx") return load_dataset_idx(spec.path, spec.labels_path);
  throw ParseError("unknown dataset format '" + spec.format + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double_field(const std::string& s, const std::string& path, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

long parse_long_field(const std::string& s, const std::string& path, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
}

}  // namespace

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "seq_id" || header[1] != "label")
    throw ParseError(path + ":1: header must be seq_id,label,f0,...");
  const std::size_t n_features = header.size() - 2;

  Dataset data;
  long current_id = -1;
  bool have_current = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    const long seq_id = parse_long_field(fields[0], path, line_no);
    const long label = parse_long_field(fields[1], path, line_no);
    Vecd x(static_cast<Index>(n_features));
    for (std::size_t f = 0; f < n_features; ++f)
      x(static_cast<Index>(f)) = parse_double_field(fields[2 + f], path, line_no);

    if (!have_current || seq_id != current_id) {
      data.emplace_back();
      data.back().label = static_cast<int>(label);
      current_id = seq_id;
      have_current = true;
    } else if (data.back().label != static_cast<int>(label)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": sequence " +
                       std::to_string(seq_id) + " has conflicting labels");
    }
    data.back().xs.push_back(std::move(x));
  }
  if (data.empty()) throw ParseError(path + ": no data rows");
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  if (data.empty()) throw SizeError("write_dataset_csv: empty dataset");
  const Index features = data.front().xs.empty() ? 0 : data.front().xs.front().size();
  std::ostringstream os;
  os.precision(17);
  os << "seq_id,label";
  for (Index f = 0; f < features; ++f) os << ",f" << f;
  os << "\n";
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (const Vecd& x : data[s].xs) {
      if (x.size() != features)
        throw ShapeError("write_dataset_csv: ragged feature widths");
      os << s << "," << data[s].label;
      for (Index f = 0; f < features; ++f) os << "," << x(f);
      os << "\n";
    }
  }
  write_file_atomic(path, std::move(os).str());
}

namespace {

std::uint32_t be32_at(const std::string& bytes, std::size_t off, const std::string& path) {
  if (off + 4 > bytes.size())
    throw ParseError(path + ": truncated at byte " + std::to_string(bytes.size()) +
                     " (wanted a u32 at offset " + std::to_string(off) + ")");
  const auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i]));
  };
  return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

}  // namespace

Dataset load_dataset_idx(const std::string& images_path, const std::string& labels_path) {
  const std::string img = read_file(images_path);
  const std::string lbl = read_file(labels_path);

  const std::uint32_t img_magic = be32_at(img, 0, images_path);
  if (img_magic != 0x803)
    throw ParseError(images_path + ": bad image magic 0x" + to_hex(img_magic).substr(8));
  const std::uint32_t count = be32_at(img, 4, images_path);
  const std::uint32_t rows = be32_at(img, 8, images_path);
  const std::uint32_t cols = be32_at(img, 12, images_path);
  const std::size_t need = 16 + static_cast<std::size_t>(count) * rows * cols;
  if (img.size() < need)
    throw ParseError(images_path + ": truncated at byte " + std::to_string(img.size()) +
                     " (header promises " + std::to_string(need) + ")");

  const std::uint32_t lbl_magic = be32_at(lbl, 0, labels_path);
  if (lbl_magic != 0x801)
    throw ParseError(labels_path + ": bad label magic 0x" + to_hex(lbl_magic).substr(8));
  const std::uint32_t lbl_count = be32_at(lbl, 4, labels_path);
  if (lbl_count != count)
    throw ParseError(labels_path + ": has " + std::to_string(lbl_count) + " labels for " +
                     std::to_string(count) + " images");
  if (lbl.size() < 8 + static_cast<std::size_t>(count))
    throw ParseError(labels_path + ": truncated at byte " + std::to_string(lbl.size()));

  Dataset data(count);
  std::size_t off = 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    data[i].label = static_cast<unsigned char>(lbl[8 + i]);
    data[i].xs.reserve(rows);
    for (std::uint32_t r = 0; r < rows; ++r) {
      Vecd x(static_cast<Index>(cols));
      for (std::uint32_t c = 0; c < cols; ++c)
        x(static_cast<Index>(c)) = static_cast<unsigned char>(img[off++]) / 255.0;
      data[i].xs.push_back(std::move(x));
    }
  }
  return data;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       std::uint64_t config_hash_value, std::uint64_t seed) {
  std::ostringstream os;
  os.precision(17);
  os << "# config_hash=" << to_hex(config_hash_value) << " seed=" << seed << "\n";
  os << "epoch,loss,accuracy\n";
  for (const EpochMetrics& m : metrics)
    os << m.epoch << "," << m.loss << "," << m.accuracy << "\n";
  write_file_atomic(path, std::move(os).str());
}

}  // namespace kpc
