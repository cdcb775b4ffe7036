#include "spes/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

using nlohmann::json;

namespace spes {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'E', 'S', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
}

template <typename T>
void write_block(std::ofstream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(T)));
}

template <typename T>
void read_block(std::ifstream& in, std::vector<T>& v, size_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(T)));
}

}  // namespace

ModelF Checkpoint::restore_model() const {
  ModelF model(config, /*init_seed=*/0);
  if (params.size() != model.param_count())
    throw Error(ErrorKind::format, "checkpoint: parameter count does not match spec");
  model.params().load_flat(params);
  return model;
}

Checkpoint snapshot(const ModelF& model) {
  Checkpoint c;
  c.config = model.config();
  c.params = model.params().flatten_values();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write checkpoint " + path.string());

  json header;
  header["model"] = json::parse(ckpt.config.to_json());
  header["n_params"] = ckpt.params.size();
  header["n_adam"] = ckpt.adam_m.size();
  header["adam_step"] = ckpt.adam_step;
  header["repeat"] = ckpt.repeat;
  header["fold"] = ckpt.fold;
  header["best_epoch"] = ckpt.best_epoch;
  header["best_val_auroc"] = ckpt.best_val_auroc;
  header["seed"] = ckpt.seed;
  header["stats_mean"] = ckpt.stats_mean;
  header["stats_sd"] = ckpt.stats_sd;
  std::string htext = header.dump();

  out.write(kMagic, sizeof kMagic);
  write_pod(out, kVersion);
  write_pod(out, uint32_t(htext.size()));
  out.write(htext.data(), std::streamsize(htext.size()));
  write_block(out, ckpt.params);
  write_block(out, ckpt.adam_m);
  write_block(out, ckpt.adam_v);
  if (!out) throw Error(ErrorKind::io, "short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path.string());

  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw Error(ErrorKind::format, path.string() + ": not a checkpoint file");
  uint32_t version = 0, hlen = 0;
  read_pod(in, version);
  if (version != kVersion)
    throw Error(ErrorKind::format, path.string() + ": unsupported checkpoint version");
  read_pod(in, hlen);
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw Error(ErrorKind::format, path.string() + ": truncated header");

  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": bad header: " + e.what());
  }

  Checkpoint c;
  c.config = ModelConfig::from_json(header.at("model").dump());
  size_t n_params = header.at("n_params").get<size_t>();
  size_t n_adam = header.at("n_adam").get<size_t>();
  c.adam_step = header.at("adam_step").get<long>();
  c.repeat = header.at("repeat").get<int>();
  c.fold = header.at("fold").get<int>();
  c.best_epoch = header.at("best_epoch").get<int>();
  c.best_val_auroc = header.at("best_val_auroc").get<double>();
  c.seed = header.at("seed").get<uint64_t>();
  c.stats_mean = header.at("stats_mean").get<double>();
  c.stats_sd = header.at("stats_sd").get<double>();
  read_block(in, c.params, n_params);
  read_block(in, c.adam_m, n_adam);
  read_block(in, c.adam_v, n_adam);
  if (!in) throw Error(ErrorKind::format, path.string() + ": truncated parameter block");
  return c;
}

}  // namespace spes
