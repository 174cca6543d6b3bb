#include "b2dcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace b2dcnn {

namespace {

constexpr std::uint8_t kMagic[7] = {'B', '2', 'D', 'C', 'N', 'N', '\0'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t get_u8() {
    need(1);
    return bytes_[off_++];
  }

  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[off_++]) << (8 * i);
    return v;
  }

  std::uint64_t get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[off_++]) << (8 * i);
    return v;
  }

  double get_f64() { return std::bit_cast<double>(get_u64()); }

  std::string get_string() {
    const std::uint32_t len = get_u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + off_), len);
    off_ += len;
    return s;
  }

  void get_f64_block(double* dst, std::size_t count) {
    need(count * 8);
    for (std::size_t i = 0; i < count; ++i) dst[i] = get_f64();
  }

  std::size_t remaining() const { return bytes_.size() - off_; }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - off_ < n) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint: file truncated (needed " + std::to_string(n) +
                                " more bytes at offset " + std::to_string(off_) + ")");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t off_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 7);
  out.push_back(kVersion);

  const RunConfig& c = ck.config;
  put_u32(out, static_cast<std::uint32_t>(c.variant));
  put_u32(out, static_cast<std::uint32_t>(c.metric));
  put_u32(out, static_cast<std::uint32_t>(c.embed_dim));
  put_u32(out, static_cast<std::uint32_t>(c.hidden));
  put_u32(out, static_cast<std::uint32_t>(c.n_filters));
  put_u32(out, static_cast<std::uint32_t>(c.filter_k));
  put_u32(out, static_cast<std::uint32_t>(c.filter_d));
  put_u32(out, static_cast<std::uint32_t>(c.pool_p1));
  put_u32(out, static_cast<std::uint32_t>(c.pool_p2));
  put_u32(out, static_cast<std::uint32_t>(c.batch));
  put_u32(out, static_cast<std::uint32_t>(c.epochs));
  put_u32(out, static_cast<std::uint32_t>(c.max_len));
  put_u32(out, static_cast<std::uint32_t>(c.cv));
  put_u32(out, c.lowercase ? 1u : 0u);
  put_f64(out, c.dropout_embed);
  put_f64(out, c.dropout_blstm);
  put_f64(out, c.dropout_penult);
  put_f64(out, c.lambda);
  put_f64(out, c.lr);
  put_f64(out, c.dev_fraction);
  put_u64(out, c.seed);

  const ModelDims& dims = ck.params.dims;
  put_u32(out, static_cast<std::uint32_t>(dims.vocab));
  put_u32(out, static_cast<std::uint32_t>(dims.n_classes));
  put_u32(out, static_cast<std::uint32_t>(dims.seq_len));

  put_u32(out, static_cast<std::uint32_t>(ck.label_names.size()));
  for (const auto& s : ck.label_names) put_string(out, s);
  put_u32(out, static_cast<std::uint32_t>(ck.vocab_tokens.size()));
  for (const auto& s : ck.vocab_tokens) put_string(out, s);

  const auto refs = tensor_refs(ck.params);
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& ref : refs) {
    put_u32(out, static_cast<std::uint32_t>(ref.tensor->rows()));
    put_u32(out, static_cast<std::uint32_t>(ref.tensor->cols()));
    const double* d = ref.tensor->data();
    for (std::size_t i = 0; i < ref.tensor->size(); ++i) put_f64(out, d[i]);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  for (int i = 0; i < 7; ++i) {
    if (r.get_u8() != kMagic[i]) {
      throw CheckpointError(CheckpointError::Kind::BadMagic,
                            "checkpoint: bad magic, not a checkpoint file");
    }
  }
  const std::uint8_t version = r.get_u8();
  if (version != kVersion) {
    throw CheckpointError(CheckpointError::Kind::UnsupportedVersion,
                          "checkpoint: unsupported format version " + std::to_string(version));
  }

  Checkpoint ck;
  RunConfig& c = ck.config;
  const std::uint32_t variant_raw = r.get_u32();
  if (variant_raw > 3) {
    throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint: bad variant field");
  }
  c.variant = static_cast<Variant>(variant_raw);
  const std::uint32_t metric_raw = r.get_u32();
  if (metric_raw > 1) {
    throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint: bad metric field");
  }
  c.metric = static_cast<Metric>(metric_raw);
  c.embed_dim = static_cast<int>(r.get_u32());
  c.hidden = static_cast<int>(r.get_u32());
  c.n_filters = static_cast<int>(r.get_u32());
  c.filter_k = static_cast<int>(r.get_u32());
  c.filter_d = static_cast<int>(r.get_u32());
  c.pool_p1 = static_cast<int>(r.get_u32());
  c.pool_p2 = static_cast<int>(r.get_u32());
  c.batch = static_cast<int>(r.get_u32());
  c.epochs = static_cast<int>(r.get_u32());
  c.max_len = static_cast<int>(r.get_u32());
  c.cv = static_cast<int>(r.get_u32());
  c.lowercase = r.get_u32() != 0;
  c.dropout_embed = r.get_f64();
  c.dropout_blstm = r.get_f64();
  c.dropout_penult = r.get_f64();
  c.lambda = r.get_f64();
  c.lr = r.get_f64();
  c.dev_fraction = r.get_f64();
  c.seed = r.get_u64();

  ModelDims dims;
  dims.vocab = static_cast<int>(r.get_u32());
  dims.n_classes = static_cast<int>(r.get_u32());
  dims.seq_len = static_cast<int>(r.get_u32());
  dims.d_w = c.embed_dim;
  dims.hidden = c.hidden;
  dims.n_filters = c.n_filters;
  dims.k = c.filter_k;
  dims.d = c.filter_d;
  dims.p1 = c.pool_p1;
  dims.p2 = c.pool_p2;

  const std::uint32_t n_labels = r.get_u32();
  for (std::uint32_t i = 0; i < n_labels; ++i) ck.label_names.push_back(r.get_string());
  const std::uint32_t n_vocab = r.get_u32();
  for (std::uint32_t i = 0; i < n_vocab; ++i) ck.vocab_tokens.push_back(r.get_string());
  if (static_cast<int>(n_vocab) != dims.vocab ||
      static_cast<int>(n_labels) != dims.n_classes) {
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          "checkpoint: label/vocabulary counts disagree with dims");
  }

  ModelParams params;
  try {
    params = make_params_shell(c.variant, dims);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          std::string("checkpoint: inconsistent dims: ") + e.what());
  }
  auto refs = tensor_refs(params);
  const std::uint32_t n_tensors = r.get_u32();
  if (n_tensors != refs.size()) {
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          "checkpoint: tensor count " + std::to_string(n_tensors) +
                              " does not match variant layout");
  }
  for (auto& ref : refs) {
    const int rows = static_cast<int>(r.get_u32());
    const int cols = static_cast<int>(r.get_u32());
    if (rows != ref.tensor->rows() || cols != ref.tensor->cols()) {
      throw CheckpointError(CheckpointError::Kind::Malformed,
                            "checkpoint: tensor " + ref.name + " has shape " +
                                std::to_string(rows) + "x" + std::to_string(cols) +
                                ", expected " + ref.tensor->shape_str());
    }
    r.get_f64_block(ref.tensor->data(), ref.tensor->size());
  }
  if (r.remaining() != 0) {
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          "checkpoint: " + std::to_string(r.remaining()) +
                              " trailing bytes after the last tensor");
  }
  ck.params = std::move(params);
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const auto bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot open checkpoint for writing: " + path);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw DataError("write failed for checkpoint: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open checkpoint: " + path);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace b2dcnn
