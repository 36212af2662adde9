#include "relcl/encoder.hpp"

#include "relcl/graphs.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace relcl {

EmbeddingSource::EmbeddingSource(EmbeddingMode mode, Index dimension) : mode_(mode), dimension_(dimension) {
  if (dimension < 1) throw Error("embedding dimension must be positive");
}

void EmbeddingSource::insert(const std::string& id, Matrix rows) {
  if (rows.cols() != dimension_) {
    throw ShapeError("embeddings for '" + id + "' have " + std::to_string(rows.cols()) + " columns, expected " +
                     std::to_string(dimension_));
  }
  if (!rows.allFinite()) throw ValidationError("embeddings for '" + id + "' contain non-finite values");
  table_[id] = std::move(rows);
}

const Matrix& EmbeddingSource::rows(const SentenceRecord& record) const {
  const auto it = table_.find(record.id);
  if (it == table_.end()) throw Error("no embedding rows for record '" + record.id + "'");
  if (static_cast<std::size_t>(it->second.rows()) < record.size()) {
    throw Error("record '" + record.id + "': missing embedding row " + std::to_string(it->second.rows()) + " of " +
                std::to_string(record.size()));
  }
  return it->second;
}

std::uint64_t EmbeddingSource::fingerprint() const {
  std::uint64_t h = fnv1a(std::to_string(dimension_));
  for (const auto& [id, m] : table_) {
    h = fnv1a(id, h);
    h = relcl::fingerprint(m, h);
  }
  return h;
}

namespace {

RowVector random_unit(Index dim, std::uint64_t seed) {
  Rng rng(seed);
  RowVector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = rng.normal();
  return v / v.norm();
}

// Token roles used to plant the weak shared component.
enum Role : std::size_t { outside, drug_head, drug_modifier, ae_head, ae_modifier, role_count };

}  // namespace

EmbeddingSource synth_embeddings(const std::vector<SentenceRecord>& corpus, Index dimension, std::uint64_t seed,
                                 const SynthEmbeddingConfig& config) {
  if (dimension < 2) throw Error("synth_embeddings: dimension must be at least 2");

  std::map<std::string, std::array<std::size_t, role_count>> role_counts;
  for (const auto& r : corpus) {
    std::vector<Role> roles(r.size(), outside);
    for (const auto& span : decode_bio(r.tags)) {
      const bool drug = span.type == EntityType::drug;
      for (std::size_t i = span.start; i <= span.end; ++i) {
        const bool head = i == span.end;
        roles[i] = drug ? (head ? drug_head : drug_modifier) : (head ? ae_head : ae_modifier);
      }
    }
    for (std::size_t i = 0; i < r.size(); ++i) ++role_counts[r.tokens[i]][roles[i]];
  }

  std::array<RowVector, role_count> role_direction;
  for (std::size_t k = 0; k < role_count; ++k) {
    role_direction[k] = random_unit(dimension, mix_seed(seed, fnv1a("role:" + std::to_string(k))));
  }
  std::map<std::string, RowVector> type_vector;
  for (const auto& [token, counts] : role_counts) {
    std::size_t role = 0;
    for (std::size_t k = 1; k < role_count; ++k) {
      if (counts[k] > counts[role]) role = k;
    }
    RowVector v = random_unit(dimension, mix_seed(seed, fnv1a("type:" + token))) +
                  config.type_signal * role_direction[role];
    type_vector.emplace(token, v / v.norm());
  }

  const Index rank = std::min(config.context_rank, dimension);
  Matrix context_basis(rank, dimension);
  for (Index k = 0; k < rank; ++k) {
    context_basis.row(k) = random_unit(dimension, mix_seed(seed, fnv1a("context:" + std::to_string(k))));
  }

  EmbeddingSource source(EmbeddingMode::synthetic, dimension);
  std::vector<RowVector> position_vectors;
  for (const auto& r : corpus) {
    RowVector context = RowVector::Zero(dimension);
    if (config.context_weight > 0.0 && rank > 0) {
      Rng rng(mix_seed(seed, fnv1a("sentence:" + r.id)));
      RowVector mix(rank);
      for (Index k = 0; k < rank; ++k) mix(k) = rng.normal();
      context = mix * context_basis;
      context *= config.context_weight / context.norm();
    }
    while (position_vectors.size() < r.size()) {
      position_vectors.push_back(
          random_unit(dimension, mix_seed(seed, fnv1a("position:" + std::to_string(position_vectors.size())))));
    }
    Matrix rows(static_cast<Index>(r.size()), dimension);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const RowVector v = type_vector.at(r.tokens[i]) + config.jitter * position_vectors[i] + context;
      rows.row(static_cast<Index>(i)) = v / v.norm();
    }
    source.insert(r.id, std::move(rows));
  }
  return source;
}

namespace {

constexpr char kSidecarMagic[8] = {'R', 'E', 'L', 'C', 'L', 'E', 'M', 'B'};
constexpr std::uint32_t kSidecarVersion = 1;
constexpr std::string_view kTextHeader = "RELCLEMB-TEXT 1";

template <typename T>
void put(std::ostream& out, T v) {
  char bytes[sizeof v];
  std::memcpy(bytes, &v, sizeof v);
  out.write(bytes, sizeof bytes);
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof bytes)) throw ParseError("truncated embedding file " + path.string());
  T v;
  std::memcpy(&v, bytes, sizeof v);
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

Matrix get_matrix(std::istream& in, Index rows, Index cols, const fs::path& path) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = get<double>(in, path);
  }
  return m;
}

void text_matrix(std::ostream& out, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
    out << '\n';
  }
}

Matrix read_text_matrix(std::istream& in, Index rows, Index cols, const fs::path& path) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      std::string token;
      if (!(in >> token)) throw ParseError("truncated embedding file " + path.string());
      try {
        m(r, c) = std::stod(token);
      } catch (const std::exception&) {
        throw ParseError("bad number '" + token + "' in " + path.string());
      }
    }
  }
  return m;
}

}  // namespace

void write_sidecar(const fs::path& path, const EmbeddingSidecar& sidecar, SidecarFormat format) {
  if (sidecar.adjacency.rows() != sidecar.adjacency.cols()) throw ShapeError("sidecar adjacency must be square");
  if (format == SidecarFormat::binary) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kSidecarMagic, sizeof kSidecarMagic);
    put<std::uint32_t>(out, kSidecarVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(sidecar.id.size()));
    out.write(sidecar.id.data(), static_cast<std::streamsize>(sidecar.id.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(sidecar.embeddings.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(sidecar.embeddings.cols()));
    put_matrix(out, sidecar.embeddings);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(sidecar.adjacency.rows()));
    put_matrix(out, sidecar.adjacency);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << kTextHeader << '\n';
  out << "id " << sidecar.id << '\n';
  out << "shape " << sidecar.embeddings.rows() << ' ' << sidecar.embeddings.cols() << '\n';
  text_matrix(out, sidecar.embeddings);
  out << "adjacency " << sidecar.adjacency.rows() << '\n';
  text_matrix(out, sidecar.adjacency);
}

EmbeddingSidecar read_sidecar(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open embedding file " + path.string());
  char magic[sizeof kSidecarMagic];
  if (!in.read(magic, sizeof magic)) throw ParseError("truncated embedding file " + path.string());
  EmbeddingSidecar out;
  // The text header shares the magic prefix and continues with '-'.
  if (std::memcmp(magic, kSidecarMagic, sizeof magic) == 0 && in.peek() != '-') {
    const auto version = get<std::uint32_t>(in, path);
    if (version != kSidecarVersion) throw ParseError("unsupported embedding file version in " + path.string());
    const auto len = get<std::uint32_t>(in, path);
    out.id.resize(len);
    if (!in.read(out.id.data(), len)) throw ParseError("truncated embedding file " + path.string());
    const auto rows = static_cast<Index>(get<std::uint64_t>(in, path));
    const auto cols = static_cast<Index>(get<std::uint64_t>(in, path));
    out.embeddings = get_matrix(in, rows, cols, path);
    const auto n = static_cast<Index>(get<std::uint64_t>(in, path));
    out.adjacency = get_matrix(in, n, n, path);
    return out;
  }
  in.clear();
  in.seekg(0);
  std::string line;
  std::getline(in, line);
  if (line != kTextHeader) throw ParseError("not an embedding file: " + path.string());
  std::string key;
  Index rows = 0;
  Index cols = 0;
  Index n = 0;
  if (!(in >> key >> out.id) || key != "id") throw ParseError("missing id line in " + path.string());
  if (!(in >> key >> rows >> cols) || key != "shape" || rows < 0 || cols < 0) {
    throw ParseError("missing shape line in " + path.string());
  }
  out.embeddings = read_text_matrix(in, rows, cols, path);
  if (!(in >> key >> n) || key != "adjacency" || n < 0) throw ParseError("missing adjacency line in " + path.string());
  out.adjacency = read_text_matrix(in, n, n, path);
  return out;
}

void write_embedding_dir(const EmbeddingSource& source, const std::vector<SentenceRecord>& records,
                         const fs::path& dir, SidecarFormat format) {
  fs::create_directories(dir);
  for (const auto& r : records) {
    EmbeddingSidecar s;
    s.id = r.id;
    s.embeddings = source.rows(r).topRows(static_cast<Index>(r.size()));
    if (!r.relations.empty()) s.adjacency = normalize_adjacency(build_subgraph(r, s.embeddings).adjacency);
    std::string name = r.id;
    for (auto& c : name) {
      if (c == '/' || c == '\\' || c == ':') c = '_';
    }
    write_sidecar(dir / (name + ".emb"), s, format);
  }
}

EmbeddingSource load_embedding_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("embedding directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".emb") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .emb files in " + dir.string());
  std::optional<EmbeddingSource> source;
  for (const auto& f : files) {
    auto s = read_sidecar(f);
    if (!source) source.emplace(EmbeddingMode::file, s.embeddings.cols());
    source->insert(s.id, std::move(s.embeddings));
  }
  return std::move(*source);
}

std::string_view to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::mean: return "mean";
    case PoolingMode::max: return "max";
    case PoolingMode::first_token: return "first";
  }
  return "mean";
}

PoolingMode parse_pooling(std::string_view text) {
  if (text == "mean") return PoolingMode::mean;
  if (text == "max") return PoolingMode::max;
  if (text == "first" || text == "cls" || text == "first-token") return PoolingMode::first_token;
  throw ParseError("unknown pooling mode '" + std::string(text) + "'");
}

namespace {

std::vector<Index> unmasked_rows(Index rows, const std::vector<int>& mask) {
  std::vector<Index> keep;
  if (mask.empty()) {
    for (Index r = 0; r < rows; ++r) keep.push_back(r);
  } else {
    for (std::size_t r = 0; r < mask.size() && static_cast<Index>(r) < rows; ++r) {
      if (mask[r] != 0) keep.push_back(static_cast<Index>(r));
    }
  }
  if (keep.empty()) throw Error("pool: every row is masked");
  return keep;
}

}  // namespace

RowVector pool(const Matrix& rows, PoolingMode mode, const std::vector<int>& mask) {
  const auto keep = unmasked_rows(rows.rows(), mask);
  switch (mode) {
    case PoolingMode::first_token: return rows.row(keep.front());
    case PoolingMode::max: {
      RowVector out = rows.row(keep.front());
      for (auto r : keep) out = out.cwiseMax(rows.row(r));
      return out;
    }
    case PoolingMode::mean: break;
  }
  RowVector out = RowVector::Zero(rows.cols());
  for (auto r : keep) out += rows.row(r);
  return out / static_cast<double>(keep.size());
}

Var pool(Var rows, PoolingMode mode, const std::vector<int>& mask) {
  const auto keep = unmasked_rows(rows.rows(), mask);
  const bool all = static_cast<Index>(keep.size()) == rows.rows();
  switch (mode) {
    case PoolingMode::first_token: return select_rows(rows, {keep.front()});
    case PoolingMode::max: return max_rows(all ? rows : select_rows(rows, keep));
    case PoolingMode::mean: break;
  }
  return mean_rows(all ? rows : select_rows(rows, keep));
}

DenseLayer make_dense(const std::string& name, Index in, Index out, Activation act, Rng& rng) {
  const double stddev = std::sqrt((act == Activation::relu ? 2.0 : 1.0) / static_cast<double>(in));
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = stddev * rng.normal();
  return DenseLayer{Parameter(name + ".weight", std::move(w)), Parameter(name + ".bias", Matrix::Zero(1, out)), act};
}

Var DenseLayer::forward(Tape& tape, Var x) {
  return activate(add_row(matmul(x, tape.parameter(weight)), tape.parameter(bias)), activation);
}

Matrix DenseLayer::forward(const Matrix& x) const {
  Matrix z = (x * weight.value).rowwise() + bias.value.row(0);
  switch (activation) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: break;
  }
  return z;
}

Var ContextMixer::forward(Tape& tape, Var h) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(query.value.cols()));
  const Var q = matmul(h, tape.parameter(query));
  const Var k = matmul(h, tape.parameter(key));
  const Var v = matmul(h, tape.parameter(value));
  const Var attention = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
  return add(h, matmul(attention, v));
}

Matrix ContextMixer::forward(const Matrix& h) const {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(query.value.cols()));
  const Matrix scores = (h * query.value) * (h * key.value).transpose() * inv_sqrt_d;
  Matrix attention(scores.rows(), scores.cols());
  for (Index r = 0; r < scores.rows(); ++r) {
    const RowVector e = (scores.row(r).array() - scores.row(r).maxCoeff()).exp().matrix();
    attention.row(r) = e / e.sum();
  }
  return h + attention * (h * value.value);
}

constexpr double kResidualInitScale = 0.1;

EncoderStack::EncoderStack(std::shared_ptr<const EmbeddingSource> base, const EncoderConfig& config,
                           std::uint64_t seed, const std::string& prefix)
    : base_(std::move(base)), config_(config) {
  if (!base_) throw Error("EncoderStack: missing embedding source");
  Rng rng(seed);
  const Index width = config.hidden > 0 ? config.hidden : base_->dimension();
  Index in = base_->dimension();
  for (std::size_t i = 0; i < config.head_layers; ++i) {
    layers_.push_back(make_dense(prefix + ".layer" + std::to_string(i), in, width, config.activation, rng));
    if (residual_at(i)) layers_.back().weight.value *= kResidualInitScale;
    in = width;
  }
  if (config.context_mixer) {
    auto small = [&](const std::string& name) {
      Matrix w(in, in);
      const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
      for (Index i = 0; i < w.size(); ++i) w.data()[i] = stddev * rng.normal();
      return Parameter(prefix + ".mixer." + name, std::move(w));
    };
    mixer_ = ContextMixer{small("query"), small("key"), small("value")};
  }
}

Var EncoderStack::forward(Tape& tape, const SentenceRecord& record) {
  const Matrix& all = base_->rows(record);
  Var h = tape.constant(all.topRows(static_cast<Index>(record.size())));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Var out = layers_[i].forward(tape, h);
    h = residual_at(i) ? h + out : out;
  }
  if (mixer_) h = mixer_->forward(tape, h);
  return h;
}

Matrix EncoderStack::embed(const SentenceRecord& record) const {
  Matrix h = base_->rows(record).topRows(static_cast<Index>(record.size()));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix out = layers_[i].forward(h);
    h = residual_at(i) ? Matrix(h + out) : std::move(out);
  }
  if (mixer_) h = mixer_->forward(h);
  return h;
}

std::vector<Parameter*> EncoderStack::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  if (mixer_) {
    out.push_back(&mixer_->query);
    out.push_back(&mixer_->key);
    out.push_back(&mixer_->value);
  }
  return out;
}

bool EncoderStack::residual_at(std::size_t layer) const {
  if (!config_.residual) return false;
  const Index width = config_.hidden > 0 ? config_.hidden : base_->dimension();
  return layer > 0 || width == base_->dimension();
}

Index EncoderStack::output_dim() const {
  if (layers_.empty()) return base_->dimension();
  return layers_.back().weight.value.cols();
}

}  // namespace relcl
