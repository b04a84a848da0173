#include "mltm/model.hpp"

#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "mltm/error.hpp"
#include "mltm/fileutil.hpp"

namespace mltm {

namespace {
constexpr std::string_view kModelMagic = "MLTMMODL";
}

ModelConfig ModelConfig::with_defaults(std::size_t num_topics, std::size_t num_channels,
                                       std::uint64_t seed) {
  if (num_topics < 1) throw ConfigError("num_topics must be >= 1");
  return ModelConfig{num_topics, default_alpha(num_topics),
                     std::vector<double>(num_channels, kDefaultBeta), seed};
}

void ModelConfig::validate(std::size_t num_channels) const {
  if (num_topics < 1) throw ConfigError("num_topics must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (beta.size() != num_channels) {
    throw ConfigError("expected " + std::to_string(num_channels) + " beta values, got " +
                      std::to_string(beta.size()));
  }
  for (double b : beta) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("every beta must be > 0");
  }
}

TopicDistribution::TopicDistribution(std::vector<double> theta) : theta_(std::move(theta)) {
  if (theta_.empty()) throw InvalidArgument("topic distribution is empty");
  double sum = 0.0;
  for (double v : theta_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("topic distribution has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    throw InvalidArgument("topic distribution sums to " + std::to_string(sum));
  }
}

TopicDistribution TopicDistribution::uniform(std::size_t k) {
  return TopicDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

TopicDistribution TopicDistribution::normalized(std::vector<double> weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= sum;
  return TopicDistribution(std::move(weights));
}

namespace {

template <typename T>
TopicDistribution theta_from_counts(std::span<const T> counts, double alpha) {
  const double k = static_cast<double>(counts.size());
  double total = 0.0;
  for (T c : counts) {
    if (c < 0) throw InvalidArgument("estimate_theta: negative count");
    total += static_cast<double>(c);
  }
  const double denom = total + k * alpha;
  std::vector<double> theta(counts.size());
  for (std::size_t t = 0; t < counts.size(); ++t) {
    theta[t] = (static_cast<double>(counts[t]) + alpha) / denom;
  }
  return TopicDistribution(std::move(theta));
}

}  // namespace

TopicDistribution estimate_theta(std::span<const int> counts, double alpha) {
  return theta_from_counts(counts, alpha);
}

TopicDistribution estimate_theta(std::span<const double> counts, double alpha) {
  return theta_from_counts(counts, alpha);
}

std::vector<double> estimate_phi(std::span<const int> counts, double beta) {
  const double v = static_cast<double>(counts.size());
  double total = 0.0;
  for (int c : counts) {
    if (c < 0) throw InvalidArgument("estimate_phi: negative count");
    total += c;
  }
  const double denom = total + v * beta;
  std::vector<double> phi(counts.size());
  for (std::size_t w = 0; w < counts.size(); ++w) phi[w] = (counts[w] + beta) / denom;
  return phi;
}

std::vector<WordId> expand_tokens(const BowDocument& doc) {
  std::vector<WordId> tokens;
  tokens.reserve(doc.total_tokens);
  for (const auto& e : doc.entries) tokens.insert(tokens.end(), e.count, e.word);
  return tokens;
}

AssignmentState AssignmentState::from_assignments(const TupleCorpus& corpus, std::size_t num_topics,
                                                  std::vector<std::vector<std::vector<int>>> z) {
  if (z.size() != corpus.size()) throw InvalidArgument("assignments: tuple count mismatch");
  AssignmentState s;
  s.num_topics = num_topics;
  s.doc_topic_counts = MatrixI(corpus.size(), num_topics);
  for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
    s.word_topic_counts.emplace_back(corpus.vocabularies[l].size(), num_topics);
    s.topic_totals.emplace_back(num_topics, 0);
  }
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto& tuple = corpus.tuples[d];
    if (z[d].size() != corpus.num_channels()) throw InvalidArgument("assignments: channel count mismatch");
    for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
      const auto tokens = tuple.docs[l] ? expand_tokens(*tuple.docs[l]) : std::vector<WordId>{};
      if (z[d][l].size() != tokens.size()) throw InvalidArgument("assignments: token count mismatch");
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const int t = z[d][l][i];
        if (t < 0 || static_cast<std::size_t>(t) >= num_topics) {
          throw InvalidArgument("assignments: topic out of range");
        }
        ++s.doc_topic_counts(d, t);
        ++s.word_topic_counts[l](tokens[i], t);
        ++s.topic_totals[l][t];
      }
    }
  }
  s.z = std::move(z);
  return s;
}

bool AssignmentState::consistent_with(const TupleCorpus& corpus) const {
  try {
    const auto fresh = from_assignments(corpus, num_topics, z);
    return fresh.doc_topic_counts == doc_topic_counts &&
           fresh.word_topic_counts == word_topic_counts && fresh.topic_totals == topic_totals;
  } catch (const InvalidArgument&) {
    return false;
  }
}

std::optional<std::size_t> TopicModel::channel_index(std::string_view name) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t TopicModel::require_channel(std::string_view name) const {
  auto idx = channel_index(name);
  if (!idx) throw InvalidArgument("channel '" + std::string(name) + "' not in model");
  return *idx;
}

void TopicModel::validate() const {
  config.validate(channels.size());
  if (vocabularies.size() != channels.size() || phi.size() != channels.size()) {
    throw IntegrityError("model: per-channel arrays do not match channel count");
  }
  if (!lambda.empty() && lambda.size() != channels.size()) {
    throw IntegrityError("model: lambda does not match channel count");
  }
  for (std::size_t l = 0; l < channels.size(); ++l) {
    const auto& m = phi[l];
    if (m.rows() != config.num_topics || m.cols() != vocabularies[l].size()) {
      throw IntegrityError("model: phi shape mismatch for channel '" + channels[l] + "'");
    }
    for (std::size_t k = 0; k < m.rows(); ++k) {
      double sum = 0.0;
      for (double v : m.row(k)) {
        if (!(v > 0.0) || !std::isfinite(v)) {
          throw IntegrityError("model: phi has a non-positive entry in channel '" + channels[l] + "'");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw IntegrityError("model: phi row does not sum to 1 in channel '" + channels[l] + "'");
      }
    }
    if (!lambda.empty() && (lambda[l].rows() != m.rows() || lambda[l].cols() != m.cols())) {
      throw IntegrityError("model: lambda shape mismatch for channel '" + channels[l] + "'");
    }
  }
}

namespace {

void put_matrix(detail::BinaryWriter& w, const MatrixD& m) {
  w.put<std::uint64_t>(m.rows());
  w.put<std::uint64_t>(m.cols());
  w.put_vector(m.data());
}

MatrixD get_matrix(detail::BinaryReader& r) {
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  auto data = r.get_vector<double>();
  if (data.size() != rows * cols) r.fail("matrix size mismatch");
  MatrixD m(rows, cols);
  m.data() = std::move(data);
  return m;
}

}  // namespace

std::string serialize_model(const TopicModel& model) {
  detail::BinaryWriter w(kModelMagic, kModelFormatVersion);
  w.put<std::uint64_t>(model.config.num_topics);
  w.put(model.config.alpha);
  w.put_vector(model.config.beta);
  w.put(model.config.seed);
  w.put_string(model.provenance.backend);
  w.put<std::uint64_t>(model.provenance.metadata.size());
  for (const auto& [k, v] : model.provenance.metadata) {
    w.put_string(k);
    w.put_string(v);
  }
  w.put<std::uint64_t>(model.channels.size());
  for (std::size_t l = 0; l < model.channels.size(); ++l) {
    const auto& v = model.vocabularies[l];
    w.put_string(model.channels[l]);
    w.put<std::uint64_t>(v.size());
    for (const auto& word : v.words()) w.put_string(word);
    w.put_vector(v.collection_counts());
    w.put_vector(v.document_frequencies());
    put_matrix(w, model.phi[l]);
  }
  w.put<std::uint8_t>(model.lambda.empty() ? 0 : 1);
  for (const auto& m : model.lambda) put_matrix(w, m);
  return std::move(w).finish();
}

TopicModel deserialize_model(std::string_view bytes) {
  detail::BinaryReader r(bytes, kModelMagic, kModelFormatVersion, "model file");
  TopicModel model;
  model.config.num_topics = r.get<std::uint64_t>();
  model.config.alpha = r.get<double>();
  model.config.beta = r.get_vector<double>();
  model.config.seed = r.get<std::uint64_t>();
  model.provenance.backend = r.get_string();
  const auto num_meta = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < num_meta; ++i) {
    auto k = r.get_string();
    auto v = r.get_string();
    model.provenance.metadata.emplace_back(std::move(k), std::move(v));
  }
  const auto num_channels = r.get<std::uint64_t>();
  for (std::uint64_t l = 0; l < num_channels; ++l) {
    auto channel = r.get_string();
    const auto size = r.get<std::uint64_t>();
    std::vector<std::string> words;
    for (std::uint64_t i = 0; i < size; ++i) words.push_back(r.get_string());
    auto counts = r.get_vector<std::uint64_t>();
    auto dfs = r.get_vector<std::uint64_t>();
    model.channels.push_back(channel);
    model.vocabularies.emplace_back(std::move(channel), std::move(words), std::move(counts),
                                    std::move(dfs));
    model.phi.push_back(get_matrix(r));
  }
  if (r.get<std::uint8_t>() != 0) {
    for (std::uint64_t l = 0; l < num_channels; ++l) model.lambda.push_back(get_matrix(r));
  }
  r.expect_end();
  model.validate();
  return model;
}

void save_model(const TopicModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

TopicModel load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

}  // namespace mltm
