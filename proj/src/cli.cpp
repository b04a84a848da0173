#include "mltm/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mltm/audit.hpp"
#include "mltm/corpus.hpp"
#include "mltm/corpus_io.hpp"
#include "mltm/error.hpp"
#include "mltm/eval.hpp"
#include "mltm/fileutil.hpp"
#include "mltm/gibbs.hpp"
#include "mltm/model.hpp"
#include "mltm/parallel.hpp"
#include "mltm/synth.hpp"
#include "mltm/vb.hpp"

namespace mltm {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum class Kind { string, integer, real, boolean, strings, integers, reals };

struct Key {
  std::string name;
  Kind kind;
  Json fallback;  // null: unset unless given
  std::string help;
};

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::string: return "a string";
    case Kind::integer: return "a non-negative integer";
    case Kind::real: return "a number";
    case Kind::boolean: return "a boolean";
    case Kind::strings: return "a list of strings";
    case Kind::integers: return "a list of non-negative integers";
    case Kind::reals: return "a list of numbers";
  }
  return "a value";
}

std::string flag_name(const std::string& key) {
  std::string out = key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

Json scalar_from_text(const Key& key, Kind kind, const std::string& text) {
  const auto bad = [&] {
    return ConfigError("--" + flag_name(key.name) + " expects " + kind_name(key.kind) + ", got '" + text + "'");
  };
  switch (kind) {
    case Kind::integer: {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size() || text.empty()) throw bad();
      return v;
    }
    case Kind::real: {
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size() || std::isnan(v)) throw bad();
      return v;
    }
    case Kind::boolean:
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw bad();
    default:
      return text;
  }
}

Kind element_kind(Kind kind) {
  switch (kind) {
    case Kind::strings: return Kind::string;
    case Kind::integers: return Kind::integer;
    case Kind::reals: return Kind::real;
    default: return kind;
  }
}

bool is_list(Kind kind) { return kind == Kind::strings || kind == Kind::integers || kind == Kind::reals; }

Json value_from_text(const Key& key, const std::string& text) {
  if (!is_list(key.kind)) return scalar_from_text(key, key.kind, text);
  Json arr = Json::array();
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto item = trim(std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (item.empty()) throw ConfigError("--" + flag_name(key.name) + " has an empty list item in '" + text + "'");
    arr.push_back(scalar_from_text(key, element_kind(key.kind), item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return arr;
}

bool scalar_matches(Kind kind, const Json& v) {
  switch (kind) {
    case Kind::string: return v.is_string();
    case Kind::integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::real: return v.is_number();
    case Kind::boolean: return v.is_boolean();
    default: return false;
  }
}

Json value_from_config(const Key& key, const Json& v) {
  const auto bad = [&] { return ConfigError("config key '" + key.name + "' must be " + kind_name(key.kind)); };
  if (!is_list(key.kind)) {
    if (!scalar_matches(key.kind, v)) throw bad();
    return key.kind == Kind::real ? Json(v.get<double>()) : v;
  }
  const auto elem = element_kind(key.kind);
  Json items = v.is_array() ? v : Json::array({v});
  Json out = Json::array();
  for (const auto& x : items) {
    if (!scalar_matches(elem, x)) throw bad();
    out.push_back(elem == Kind::real ? Json(x.get<double>()) : x);
  }
  return out;
}

// Resolved settings for one subcommand run.
class Params {
 public:
  explicit Params(Json values) : values_(std::move(values)) {}

  bool has(const std::string& name) const { return !values_.at(name).is_null(); }
  const Json& raw() const { return values_; }

  const Json& require(const std::string& name) const {
    const auto& v = values_.at(name);
    if (v.is_null()) throw ConfigError("missing required key '" + name + "'");
    return v;
  }
  std::string str(const std::string& name) const { return require(name).get<std::string>(); }
  std::uint64_t u64(const std::string& name) const { return require(name).get<std::uint64_t>(); }
  std::size_t size(const std::string& name) const { return static_cast<std::size_t>(u64(name)); }
  double real(const std::string& name) const { return require(name).get<double>(); }
  bool flag(const std::string& name) const { return require(name).get<bool>(); }
  template <typename T>
  std::vector<T> list(const std::string& name) const {
    return require(name).get<std::vector<T>>();
  }

 private:
  Json values_;
};

// Files produced by a run; written only once the whole run has succeeded.
class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string contents) { files_.emplace_back(name, std::move(contents)); }

  void commit() const {
    fs::create_directories(dir_);
    for (const auto& [name, contents] : files_) write_file_atomic(dir_ / name, contents);
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Command {
  std::string name;
  std::string description;
  std::vector<Key> keys;
  std::function<void(const Params&, Artifacts&, std::ostream&)> run;
};

std::vector<Key> common_keys() {
  return {
      {"out", Kind::string, ".", "output directory"},
      {"workers", Kind::integer, static_cast<std::uint64_t>(default_workers()), "worker threads"},
  };
}

std::vector<Key> inference_keys() {
  return {
      {"backend", Kind::string, nullptr, "inference backend gibbs|vb (default: the model's)"},
      {"seed", Kind::integer, 0, "random seed"},
      {"fold_in_iterations", Kind::integer, 100, "Gibbs fold-in sweeps"},
      {"fold_in_burn_in", Kind::integer, 50, "Gibbs fold-in sweeps discarded before averaging"},
      {"local_iters", Kind::integer, 100, "VB per-document iteration cap"},
      {"local_tol", Kind::real, 1e-3, "VB per-document convergence threshold"},
  };
}

std::vector<Key> training_keys() {
  return {
      {"alpha", Kind::real, nullptr, "symmetric theta prior (default 50/K)"},
      {"beta", Kind::reals, nullptr, "topic-word prior, one value or one per channel (default 0.01)"},
      {"iterations", Kind::integer, 1000, "Gibbs sweeps"},
      {"burn_in", Kind::integer, 800, "Gibbs sweeps before phi samples are collected"},
      {"sample_lag", Kind::integer, 10, "sweeps between collected phi samples"},
      {"mode", Kind::string, "batch", "VB mode batch|online"},
      {"passes", Kind::integer, 0, "VB passes over the corpus (0: mode default)"},
      {"batch_size", Kind::integer, 256, "online VB minibatch size"},
      {"kappa", Kind::real, 0.7, "online VB forgetting rate"},
      {"tau0", Kind::real, 1024.0, "online VB delay"},
  };
}

template <typename... Lists>
std::vector<Key> concat(std::vector<Key> first, Lists... rest) {
  (first.insert(first.end(), rest.begin(), rest.end()), ...);
  return first;
}

GibbsConfig gibbs_config(const Params& p) {
  GibbsConfig g;
  if (p.raw().contains("iterations")) {
    g.iterations = p.size("iterations");
    g.burn_in = p.size("burn_in");
    g.sample_lag = p.size("sample_lag");
  }
  if (p.raw().contains("fold_in_iterations")) {
    g.fold_in_iterations = p.size("fold_in_iterations");
    g.fold_in_burn_in = p.size("fold_in_burn_in");
  }
  g.validate();
  return g;
}

VbConfig vb_config(const Params& p, std::size_t workers) {
  VbConfig v;
  if (p.raw().contains("mode")) {
    v.mode = parse_vb_mode(p.str("mode"));
    v.passes = p.size("passes");
    v.batch_size = p.size("batch_size");
    v.kappa = p.real("kappa");
    v.tau0 = p.real("tau0");
  }
  v.local_max_iters = p.size("local_iters");
  v.local_convergence = p.real("local_tol");
  v.workers = workers;
  v.validate();
  return v;
}

std::size_t workers_of(const Params& p) { return std::max<std::size_t>(1, p.size("workers")); }

InferenceOptions inference_options(const Params& p, const TopicModel& model) {
  InferenceOptions o;
  o.backend = parse_backend(p.has("backend") ? p.str("backend") : model.provenance.backend);
  o.workers = workers_of(p);
  o.gibbs = gibbs_config(p);
  o.vb = vb_config(p, 1);
  o.seed = p.u64("seed");
  return o;
}

std::vector<double> beta_for(const Params& p, std::size_t channels) {
  if (!p.has("beta")) return std::vector<double>(channels, ModelConfig::kDefaultBeta);
  auto beta = p.list<double>("beta");
  if (beta.size() == 1) return std::vector<double>(channels, beta[0]);
  if (beta.size() != channels) {
    throw ConfigError("beta has " + std::to_string(beta.size()) + " values for " + std::to_string(channels) +
                      " channels");
  }
  return beta;
}

std::set<std::string> read_stopwords(const fs::path& path) {
  std::set<std::string> words;
  const auto text = read_file(path);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    auto line = trim(std::string_view(text).substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] != '#') words.insert(line);
    start = end + 1;
  }
  return words;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void add_vocabularies(Artifacts& artifacts, const TupleCorpus& corpus) {
  for (const auto& vocab : corpus.vocabularies) {
    artifacts.add("vocab_" + vocab.channel() + ".tsv", format_vocabulary(vocab));
  }
}

void run_ingest(const Params& p, Artifacts& artifacts, std::ostream& out) {
  const auto channels = p.list<std::string>("channels");
  if (channels.empty()) throw ConfigError("channels must not be empty");
  if (p.has("manifest") == p.has("dirs")) throw ConfigError("exactly one of 'manifest' or 'dirs' is required");
  FilterConfig filter;
  filter.min_frequency = p.size("min_freq");
  filter.min_token_length = p.size("min_len");
  filter.top_frequent_cutoff = p.size("top_stop");
  filter.drop_numeric = p.flag("drop_numeric");
  if (p.has("stopwords")) filter.stopwords = read_stopwords(p.str("stopwords"));
  filter.validate();
  const auto policy = parse_missing_policy(p.str("policy"));
  const double test_fraction = p.real("test_fraction");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");

  const auto articles = p.has("manifest") ? read_manifest(p.str("manifest"))
                                          : read_channel_directories(p.str("dirs"), channels);
  const auto aligned = align_tuples(articles, channels, policy, filter, p.str("query_channel"));
  const auto [train, test] = split_corpus(aligned.corpus, test_fraction, p.u64("seed"));

  artifacts.add("train.corpus", serialize_corpus(train));
  artifacts.add("test.corpus", serialize_corpus(test));
  add_vocabularies(artifacts, aligned.corpus);
  std::string excluded;
  for (const auto& id : aligned.excluded_ids) excluded += id + "\n";
  artifacts.add("excluded.txt", excluded);

  std::string stats = "channel\tvocab_size\tdistinct_tokens\tremoved_stopwords\tremoved_top_frequent\tremoved_rare\t"
                      "train_tokens\ttest_tokens\n";
  for (std::size_t l = 0; l < aligned.corpus.num_channels(); ++l) {
    const auto& v = aligned.corpus.vocabularies[l];
    const auto& fs = v.filter_stats;
    stats += v.channel() + "\t" + std::to_string(v.size()) + "\t" + std::to_string(fs.distinct_tokens) + "\t" +
             std::to_string(fs.removed_stopwords) + "\t" + std::to_string(fs.removed_top_frequent) + "\t" +
             std::to_string(fs.removed_rare) + "\t" + std::to_string(train.channel_tokens(l)) + "\t" +
             std::to_string(test.channel_tokens(l)) + "\n";
  }
  artifacts.add("ingest_stats.tsv", stats);
  out << "ingested " << aligned.corpus.size() << " tuples (" << train.size() << " train, " << test.size()
      << " test); excluded " << aligned.excluded_ids.size() << "\n";
}

std::string format_top_words(const TopicModel& model, std::size_t top_n) {
  std::string out = "topic\tchannel\trank\tword\tprobability\n";
  for (std::size_t l = 0; l < model.channels.size(); ++l) {
    const auto& phi = model.phi[l];
    for (std::size_t k = 0; k < phi.rows(); ++k) {
      std::vector<std::size_t> ids(phi.cols());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
      const auto n = std::min(top_n, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                        [&](std::size_t a, std::size_t b) {
                          if (phi(k, a) != phi(k, b)) return phi(k, a) > phi(k, b);
                          return a < b;
                        });
      for (std::size_t r = 0; r < n; ++r) {
        out += std::to_string(k) + "\t" + model.channels[l] + "\t" + std::to_string(r + 1) + "\t" +
               model.vocabularies[l].word_of(static_cast<WordId>(ids[r])) + "\t" + format_double(phi(k, ids[r])) +
               "\n";
      }
    }
  }
  return out;
}

void run_train(const Params& p, Artifacts& artifacts, std::ostream& out) {
  const auto corpus = load_corpus(p.str("corpus"));
  const auto backend = parse_backend(p.str("backend"));
  ModelConfig cfg;
  cfg.num_topics = p.size("topics");
  if (cfg.num_topics == 0) throw ConfigError("topics must be at least 1");
  cfg.alpha = p.has("alpha") ? p.real("alpha") : ModelConfig::default_alpha(cfg.num_topics);
  cfg.beta = beta_for(p, corpus.num_channels());
  cfg.seed = p.u64("seed");
  cfg.validate(corpus.num_channels());

  TopicModel model;
  if (backend == Backend::gibbs) {
    const auto g = gibbs_config(p);
    std::vector<SweepRecord> trace;
    model = train_gibbs(corpus, cfg, g, &trace);
    artifacts.add("trace.tsv", format_sweep_trace(trace));
  } else {
    const auto v = vb_config(p, workers_of(p));
    std::vector<PassRecord> trace;
    model = train_vb(corpus, cfg, v, &trace);
    artifacts.add("trace.tsv", format_pass_trace(trace));
  }
  artifacts.add("model.bin", serialize_model(model));
  artifacts.add("top_words.tsv", format_top_words(model, 10));
  out << "trained " << to_string(backend) << " model with K=" << cfg.num_topics << " on " << corpus.size()
      << " tuples\n";
}

void run_infer(const Params& p, Artifacts& artifacts, std::ostream& out) {
  const auto model = load_model(p.str("model"));
  const auto input = load_corpus(p.str("input"));
  const auto options = inference_options(p, model);
  const auto aligned = align_to_model(model, input);
  const auto thetas = infer_thetas(model, aligned, options);
  std::string text = "article_id\tchannel";
  for (std::size_t k = 0; k < model.num_topics(); ++k) text += "\ttheta_" + std::to_string(k);
  text += "\n";
  std::size_t rows = 0;
  for (std::size_t d = 0; d < thetas.size(); ++d) {
    for (std::size_t l = 0; l < model.channels.size(); ++l) {
      if (!thetas[d][l]) continue;
      text += aligned.tuples[d].article_id + "\t" + model.channels[l];
      for (double v : thetas[d][l]->values()) text += "\t" + format_double(v);
      text += "\n";
      ++rows;
    }
  }
  artifacts.add("theta.tsv", text);
  out << "inferred " << rows << " topic distributions\n";
}

void run_eval(const Params& p, Artifacts& artifacts, std::ostream& out) {
  const auto model = load_model(p.str("model"));
  const auto test = load_corpus(p.str("test"));
  EvalOptions options;
  options.metric = parse_metric(p.str("metric"));
  options.query_channel = p.str("query_channel");
  options.inference = inference_options(p, model);
  const auto rows = evaluate_representations(model, test, options);
  artifacts.add("report.tsv", format_report_tsv(rows));
  artifacts.add("report.jsonl", format_report_jsonl(rows));
  out << format_report_tsv(rows);
}

void run_sweep(const Params& p, Artifacts& artifacts, std::ostream& out) {
  const auto train = load_corpus(p.str("train"));
  const auto test = load_corpus(p.str("test"));
  SweepOptions o;
  o.topics = p.list<std::size_t>("topics_list");
  o.fractions = p.list<double>("fractions");
  o.seeds = p.list<std::uint64_t>("seeds");
  o.backend = parse_backend(p.has("backend") ? p.str("backend") : "gibbs");
  if (p.has("alpha")) o.alpha = p.real("alpha");
  o.beta = beta_for(p, train.num_channels());
  o.gibbs = gibbs_config(p);
  o.vb = vb_config(p, 1);
  o.metric = parse_metric(p.str("metric"));
  o.query_channel = p.str("query_channel");
  o.workers = workers_of(p);
  if (std::find(o.topics.begin(), o.topics.end(), 0u) != o.topics.end()) {
    throw ConfigError("topics_list entries must be at least 1");
  }
  const auto result = sweep(train, test, o);
  if (result.rows.empty() && !result.errors.empty()) {
    throw Error("every sweep cell failed; first error: " + result.errors.front().message);
  }
  artifacts.add("report.tsv", format_report_tsv(result.rows));
  artifacts.add("report.jsonl", format_report_jsonl(result.rows));
  for (const auto& [name, contents] : format_report_series(result.rows)) artifacts.add(name, contents);
  if (!result.errors.empty()) {
    std::string errors = "K\tfraction\tseed\tmessage\n";
    for (const auto& e : result.errors) {
      errors += std::to_string(e.num_topics) + "\t" + format_double(e.fraction) + "\t" + std::to_string(e.seed) +
                "\t" + e.message + "\n";
    }
    artifacts.add("sweep_errors.tsv", errors);
  }
  out << "sweep: " << result.rows.size() << " rows, " << result.errors.size() << " failed cells\n";
}

void run_audit(const Params& p, Artifacts& artifacts, std::ostream& out) {
  const auto model = load_model(p.str("model"));
  const auto test = load_corpus(p.str("test"));
  AuditOptions o;
  o.channel = p.str("channel");
  if (p.has("terms_channel")) o.terms_channel = p.str("terms_channel");
  o.query_channel = p.str("query_channel");
  o.threshold = p.real("threshold");
  o.inference = inference_options(p, model);
  const auto divergences = channel_divergences(model, test, o);
  if (p.has("percentile")) {
    if (divergences.empty()) throw Error("audit: no article carries both the query and audited channels");
    std::vector<double> values;
    for (const auto& d : divergences) values.push_back(d.divergence);
    const double pct = p.real("percentile");
    if (!(pct >= 0.0 && pct <= 100.0)) throw ConfigError("percentile must lie in [0, 100]");
    o.threshold = percentile(values, pct);
  }
  const auto flags = flags_from_divergences(divergences, test, o, o.threshold);
  const auto summary = summarize_flags(flags, p.size("top_n"));

  std::string div = "article_id\tjs\trank_of_truth\n";
  for (const auto& d : divergences) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", d.divergence);
    div += d.article_id + "\t" + buf + "\t" + std::to_string(d.rank_of_truth) + "\n";
  }
  artifacts.add("divergences.tsv", div);
  artifacts.add("flags.tsv", format_flags(flags));
  artifacts.add("summary.tsv", format_summary(summary));
  out << "audited " << divergences.size() << " articles at threshold " << format_double(o.threshold) << "; flagged "
      << flags.size() << "\n";
}

SynthConfig parse_synth_spec(const Json& j) {
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  static const std::set<std::string> known{"num_topics", "channels", "vocab_sizes", "num_docs",
                                           "tokens_per_doc", "poisson_lengths", "alpha", "beta",
                                           "seed", "corruption"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ConfigError("unknown synth spec key '" + k + "'");
  }
  SynthConfig c;
  try {
    if (j.contains("num_topics")) c.num_topics = j.at("num_topics").get<std::size_t>();
    c.channels = j.at("channels").get<std::vector<std::string>>();
    c.vocab_sizes = j.at("vocab_sizes").get<std::vector<std::size_t>>();
    if (j.contains("num_docs")) c.num_docs = j.at("num_docs").get<std::size_t>();
    if (j.contains("tokens_per_doc")) c.tokens_per_doc = j.at("tokens_per_doc").get<std::size_t>();
    if (j.contains("poisson_lengths")) c.poisson_lengths = j.at("poisson_lengths").get<bool>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) {
      const auto& b = j.at("beta");
      c.beta = b.is_array() ? b.get<std::vector<double>>() : std::vector<double>(c.channels.size(), b.get<double>());
    } else {
      c.beta.assign(c.channels.size(), ModelConfig::kDefaultBeta);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("corruption")) {
      for (const auto& item : j.at("corruption")) {
        for (const auto& [k, v] : item.items()) {
          if (k != "channel" && k != "deletion_rate" && k != "replacement_rate") {
            throw ConfigError("unknown corruption key '" + k + "'");
          }
        }
        ChannelCorruption cc;
        cc.channel = item.at("channel").get<std::string>();
        cc.deletion_rate = item.value("deletion_rate", 0.0);
        cc.replacement_rate = item.value("replacement_rate", 0.0);
        c.corruption.push_back(cc);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synth spec: ") + e.what());
  }
  c.validate();
  return c;
}

void run_synth(const Params& p, Artifacts& artifacts, std::ostream& out) {
  Json spec;
  try {
    spec = Json::parse(read_file(p.str("spec")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synth spec is not valid JSON: " + std::string(e.what()));
  }
  auto cfg = parse_synth_spec(spec);
  if (p.has("seed")) cfg.seed = p.u64("seed");
  const double test_fraction = p.real("test_fraction");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  const auto synth = generate_pltm_corpus(cfg);
  const auto [train, test] = split_corpus(synth.corpus, test_fraction, cfg.seed);
  std::vector<std::string> ids;
  for (const auto& t : synth.corpus.tuples) ids.push_back(t.article_id);
  artifacts.add("train.corpus", serialize_corpus(train));
  artifacts.add("test.corpus", serialize_corpus(test));
  artifacts.add("truth.tsv", format_truth(synth.truth, synth.corpus.channels, ids));
  add_vocabularies(artifacts, synth.corpus);
  out << "generated " << synth.corpus.size() << " tuples (" << train.size() << " train, " << test.size()
      << " test)\n";
}

std::vector<Command> commands() {
  std::vector<Command> cmds;
  cmds.push_back({"ingest", "Build vocabularies and bag-of-words train/test corpora from raw text",
                  concat(std::vector<Key>{
                             {"manifest", Kind::string, nullptr, "manifest file (.tsv or .jsonl)"},
                             {"dirs", Kind::string, nullptr, "root with one directory of <article_id>.txt per channel"},
                             {"channels", Kind::strings, nullptr, "comma-separated channel list"},
                             {"query_channel", Kind::string, "full", "channel every tuple must carry"},
                             {"min_freq", Kind::integer, 10, "minimum collection frequency"},
                             {"min_len", Kind::integer, 4, "minimum token length"},
                             {"top_stop", Kind::integer, 100, "most frequent tokens treated as stopwords"},
                             {"stopwords", Kind::string, nullptr, "file with one stopword per line"},
                             {"drop_numeric", Kind::boolean, true, "drop purely numeric tokens"},
                             {"policy", Kind::string, "drop", "missing-channel policy drop|allow-missing"},
                             {"test_fraction", Kind::real, 0.1, "share of tuples held out for testing"},
                             {"seed", Kind::integer, 0, "split seed"},
                         },
                         common_keys()),
                  run_ingest});
  cmds.push_back({"train", "Train a multilingual topic model",
                  concat(std::vector<Key>{
                             {"corpus", Kind::string, nullptr, "training corpus file"},
                             {"backend", Kind::string, "gibbs", "gibbs|vb"},
                             {"topics", Kind::integer, 100, "number of topics K"},
                             {"seed", Kind::integer, 0, "random seed"},
                         },
                         training_keys(),
                         std::vector<Key>{{"local_iters", Kind::integer, 100, "VB per-document iteration cap"},
                                          {"local_tol", Kind::real, 1e-3, "VB per-document convergence threshold"}},
                         common_keys()),
                  run_train});
  cmds.push_back({"infer", "Infer per-channel topic distributions for a corpus",
                  concat(std::vector<Key>{{"model", Kind::string, nullptr, "model file"},
                                          {"input", Kind::string, nullptr, "corpus file"}},
                         inference_keys(), common_keys()),
                  run_infer});
  cmds.push_back({"eval", "Cross-representation retrieval precision against full text",
                  concat(std::vector<Key>{{"model", Kind::string, nullptr, "model file"},
                                          {"test", Kind::string, nullptr, "test corpus file"},
                                          {"metric", Kind::string, "js", "js|kl|hellinger"},
                                          {"query_channel", Kind::string, "full", "query channel"}},
                         inference_keys(), common_keys()),
                  run_eval});
  cmds.push_back({"sweep", "Train and evaluate over topic counts, training fractions and seeds",
                  concat(std::vector<Key>{{"train", Kind::string, nullptr, "training corpus file"},
                                          {"test", Kind::string, nullptr, "test corpus file"},
                                          {"topics_list", Kind::integers, Json::array({50, 100, 500}), "topic counts"},
                                          {"fractions", Kind::reals, Json::array({1.0}), "training fractions"},
                                          {"seeds", Kind::integers, Json::array({0}), "seeds"},
                                          {"metric", Kind::string, "js", "js|kl|hellinger"},
                                          {"query_channel", Kind::string, "full", "query channel"}},
                         training_keys(), inference_keys(), common_keys()),
                  run_sweep});
  std::erase_if(cmds.back().keys, [](const Key& k) { return k.name == "seed"; });
  cmds.push_back({"audit", "Flag articles whose channel diverges from full text",
                  concat(std::vector<Key>{
                             {"model", Kind::string, nullptr, "model file"},
                             {"test", Kind::string, nullptr, "corpus file to audit"},
                             {"channel", Kind::string, nullptr, "audited channel"},
                             {"terms_channel", Kind::string, nullptr, "channel whose terms are reported (default: channel)"},
                             {"query_channel", Kind::string, "full", "reference channel"},
                             {"threshold", Kind::real, 0.01, "JS threshold"},
                             {"percentile", Kind::real, nullptr, "use this percentile of the JS values as threshold"},
                             {"top_n", Kind::integer, 20, "terms in the summary"},
                         },
                         inference_keys(), common_keys()),
                  run_audit});
  cmds.push_back({"synth", "Sample a synthetic corpus with ground truth",
                  concat(std::vector<Key>{{"spec", Kind::string, nullptr, "JSON generator spec"},
                                          {"seed", Kind::integer, nullptr, "overrides the spec seed"},
                                          {"test_fraction", Kind::real, 0.1, "share of tuples held out"}},
                         common_keys()),
                  run_synth});
  return cmds;
}

// Keys appearing twice (e.g. seed in sweep) keep their first definition.
std::vector<Key> unique_keys(const std::vector<Key>& keys) {
  std::vector<Key> out;
  std::set<std::string> seen;
  for (const auto& k : keys) {
    if (seen.insert(k.name).second) out.push_back(k);
  }
  return out;
}

Json resolve(const std::vector<Key>& keys, const std::string& config_path,
             const std::map<std::string, std::string>& given) {
  Json file = Json::object();
  if (!config_path.empty()) {
    try {
      file = Json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [name, v] : file.items()) {
      const bool known = std::any_of(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; });
      if (!known) throw ConfigError("unknown config key '" + name + "'");
    }
  }
  Json resolved = Json::object();
  for (const auto& key : keys) {
    Json v = key.fallback;
    if (file.contains(key.name) && !file.at(key.name).is_null()) v = value_from_config(key, file.at(key.name));
    if (auto it = given.find(key.name); it != given.end()) v = value_from_text(key, it->second);
    resolved[key.name] = v;
  }
  return resolved;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const VersionError*>(&e)) return "version";
  if (dynamic_cast<const IntegrityError*>(&e)) return "integrity";
  if (dynamic_cast<const EmptyCorpusError*>(&e)) return "empty_corpus";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
  return "runtime";
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto cmds = commands();
  CLI::App app{"Multilingual topic model toolkit for comparing document representations"};
  app.require_subcommand(1);
  std::string config_path;
  // Flag text per subcommand and key; std::map keeps the references stable.
  std::map<std::string, std::map<std::string, std::string>> flag_text;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.description);
    sub->add_option("--config", config_path, "JSON file of settings; flags take precedence");
    for (const auto& key : unique_keys(cmd.keys)) {
      std::string help = key.help;
      if (!key.fallback.is_null()) help += " [" + (key.fallback.is_string() ? key.fallback.get<std::string>() : key.fallback.dump()) + "]";
      sub->add_option("--" + flag_name(key.name), flag_text[cmd.name][key.name], help);
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "config", e.what());
    return 2;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      const auto keys = unique_keys(cmd->keys);
      std::map<std::string, std::string> given;
      for (const auto& key : keys) {
        if (sub->get_option("--" + flag_name(key.name))->count() > 0) given[key.name] = flag_text[cmd->name][key.name];
      }
      const Params params(resolve(keys, config_path, given));
      Artifacts artifacts(params.str("out"));
      cmd->run(params, artifacts, out);
      artifacts.add("resolved_config.json", params.raw().dump(2) + "\n");
      artifacts.commit();
      return 0;
    } catch (const ConfigError& e) {
      report_error(err, "config", e.what());
      return 2;
    } catch (const std::exception& e) {
      report_error(err, error_kind(e), e.what());
      return 1;
    }
  }
  report_error(err, "config", "no subcommand given");
  return 2;
}

}  // namespace mltm
