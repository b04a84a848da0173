#include "mltm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include "json.hpp"
#include <set>
#include <tuple>

#include "mltm/error.hpp"
#include "mltm/parallel.hpp"
#include "mltm/rng.hpp"

namespace mltm {

Backend parse_backend(std::string_view text) {
  if (text == "gibbs") return Backend::gibbs;
  if (text == "vb") return Backend::vb;
  throw ConfigError("unknown backend '" + std::string(text) + "' (expected gibbs or vb)");
}

std::string_view to_string(Backend backend) { return backend == Backend::gibbs ? "gibbs" : "vb"; }

ThetaTable infer_thetas(const TopicModel& model, const TupleCorpus& test,
                        const InferenceOptions& options) {
  if (test.channels != model.channels) {
    throw InvalidArgument("infer_thetas: test corpus channels differ from model channels");
  }
  std::optional<VbInferencer> vb;
  if (options.backend == Backend::vb) vb.emplace(model, options.vb);
  ThetaTable thetas(test.size());
  parallel_for(test.size(), options.workers, [&](std::size_t d) {
    const auto& tuple = test.tuples[d];
    auto& row = thetas[d];
    row.resize(test.num_channels());
    for (std::size_t l = 0; l < test.num_channels(); ++l) {
      if (!tuple.docs[l]) continue;
      if (vb) {
        row[l] = vb->infer(*tuple.docs[l], l);
      } else {
        row[l] = fold_in_gibbs(*tuple.docs[l], model, l, options.gibbs,
                               derive_seed(derive_seed(options.seed, d), l));
      }
    }
  });
  return thetas;
}

std::vector<RankedCandidate> rank_candidates(std::span<const double> query,
                                             std::span<const TopicDistribution> candidates,
                                             Metric metric) {
  if (candidates.empty()) throw InvalidArgument("rank_candidates: no candidates");
  std::vector<RankedCandidate> ranked(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked[i] = {i, divergence(metric, query, candidates[i].values())};
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    return a.score < b.score;
  });
  return ranked;
}

double precision_at_1(const RetrievalRun& run, std::span<const std::optional<std::size_t>> truth) {
  if (truth.size() != run.rankings.size()) {
    throw InvalidArgument("precision_at_1: " + std::to_string(run.rankings.size()) + " queries but " +
                          std::to_string(truth.size()) + " truth entries");
  }
  if (run.rankings.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < truth.size(); ++q) {
    const auto& ranking = run.rankings[q];
    if (truth[q] && !ranking.empty() && ranking.front().index == *truth[q]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(run.rankings.size());
}

std::size_t count_top_ties(const RetrievalRun& run) {
  std::size_t ties = 0;
  for (const auto& ranking : run.rankings) {
    if (ranking.size() >= 2 && ranking[0].score == ranking[1].score) ++ties;
  }
  return ties;
}

std::vector<ReportRow> evaluate_thetas(const ThetaTable& thetas, const std::vector<std::string>& channels,
                                       std::size_t query_channel, Metric metric, std::size_t workers) {
  for (std::size_t d = 0; d < thetas.size(); ++d) {
    if (!thetas[d].at(query_channel)) {
      throw InvalidArgument("evaluate: test tuple " + std::to_string(d) + " lacks the query channel '" +
                            channels[query_channel] + "'");
    }
  }
  std::vector<ReportRow> rows;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    if (l == query_channel) continue;
    std::vector<TopicDistribution> candidates;
    std::vector<std::optional<std::size_t>> truth(thetas.size());
    for (std::size_t d = 0; d < thetas.size(); ++d) {
      if (thetas[d][l]) {
        truth[d] = candidates.size();
        candidates.push_back(*thetas[d][l]);
      }
    }
    RetrievalRun run{channels[query_channel], channels[l], metric, {}};
    run.rankings.resize(thetas.size());
    if (!candidates.empty()) {
      parallel_for(thetas.size(), workers, [&](std::size_t q) {
        run.rankings[q] = rank_candidates(thetas[q][query_channel]->values(), candidates, metric);
      });
    }
    ReportRow row;
    row.channel = channels[l];
    row.p_at_1 = precision_at_1(run, truth);
    row.num_queries = thetas.size();
    row.num_ties = count_top_ties(run);
    row.num_missing = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), std::nullopt));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReportRow> evaluate_thetas(const ThetaTable& thetas, const std::vector<std::string>& channels,
                                       std::size_t query_channel, Metric metric) {
  return evaluate_thetas(thetas, channels, query_channel, metric, 1);
}

TupleCorpus align_to_model(const TopicModel& model, const TupleCorpus& test) {
  for (const auto& c : test.channels) {
    if (!model.channel_index(c)) {
      throw InvalidArgument("test channel '" + c + "' is not in the model");
    }
  }
  const auto encoded = reencode_corpus(test, model.channels, model.vocabularies);
  TupleCorpus aligned;
  aligned.channels = model.channels;
  aligned.vocabularies = model.vocabularies;
  aligned.tuples.reserve(encoded.size());
  for (const auto& t : encoded.tuples) {
    ArticleTuple out{t.article_id, std::vector<std::optional<BowDocument>>(model.channels.size())};
    for (std::size_t i = 0; i < encoded.channels.size(); ++i) {
      out.docs[model.require_channel(encoded.channels[i])] = t.docs[i];
    }
    aligned.tuples.push_back(std::move(out));
  }
  return aligned;
}

std::vector<ReportRow> evaluate_representations(const TopicModel& model, const TupleCorpus& test,
                                                const EvalOptions& options) {
  const auto query = model.require_channel(options.query_channel);
  if (!test.channel_index(options.query_channel)) {
    throw InvalidArgument("evaluate: test corpus lacks the query channel '" + options.query_channel + "'");
  }
  const auto thetas = infer_thetas(model, align_to_model(model, test), options.inference);
  auto rows = evaluate_thetas(thetas, model.channels, query, options.metric, options.inference.workers);
  // Channels the test corpus does not carry get no experiment.
  std::erase_if(rows, [&](const ReportRow& r) { return !test.channel_index(r.channel); });
  for (auto& r : rows) {
    r.num_topics = model.num_topics();
    r.fraction = options.fraction;
    r.backend = std::string(to_string(options.inference.backend));
    r.seed = options.inference.seed;
  }
  return rows;
}

std::vector<std::size_t> training_subset(std::size_t train_size, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("training fractions must lie in (0, 1]");
  auto perm = seeded_permutation(train_size, derive_seed(seed, 77));
  auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train_size)));
  n = std::clamp<std::size_t>(n, 1, train_size);
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  return perm;
}

SweepResult sweep(const TupleCorpus& train, const TupleCorpus& test, const SweepOptions& options) {
  if (options.topics.empty() || options.fractions.empty() || options.seeds.empty()) {
    throw ConfigError("sweep: topic, fraction and seed lists must be non-empty");
  }
  for (double f : options.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep: fractions must lie in (0, 1]");
  }
  struct Cell {
    std::size_t k;
    double fraction;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto k : options.topics) {
    for (auto f : options.fractions) {
      for (auto s : options.seeds) cells.push_back({k, f, s});
    }
  }
  std::vector<std::vector<ReportRow>> cell_rows(cells.size());
  std::vector<std::optional<std::string>> cell_errors(cells.size());
  const bool parallel_cells = cells.size() > 1 && options.workers > 1;
  const std::size_t inner_workers = parallel_cells ? 1 : options.workers;

  parallel_for(cells.size(), parallel_cells ? options.workers : 1, [&](std::size_t i) {
    const auto& cell = cells[i];
    try {
      const auto subset_ids = training_subset(train.size(), cell.fraction, cell.seed);
      const auto part = subset(train, subset_ids);
      ModelConfig cfg;
      cfg.num_topics = cell.k;
      cfg.alpha = options.alpha.value_or(ModelConfig::default_alpha(cell.k));
      cfg.beta = options.beta.empty() ? std::vector<double>(train.num_channels(), ModelConfig::kDefaultBeta)
                                      : options.beta;
      cfg.seed = cell.seed;
      auto vb = options.vb;
      vb.workers = inner_workers;
      const auto model = options.backend == Backend::gibbs ? train_gibbs(part, cfg, options.gibbs)
                                                           : train_vb(part, cfg, vb);
      EvalOptions eval;
      eval.metric = options.metric;
      eval.query_channel = options.query_channel;
      eval.inference = {options.backend, options.gibbs, vb, cell.seed, inner_workers};
      eval.fraction = cell.fraction;
      cell_rows[i] = evaluate_representations(model, test, eval);
    } catch (const std::exception& e) {
      cell_errors[i] = e.what();
    }
  });

  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cell_errors[i]) {
      result.errors.push_back({cells[i].k, cells[i].fraction, cells[i].seed, *cell_errors[i]});
      continue;
    }
    for (auto& r : cell_rows[i]) result.rows.push_back(std::move(r));
  }
  return result;
}

namespace {

std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", f);
  return buf;
}

std::string format_score(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

}  // namespace

std::string format_report_tsv(const std::vector<ReportRow>& rows) {
  std::string out = "channel\tK\tfraction\tbackend\tseed\tP@1\tnum_queries\tnum_ties\n";
  for (const auto& r : rows) {
    out += r.channel + "\t" + std::to_string(r.num_topics) + "\t" + format_fraction(r.fraction) + "\t" +
           r.backend + "\t" + std::to_string(r.seed) + "\t" + format_score(r.p_at_1) + "\t" +
           std::to_string(r.num_queries) + "\t" + std::to_string(r.num_ties) + "\n";
  }
  return out;
}

std::string format_report_jsonl(const std::vector<ReportRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["channel"] = r.channel;
    j["K"] = r.num_topics;
    j["fraction"] = r.fraction;
    j["backend"] = r.backend;
    j["seed"] = r.seed;
    j["p_at_1"] = r.p_at_1;
    j["num_queries"] = r.num_queries;
    j["num_ties"] = r.num_ties;
    j["num_missing"] = r.num_missing;
    out += j.dump() + "\n";
  }
  return out;
}

std::map<std::string, std::string> format_report_series(const std::vector<ReportRow>& rows) {
  // (channel, K, fraction) -> (sum, count)
  std::map<std::tuple<std::string, std::size_t, double>, std::pair<double, std::size_t>> means;
  double max_fraction = 0.0;
  for (const auto& r : rows) {
    auto& [sum, n] = means[{r.channel, r.num_topics, r.fraction}];
    sum += r.p_at_1;
    ++n;
    max_fraction = std::max(max_fraction, r.fraction);
  }
  std::map<std::string, std::string> files;
  for (const auto& [key, acc] : means) {
    const auto& [channel, k, fraction] = key;
    const double mean = acc.first / static_cast<double>(acc.second);
    auto& by_fraction = files["series_" + channel + "_K" + std::to_string(k) + ".tsv"];
    if (by_fraction.empty()) by_fraction = "fraction\tP@1\n";
    by_fraction += format_fraction(fraction) + "\t" + format_score(mean) + "\n";
    if (fraction == max_fraction) {
      auto& by_k = files["series_" + channel + "_by_K.tsv"];
      if (by_k.empty()) by_k = "K\tP@1\n";
      by_k += std::to_string(k) + "\t" + format_score(mean) + "\n";
    }
  }
  return files;
}

TopicMatching match_topics(const std::vector<MatrixD>& a, const std::vector<MatrixD>& b) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("match_topics: channel count mismatch");
  const auto ka = a[0].rows();
  const auto kb = b[0].rows();
  std::vector<std::tuple<double, std::size_t, std::size_t>> costs;
  for (std::size_t i = 0; i < ka; ++i) {
    for (std::size_t j = 0; j < kb; ++j) {
      double c = 0.0;
      for (std::size_t l = 0; l < a.size(); ++l) c += hellinger(a[l].row(i), b[l].row(j));
      costs.emplace_back(c / static_cast<double>(a.size()), i, j);
    }
  }
  std::sort(costs.begin(), costs.end());
  TopicMatching m;
  std::vector<bool> used_a(ka, false), used_b(kb, false);
  for (const auto& [c, i, j] : costs) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = true;
    m.pairs.emplace_back(i, j);
    m.distances.push_back(c);
  }
  double total = 0.0;
  for (double d : m.distances) total += d;
  m.mean_distance = m.distances.empty() ? 0.0 : total / static_cast<double>(m.distances.size());
  return m;
}

}  // namespace mltm
