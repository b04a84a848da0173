#include "mltm/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "mltm/error.hpp"
#include "mltm/parallel.hpp"
#include "mltm/simplex.hpp"

namespace mltm {

std::vector<ArticleDivergence> channel_divergences(const TopicModel& model, const TupleCorpus& test,
                                                   const AuditOptions& options) {
  const auto target = model.require_channel(options.channel);
  const auto query = model.require_channel(options.query_channel);
  if (target == query) throw InvalidArgument("audit: channel and query channel are the same");
  if (!test.channel_index(options.channel)) {
    throw InvalidArgument("audit: test corpus lacks channel '" + options.channel + "'");
  }
  if (!test.channel_index(options.query_channel)) {
    throw InvalidArgument("audit: test corpus lacks query channel '" + options.query_channel + "'");
  }
  const auto thetas = infer_thetas(model, align_to_model(model, test), options.inference);

  std::vector<std::size_t> audited;
  for (std::size_t d = 0; d < thetas.size(); ++d) {
    if (thetas[d][query] && thetas[d][target]) audited.push_back(d);
  }
  // Candidates are every article with the audited channel, in tuple order.
  std::vector<std::size_t> candidates;
  for (std::size_t d = 0; d < thetas.size(); ++d) {
    if (thetas[d][target]) candidates.push_back(d);
  }

  std::vector<ArticleDivergence> out(audited.size());
  parallel_for(audited.size(), options.inference.workers, [&](std::size_t i) {
    const auto d = audited[i];
    const auto q = thetas[d][query]->values();
    const double own = js(q, thetas[d][target]->values());
    std::size_t rank = 1;
    for (auto c : candidates) {
      if (c == d) continue;
      const double s = js(q, thetas[c][target]->values());
      if (s < own || (s == own && c < d)) ++rank;
    }
    out[i] = {d, test.tuples[d].article_id, own, rank};
  });
  return out;
}

std::vector<FlagRecord> flags_from_divergences(std::span<const ArticleDivergence> divergences,
                                               const TupleCorpus& test, const AuditOptions& options,
                                               double threshold) {
  const auto& terms_name = options.terms_channel.empty() ? options.channel : options.terms_channel;
  const auto terms_channel = test.require_channel(terms_name);
  const auto& vocab = test.vocabularies[terms_channel];
  std::vector<FlagRecord> flags;
  for (const auto& a : divergences) {
    if (!(a.divergence > threshold) && a.rank_of_truth == 1) continue;
    FlagRecord r{a.article_id, options.channel, a.divergence, a.rank_of_truth, {}};
    if (const auto& doc = test.tuples.at(a.tuple).docs[terms_channel]) {
      for (const auto& e : doc->entries) r.assigned_terms.push_back(vocab.word_of(e.word));
      std::sort(r.assigned_terms.begin(), r.assigned_terms.end());
    }
    flags.push_back(std::move(r));
  }
  std::stable_sort(flags.begin(), flags.end(), [](const FlagRecord& a, const FlagRecord& b) {
    if (a.divergence != b.divergence) return a.divergence > b.divergence;
    return a.article_id < b.article_id;
  });
  return flags;
}

std::vector<FlagRecord> flag_dissimilar(const TopicModel& model, const TupleCorpus& test,
                                        const AuditOptions& options) {
  const auto divergences = channel_divergences(model, test, options);
  return flags_from_divergences(divergences, test, options, options.threshold);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<TermSummary> summarize_flags(std::span<const FlagRecord> flags, std::size_t top_n) {
  std::map<std::string, std::size_t> counts;
  for (const auto& f : flags) {
    auto terms = f.assigned_terms;
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    for (const auto& t : terms) ++counts[t];
  }
  std::vector<TermSummary> table;
  for (const auto& [term, n] : counts) {
    table.push_back({term, n, static_cast<double>(n) / static_cast<double>(flags.size())});
  }
  std::stable_sort(table.begin(), table.end(),
                   [](const TermSummary& a, const TermSummary& b) { return a.count > b.count; });
  if (table.size() > top_n) table.resize(top_n);
  return table;
}

std::string format_flags(std::span<const FlagRecord> flags) {
  std::string out = "article_id\tchannel\tjs\trank_of_truth\tassigned_terms\n";
  char buf[32];
  for (const auto& f : flags) {
    std::snprintf(buf, sizeof buf, "%.6f", f.divergence);
    out += f.article_id + "\t" + f.target_channel + "\t" + buf + "\t" + std::to_string(f.rank_of_truth) + "\t";
    for (std::size_t i = 0; i < f.assigned_terms.size(); ++i) {
      if (i) out += "|";
      out += f.assigned_terms[i];
    }
    out += "\n";
  }
  return out;
}

std::string format_summary(std::span<const TermSummary> summary) {
  std::string out = "term\tcount\tfraction\n";
  char buf[32];
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "%.6f", s.fraction);
    out += s.term + "\t" + std::to_string(s.count) + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace mltm
