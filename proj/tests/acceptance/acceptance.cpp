// Acceptance suite: one [PASS]/[FAIL] line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "mltm/audit.hpp"
#include "mltm/cli.hpp"
#include "mltm/eval.hpp"
#include "mltm/fileutil.hpp"
#include "mltm/gibbs.hpp"
#include "mltm/model.hpp"
#include "mltm/parallel.hpp"
#include "mltm/simplex.hpp"
#include "mltm/synth.hpp"
#include "mltm/vb.hpp"
#include "support.hpp"

namespace {

using namespace mltm;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Library default schedule (1000 sweeps, burn-in 800, lag 10; fold-in 100/50).
GibbsConfig acceptance_gibbs() { return GibbsConfig{}; }

constexpr double kAlpha = 0.5;
constexpr double kBeta = 0.01;
const std::size_t kWorkers = default_workers();

ModelConfig model_config(std::size_t k, std::size_t channels, std::uint64_t seed) {
  return ModelConfig{k, kAlpha, std::vector<double>(channels, kBeta), seed};
}

SynthConfig synth_config(std::vector<std::string> channels, std::size_t docs, std::uint64_t seed) {
  SynthConfig s;
  s.num_topics = 10;
  s.vocab_sizes.assign(channels.size(), 500);
  s.beta.assign(channels.size(), kBeta);
  s.channels = std::move(channels);
  s.num_docs = docs;
  s.tokens_per_doc = 100;
  s.alpha = kAlpha;
  s.seed = seed;
  return s;
}

// Splits the first `train` tuples off as training data and the rest as test.
std::pair<TupleCorpus, TupleCorpus> head_split(const TupleCorpus& c, std::size_t train) {
  std::vector<std::size_t> a(train), b(c.size() - train);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = i;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = train + i;
  return {subset(c, a), subset(c, b)};
}

std::map<std::string, double> p_at_1_by_channel(const std::vector<ReportRow>& rows) {
  std::map<std::string, double> out;
  for (const auto& r : rows) out[r.channel] = r.p_at_1;
  return out;
}

std::string describe(const std::map<std::string, double>& p) {
  std::string s;
  for (const auto& [c, v] : p) s += (s.empty() ? "" : " ") + c + "=" + fmt("%.3f", v);
  return s;
}

// Shared state for the criteria built on the K=10, L=3 synthetic corpus.
struct RecoveryCorpus {
  SynthCorpus synth;
  TupleCorpus train, test;
  std::vector<std::size_t> test_rows;  // row of each test tuple in synth.truth.theta
  std::map<std::pair<std::size_t, double>, TopicModel> gibbs;  // (K, fraction)
  std::map<std::pair<std::size_t, double>, std::vector<ReportRow>> reports;
  std::optional<TopicModel> vb;
  double first_train_seconds = 0.0;

  RecoveryCorpus() {
    synth = generate_pltm_corpus(synth_config({"full", "abstract", "keywords"}, 2200, 501));
    std::tie(train, test) = head_split(synth.corpus, 2000);
    for (std::size_t i = 0; i < test.size(); ++i) test_rows.push_back(2000 + i);
  }

  const TopicModel& model(std::size_t k, double fraction) {
    auto key = std::make_pair(k, fraction);
    if (auto it = gibbs.find(key); it != gibbs.end()) return it->second;
    const auto ids = training_subset(train.size(), fraction, 7);
    const auto part = subset(train, ids);
    const auto start = Clock::now();
    auto m = train_gibbs(part, model_config(k, 3, 11), acceptance_gibbs());
    if (gibbs.empty()) first_train_seconds = seconds_since(start);
    return gibbs.emplace(key, std::move(m)).first->second;
  }

  const std::vector<ReportRow>& report(std::size_t k, double fraction) {
    auto key = std::make_pair(k, fraction);
    if (auto it = reports.find(key); it != reports.end()) return it->second;
    EvalOptions o;
    o.inference.gibbs = acceptance_gibbs();
    o.inference.seed = 13;
    o.inference.workers = kWorkers;
    o.fraction = fraction;
    return reports.emplace(key, evaluate_representations(model(k, fraction), test, o)).first->second;
  }
};

RecoveryCorpus& recovery() {
  static RecoveryCorpus corpus;
  return corpus;
}

Outcome criterion1() {
  const auto start = Clock::now();
  const auto c = testing::make_corpus({"full", "abstract"}, {3, 3},
                                      {{std::vector<WordId>{0, 1, 1}, std::vector<WordId>{0, 2}}});
  const ModelConfig cfg{2, 0.5, {0.5, 0.5}, 2024};
  const auto e = testing::enumerate_single_tuple(c, 2, 0.5, cfg.beta);
  const auto n = e.tokens.size();
  std::vector<double> exact(2, 0.0);
  double exact_max = 0.0;
  for (std::size_t code = 0; code < e.log_joint.size(); ++code) {
    const double p = std::exp(e.log_joint[code] - e.log_evidence);
    const auto z = testing::decode(code, n, 2);
    const double n0 = static_cast<double>(std::count(z.begin(), z.end(), 0));
    const double t0 = (n0 + 0.5) / (static_cast<double>(n) + 1.0);
    exact[0] += p * t0;
    exact[1] += p * (1.0 - t0);
    exact_max += p * std::max(t0, 1.0 - t0);
  }
  GibbsSampler sampler(c, cfg);
  for (int i = 0; i < 1000; ++i) sampler.sweep();
  const int samples = 100000;
  std::vector<double> mean(2, 0.0);
  double mean_max = 0.0;
  for (int s = 0; s < samples; ++s) {
    sampler.sweep();
    const auto th = sampler.theta(0);
    mean[0] += th[0] / samples;
    mean[1] += th[1] / samples;
    mean_max += std::max(th[0], th[1]) / samples;
  }
  const double err = std::max(std::abs(mean[0] - exact[0]), std::abs(mean[1] - exact[1]));
  const double max_err = std::abs(mean_max - exact_max);
  const double secs = seconds_since(start);
  return {err <= 0.02 && max_err <= 0.02 && secs < 60.0,
          "max|mean theta - exact| = " + fmt("%.4f", err) + " (tol 0.02); E[max theta] gap " +
              fmt("%.4f", max_err) + "; N=" + std::to_string(n) + " tokens, 100000 samples, " + fmt("%.2f", secs) +
              " s (limit 60 s)"};
}

Outcome criterion2() {
  const std::vector<int> dt{3, 1};
  const auto theta = estimate_theta(dt, 0.5);
  const std::vector<int> wt{2, 0, 3};
  const auto phi = estimate_phi(wt, 1.0);
  const double e1 = std::max(std::abs(theta[0] - 0.7), std::abs(theta[1] - 0.3));
  const double e2 =
      std::max({std::abs(phi[0] - 0.375), std::abs(phi[1] - 0.125), std::abs(phi[2] - 0.5)});
  return {e1 <= 1e-12 && e2 <= 1e-12,
          "theta err " + fmt("%.1e", e1) + ", phi err " + fmt("%.1e", e2) + " (tol 1e-12)"};
}

Outcome criterion3() {
  std::mt19937_64 gen(3);
  std::gamma_distribution<double> g(0.5, 1.0);
  const auto draw = [&](std::size_t k) {
    std::vector<double> p(k);
    double s = 0.0;
    for (auto& v : p) s += (v = g(gen));
    for (auto& v : p) v /= s;
    return p;
  };
  bool ok = true;
  std::size_t asym = 0, over = 0, negative = 0, triangle = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = draw(2 + i % 50), q = draw(2 + i % 50);
    const double a = js(p, q), b = js(q, p);
    asym += a != b;
    over += a > std::log(2.0) + 1e-12;
    negative += kl(p, q) < 0.0;
  }
  for (int i = 0; i < 1000; ++i) {
    const auto p = draw(20), q = draw(20), r = draw(20);
    triangle += hellinger(p, r) > hellinger(p, q) + hellinger(q, r);
  }
  const std::vector<double> e0{1.0, 0.0}, e1{0.0, 1.0}, h1{0.36, 0.64}, h2{0.64, 0.36};
  const double js_err = std::abs(js(e0, e1) - std::log(2.0));
  const double h_err = std::abs(hellinger(h1, h2) - 0.2);
  ok = asym == 0 && over == 0 && negative == 0 && triangle == 0 && js_err <= 1e-12 && h_err <= 1e-12;
  return {ok, "asymmetric " + std::to_string(asym) + "/1000, JS>ln2 " + std::to_string(over) + ", KL<0 " +
                  std::to_string(negative) + ", triangle violations " + std::to_string(triangle) +
                  "/1000, |js-ln2|=" + fmt("%.1e", js_err) + ", |hellinger-0.2|=" + fmt("%.1e", h_err)};
}

Outcome criterion4() {
  const auto start = Clock::now();
  auto s = synth_config({"full", "abstract"}, 200, 404);
  s.num_topics = 5;
  s.vocab_sizes = {200, 200};
  const auto synth = generate_pltm_corpus(s);
  VbConfig v;
  v.mode = VbMode::batch;
  v.passes = 100;
  v.workers = kWorkers;
  std::vector<PassRecord> trace;
  train_vb(synth.corpus, model_config(5, 2, 4), v, &trace);
  double worst = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) worst = std::min(worst, trace[i].elbo - trace[i - 1].elbo);
  const double secs = seconds_since(start);
  return {trace.size() == 100 && worst >= -1e-6 && secs < 120.0,
          std::to_string(trace.size()) + " passes, largest ELBO drop " + fmt("%.2e", std::max(0.0, -worst)) +
              " (tol 1e-6), ELBO " + fmt("%.1f", trace.front().elbo) + " -> " + fmt("%.1f", trace.back().elbo) +
              ", " + fmt("%.1f", secs) + " s (limit 120 s)"};
}

Outcome criterion5() {
  const auto start = Clock::now();
  auto& r = recovery();
  const auto p = p_at_1_by_channel(r.report(10, 1.0));
  const double secs = seconds_since(start);
  bool ok = secs < 600.0;
  for (const auto& [c, v] : p) ok &= v >= 0.9;
  return {ok, "P@1 " + describe(p) + " (need >= 0.9); 2000 train / 200 test, " + fmt("%.0f", secs) +
                  " s (limit 600 s)"};
}

Outcome criterion6() {
  const std::vector<double> rates{0.0, 0.3, 0.6, 0.9};
  auto cfg = synth_config({"full", "r00", "r30", "r60", "r90"}, 1200, 606);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] > 0.0) cfg.corruption.push_back({cfg.channels[i + 1], 0.0, rates[i]});
  }
  const auto synth = generate_pltm_corpus(cfg);
  const auto [train, test] = head_split(synth.corpus, 1000);
  bool ok = true;
  std::string detail;
  for (std::size_t k : {5, 10, 20}) {
    const auto model = train_gibbs(train, model_config(k, 5, 21), acceptance_gibbs());
    EvalOptions o;
    o.inference.gibbs = acceptance_gibbs();
    o.inference.seed = 23;
    o.inference.workers = kWorkers;
    const auto p = p_at_1_by_channel(evaluate_representations(model, test, o));
    std::vector<double> by_rate;
    for (std::size_t i = 0; i < rates.size(); ++i) by_rate.push_back(p.at(cfg.channels[i + 1]));
    bool monotone = true;
    for (std::size_t i = 1; i < by_rate.size(); ++i) monotone &= by_rate[i] <= by_rate[i - 1];
    ok &= monotone;
    detail += (detail.empty() ? "" : "; ") + std::string("K=") + std::to_string(k) + ": ";
    for (std::size_t i = 0; i < by_rate.size(); ++i) {
      detail += (i ? " >= " : "") + fmt("%.3f", by_rate[i]);
    }
    detail += monotone ? "" : " (order violated)";
  }
  return {ok, "P@1 at replacement 0/30/60/90%: " + detail};
}

Outcome criterion7() {
  auto& r = recovery();
  const auto p10 = p_at_1_by_channel(r.report(10, 1.0));
  const auto p3 = p_at_1_by_channel(r.report(3, 1.0));
  bool ok = true;
  for (const auto& [c, v] : p10) ok &= v > p3.at(c);
  return {ok, "K=10: " + describe(p10) + " vs K=3: " + describe(p3)};
}

Outcome criterion8() {
  auto& r = recovery();
  bool ok = true;
  std::string detail;
  const auto p3 = p_at_1_by_channel(r.report(3, 1.0));
  std::map<double, std::map<std::string, double>> by_fraction;
  for (double f : {0.25, 0.5, 1.0}) by_fraction[f] = p_at_1_by_channel(r.report(10, f));
  for (const auto& [c, full] : by_fraction[1.0]) {
    double lo = 1.0, hi = 0.0;
    for (const auto& [f, p] : by_fraction) {
      lo = std::min(lo, p.at(c));
      hi = std::max(hi, p.at(c));
    }
    const double fraction_range = hi - lo;
    const double k_range = std::abs(full - p3.at(c));
    ok &= fraction_range < k_range;
    detail += (detail.empty() ? "" : "; ") + c + ": fraction range " + fmt("%.3f", fraction_range) +
              " (0.25/0.5/1.0 = " + fmt("%.3f", by_fraction[0.25].at(c)) + "/" +
              fmt("%.3f", by_fraction[0.5].at(c)) + "/" + fmt("%.3f", full) + ") vs K range " +
              fmt("%.3f", k_range);
  }
  return {ok, detail};
}

Outcome criterion9() {
  auto& r = recovery();
  const auto pg = p_at_1_by_channel(r.report(10, 1.0));
  if (!r.vb) {
    VbConfig v;
    v.mode = VbMode::batch;
    v.passes = 50;
    v.workers = kWorkers;
    r.vb = train_vb(r.train, model_config(10, 3, 31), v);
  }
  EvalOptions o;
  o.inference.backend = Backend::vb;
  o.inference.seed = 13;
  o.inference.workers = kWorkers;
  const auto pv = p_at_1_by_channel(evaluate_representations(*r.vb, r.test, o));
  double worst = 0.0;
  for (const auto& [c, v] : pg) worst = std::max(worst, std::abs(v - pv.at(c)));
  const auto match = match_topics(r.model(10, 1.0).phi, r.vb->phi);
  return {worst <= 0.1 && match.mean_distance <= 0.3,
          "Gibbs " + describe(pg) + ", VB " + describe(pv) + ", max |diff| " + fmt("%.3f", worst) +
              " (tol 0.1); matched-topic mean Hellinger " + fmt("%.3f", match.mean_distance) + " (tol 0.3)"};
}

Outcome criterion10() {
  auto& r = recovery();
  const auto& model = r.model(10, 1.0);
  auto test = r.test;
  const auto channel = test.require_channel("abstract");
  // The planted topic is the one with the most true mass in the test set;
  // its 10% highest-weight articles get their abstracts damaged.
  std::size_t topic = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < 10; ++k) {
    double mass = 0.0;
    for (auto row : r.test_rows) mass += r.synth.truth.theta(row, k);
    if (mass > best) best = mass, topic = k;
  }
  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.synth.truth.theta(r.test_rows[a], topic) > r.synth.truth.theta(r.test_rows[b], topic);
  });
  std::vector<std::size_t> damaged(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test.size() / 10));
  std::sort(damaged.begin(), damaged.end());
  corrupt_documents(test, channel, damaged, 0.9, 0.0, 1010);

  AuditOptions o;
  o.channel = "abstract";
  o.inference.gibbs = acceptance_gibbs();
  o.inference.seed = 17;
  o.inference.workers = kWorkers;
  const auto divs = channel_divergences(model, test, o);
  const std::set<std::size_t> damaged_set(damaged.begin(), damaged.end());
  std::vector<double> clean;
  for (const auto& d : divs) {
    if (!damaged_set.contains(d.tuple)) clean.push_back(d.divergence);
  }
  const double threshold = percentile(clean, 90.0);
  const auto flags = flags_from_divergences(divs, test, o, threshold);
  std::set<std::string> flagged;
  for (const auto& f : flags) flagged.insert(f.article_id);
  std::size_t recovered = 0;
  for (auto d : damaged) recovered += flagged.contains(test.tuples[d].article_id);
  const double recall = static_cast<double>(recovered) / static_cast<double>(damaged.size());

  const auto& phi = r.synth.truth.phi[channel];
  std::vector<std::size_t> words(phi.cols());
  for (std::size_t w = 0; w < words.size(); ++w) words[w] = w;
  std::stable_sort(words.begin(), words.end(),
                   [&](std::size_t a, std::size_t b) { return phi(topic, a) > phi(topic, b); });
  const auto summary = summarize_flags(flags, 10);
  std::set<std::string> top10;
  for (const auto& s : summary) top10.insert(s.term);
  std::size_t markers = 0;
  std::string marker_list;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& word = test.vocabularies[channel].word_of(static_cast<WordId>(words[i]));
    markers += top10.contains(word);
    marker_list += (i ? "," : "") + word;
  }
  return {recall >= 0.9 && markers >= 3,
          "recovered " + std::to_string(recovered) + "/" + std::to_string(damaged.size()) + " (" +
              fmt("%.2f", recall) + ", need >= 0.90) at threshold " + fmt("%.4f", threshold) + " with " +
              std::to_string(flags.size()) + " flags; " + std::to_string(markers) + " of topic-" +
              std::to_string(topic) + " markers {" + marker_list + "} in summary top 10 (need >= 3)"};
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"mltm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome criterion11() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / ("mltm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  write_file_atomic(root / "spec.json",
                    R"({"num_topics": 5, "channels": ["full", "abstract", "keywords"],
                        "vocab_sizes": [200, 200, 200], "num_docs": 400, "tokens_per_doc": 60,
                        "alpha": 0.5, "beta": 0.01, "seed": 1111,
                        "corruption": [{"channel": "keywords", "replacement_rate": 0.4}]})");
  const auto run_once = [&](const std::string& name) {
    const auto d = (root / name).string();
    const auto w = std::to_string(kWorkers);
    return cli({"synth", "--spec", (root / "spec.json").string(), "--out", d + "/data"}) == 0 &&
           cli({"train", "--corpus", d + "/data/train.corpus", "--topics", "5", "--alpha", "0.5", "--iterations",
                "150", "--burn-in", "100", "--seed", "3", "--workers", w, "--out", d + "/model"}) == 0 &&
           cli({"eval", "--model", d + "/model/model.bin", "--test", d + "/data/test.corpus", "--seed", "3",
                "--workers", w, "--out", d + "/eval"}) == 0 &&
           cli({"audit", "--model", d + "/model/model.bin", "--test", d + "/data/test.corpus", "--channel",
                "keywords", "--percentile", "90", "--seed", "3", "--workers", w, "--out", d + "/audit"}) == 0;
  };
  const bool ran = run_once("a") && run_once("b");
  std::size_t compared = 0, identical = 0;
  if (ran) {
    for (const auto* f : {"data/train.corpus", "data/test.corpus", "data/truth.tsv", "model/model.bin",
                          "model/trace.tsv", "eval/report.tsv", "eval/report.jsonl", "audit/divergences.tsv",
                          "audit/flags.tsv", "audit/summary.tsv"}) {
      ++compared;
      identical += read_file(root / "a" / f) == read_file(root / "b" / f);
    }
  }
  fs::remove_all(root);
  return {ran && compared == identical && compared > 0,
          ran ? std::to_string(identical) + "/" + std::to_string(compared) +
                    " artifacts byte-identical across two synth->train->eval->audit runs"
              : "pipeline failed"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact-posterior oracle (Gibbs)", criterion1},
      {"estimator hand examples", criterion2},
      {"metric suite", criterion3},
      {"batch VB ELBO ascent", criterion4},
      {"synthetic retrieval recovery", criterion5},
      {"ranking by corruption rate", criterion6},
      {"topic-count trend", criterion7},
      {"training-size insensitivity", criterion8},
      {"backend agreement", criterion9},
      {"planted-defect audit", criterion10},
      {"pipeline determinism", criterion11},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::stoul(argv[i])));
  const auto g = acceptance_gibbs();
  std::printf("acceptance: workers=%zu, gibbs %zu sweeps (burn-in %zu, lag %zu), fold-in %zu (burn-in %zu), "
              "alpha=%.2f beta=%.2f\n",
              kWorkers, g.iterations, g.burn_in, g.sample_lag, g.fold_in_iterations, g.fold_in_burn_in, kAlpha,
              kBeta);
  std::fflush(stdout);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.contains(i + 1)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] criterion %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
