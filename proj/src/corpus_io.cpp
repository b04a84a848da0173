#include "mltm/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include "json.hpp"
#include <sstream>

#include "binary_io.hpp"
#include "mltm/error.hpp"
#include "mltm/fileutil.hpp"

namespace mltm {

namespace {

constexpr std::string_view kCorpusMagic = "MLTMCORP";

std::vector<std::string_view> split_tabs(std::string_view line, std::size_t max_fields) {
  std::vector<std::string_view> fields;
  while (fields.size() + 1 < max_fields) {
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) break;
    fields.push_back(line.substr(0, tab));
    line.remove_prefix(tab + 1);
  }
  fields.push_back(line);
  return fields;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <typename T>
T parse_number(std::string_view field, std::string_view context) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw IntegrityError(std::string(context) + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<RawArticle> read_manifest(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  const auto contents = read_file(manifest);
  std::vector<RawArticle> articles;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  const bool jsonl = manifest.extension() == ".jsonl";
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = manifest.string() + ":" + std::to_string(line_no);
    std::string_view view = strip_cr(line);
    if (view.empty() || (!jsonl && view.front() == '#')) continue;
    RawArticle a;
    if (jsonl) {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(view);
        a.article_id = rec.at("article_id").get<std::string>();
        a.channel = rec.at("channel").get<std::string>();
        if (rec.contains("text")) {
          a.text = rec.at("text").get<std::string>();
        } else {
          a.text = read_file(base / rec.at("path").get<std::string>());
        }
      } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(where + ": " + e.what());
      }
    } else {
      auto fields = split_tabs(view, 3);
      if (fields.size() != 3) throw IntegrityError(where + ": expected 3 tab-separated fields");
      a.article_id = fields[0];
      a.channel = fields[1];
      if (!fields[2].empty() && fields[2].front() == '@') {
        a.text = read_file(base / std::string(fields[2].substr(1)));
      } else {
        a.text = fields[2];
      }
    }
    articles.push_back(std::move(a));
  }
  return articles;
}

std::vector<RawArticle> read_channel_directories(const std::filesystem::path& root,
                                                 const std::vector<std::string>& channels) {
  std::vector<RawArticle> articles;
  for (const auto& channel : channels) {
    const auto dir = root / channel;
    if (!std::filesystem::is_directory(dir)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      articles.push_back({f.stem().string(), channel, read_file(f)});
    }
  }
  return articles;
}

std::string format_vocabulary(const Vocabulary& vocab) {
  std::string out = "#vocab\t" + vocab.channel() + "\t" + std::to_string(vocab.size()) + "\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += vocab.word_of(static_cast<WordId>(i));
    out += '\t';
    out += std::to_string(vocab.collection_count(static_cast<WordId>(i)));
    out += '\n';
  }
  return out;
}

Vocabulary parse_vocabulary(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw IntegrityError("vocabulary file: missing header");
  auto header = split_tabs(strip_cr(line), 3);
  if (header.size() != 3 || header[0] != "#vocab") {
    throw IntegrityError("vocabulary file: malformed header");
  }
  const std::string channel(header[1]);
  const auto size = parse_number<std::size_t>(header[2], "vocabulary header");
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  while (std::getline(in, line)) {
    auto view = strip_cr(line);
    if (view.empty()) continue;
    auto fields = split_tabs(view, 3);
    if (fields.size() != 3) throw IntegrityError("vocabulary file: malformed entry");
    if (parse_number<std::size_t>(fields[0], "vocabulary id") != words.size()) {
      throw IntegrityError("vocabulary file: ids are not dense");
    }
    words.emplace_back(fields[1]);
    counts.push_back(parse_number<std::uint64_t>(fields[2], "vocabulary count"));
  }
  if (words.size() != size) throw IntegrityError("vocabulary file: size does not match header");
  // Document frequencies are not part of the text format.
  std::vector<std::uint64_t> dfs(words.size(), 0);
  return Vocabulary(channel, std::move(words), std::move(counts), std::move(dfs));
}

std::string serialize_corpus(const TupleCorpus& corpus) {
  detail::BinaryWriter w(kCorpusMagic, kCorpusFormatVersion);
  w.put<std::uint64_t>(corpus.channels.size());
  for (std::size_t l = 0; l < corpus.channels.size(); ++l) {
    const auto& v = corpus.vocabularies[l];
    w.put_string(corpus.channels[l]);
    w.put<std::uint64_t>(v.size());
    for (const auto& word : v.words()) w.put_string(word);
    w.put_vector(v.collection_counts());
    w.put_vector(v.document_frequencies());
  }
  w.put<std::uint64_t>(corpus.tuples.size());
  for (const auto& t : corpus.tuples) {
    w.put_string(t.article_id);
    for (const auto& doc : t.docs) {
      w.put<std::uint8_t>(doc ? 1 : 0);
      if (!doc) continue;
      w.put_string(doc->article_id);
      w.put<std::uint64_t>(doc->entries.size());
      for (const auto& e : doc->entries) {
        w.put(e.word);
        w.put(e.count);
      }
    }
  }
  return std::move(w).finish();
}

TupleCorpus deserialize_corpus(std::string_view bytes) {
  detail::BinaryReader r(bytes, kCorpusMagic, kCorpusFormatVersion, "corpus cache");
  TupleCorpus corpus;
  const auto num_channels = r.get<std::uint64_t>();
  for (std::uint64_t l = 0; l < num_channels; ++l) {
    auto channel = r.get_string();
    const auto size = r.get<std::uint64_t>();
    std::vector<std::string> words;
    for (std::uint64_t i = 0; i < size; ++i) words.push_back(r.get_string());
    auto counts = r.get_vector<std::uint64_t>();
    auto dfs = r.get_vector<std::uint64_t>();
    corpus.channels.push_back(channel);
    corpus.vocabularies.emplace_back(std::move(channel), std::move(words), std::move(counts),
                                     std::move(dfs));
  }
  const auto num_tuples = r.get<std::uint64_t>();
  for (std::uint64_t d = 0; d < num_tuples; ++d) {
    ArticleTuple t;
    t.article_id = r.get_string();
    for (std::uint64_t l = 0; l < num_channels; ++l) {
      if (r.get<std::uint8_t>() == 0) {
        t.docs.emplace_back();
        continue;
      }
      BowDocument doc;
      doc.article_id = r.get_string();
      doc.channel = corpus.channels[l];
      const auto n = r.get<std::uint64_t>();
      for (std::uint64_t i = 0; i < n; ++i) {
        BowEntry e;
        e.word = r.get<WordId>();
        e.count = r.get<std::uint32_t>();
        doc.total_tokens += e.count;
        doc.entries.push_back(e);
      }
      t.docs.push_back(std::move(doc));
    }
    corpus.tuples.push_back(std::move(t));
  }
  r.expect_end();
  corpus.validate();
  return corpus;
}

void save_corpus(const TupleCorpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

TupleCorpus load_corpus(const std::filesystem::path& path) {
  return deserialize_corpus(read_file(path));
}

}  // namespace mltm
