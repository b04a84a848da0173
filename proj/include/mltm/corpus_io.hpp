#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mltm/corpus.hpp"

namespace mltm {

// Manifest records, one per (article, channel). Two encodings:
//   *.jsonl  {"article_id": ..., "channel": ..., "text": ...} or "path" instead of "text"
//   other    article_id <TAB> channel <TAB> text, where a text field of the
//            form "@relative/path" is read from a file next to the manifest.
// Blank lines and lines starting with '#' are ignored in the TSV form.
std::vector<RawArticle> read_manifest(const std::filesystem::path& manifest);

// Directory layout alternative: <root>/<channel>/<article_id>.txt
std::vector<RawArticle> read_channel_directories(const std::filesystem::path& root,
                                                 const std::vector<std::string>& channels);

// "#vocab <TAB> channel <TAB> size" then "<id> <TAB> <word> <TAB> <collection_count>".
std::string format_vocabulary(const Vocabulary& vocab);
Vocabulary parse_vocabulary(std::string_view text);

// Versioned binary corpus cache with checksum; round trips bit-exactly.
inline constexpr std::uint32_t kCorpusFormatVersion = 1;
std::string serialize_corpus(const TupleCorpus& corpus);
TupleCorpus deserialize_corpus(std::string_view bytes);
void save_corpus(const TupleCorpus& corpus, const std::filesystem::path& path);
TupleCorpus load_corpus(const std::filesystem::path& path);

}  // namespace mltm
