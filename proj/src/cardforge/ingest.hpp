#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cardforge/errors.hpp"

namespace cardforge {

enum class ChunkSource { PaperSection, RepoMetadata };

std::string_view to_string(ChunkSource s);

struct Chunk {
  int id = 0;
  ChunkSource source = ChunkSource::PaperSection;
  std::string heading;  // empty for the preamble
  std::string body;

  bool operator==(const Chunk&) const = default;
};

struct Document {
  std::vector<Chunk> chunks;
  bool empty() const noexcept { return chunks.empty(); }
};

// Sections larger than this split at paragraph boundaries into continuation
// chunks that share the heading (reranker input bound).
inline constexpr std::size_t kMaxSectionChars = 16000;

/// Splits Markdown into section chunks. Level-1/2 ATX headings outside
/// fenced code blocks open a new section; deeper headings stay in the body.
/// Text before the first heading becomes a heading-less preamble chunk.
std::vector<Chunk> chunk_markdown(const std::string& text);

/// Raw repository listing record (hub API shape).
struct HubRecord {
  std::string id;
  std::vector<std::string> tags;
  long long downloads = 0;
  long long likes = 0;
  std::string description;
  std::string source_ref;  // filled by filter_paper_linked

  static HubRecord from_json(const std::string& json_text);
};

/// Renders a repository record as a single retrieval chunk with labeled
/// lines. The repository id is deliberately left out of the body.
Chunk metadata_chunk(const HubRecord& record);

Document make_document(std::vector<Chunk> paper_chunks, std::optional<Chunk> metadata);

std::string chunks_to_jsonl(const std::vector<Chunk>& chunks);
Document document_from_jsonl(const std::string& jsonl);

}  // namespace cardforge
