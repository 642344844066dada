#include "cardforge/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "json.hpp"

namespace cardforge {

using nlohmann::ordered_json;

std::string_view to_string(ChunkSource s) {
  return s == ChunkSource::PaperSection ? "paper_section" : "repo_metadata";
}

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view s) { return trim_view(s).empty(); }

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return lines;
}

// Fence open/close: ``` or ~~~ after up to three spaces of indent.
bool is_fence_line(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && line[i] == ' ' && i < 3) ++i;
  if (i + 3 > line.size()) return false;
  char c = line[i];
  if (c != '`' && c != '~') return false;
  std::size_t run = 0;
  while (i + run < line.size() && line[i + run] == c) ++run;
  return run >= 3;
}

// Returns the heading title for level-1/2 ATX headings, nullopt otherwise.
std::optional<std::string> section_heading(std::string_view line) {
  std::size_t hashes = 0;
  while (hashes < line.size() && line[hashes] == '#') ++hashes;
  if (hashes == 0 || hashes > 2) return std::nullopt;
  std::string_view rest = line.substr(hashes);
  if (!rest.empty() && rest.front() != ' ' && rest.front() != '\t') return std::nullopt;
  return std::string(trim_view(rest));
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < lines.size()) out += '\n';
  }
  return out;
}

// Splits an oversized body at blank-line paragraph boundaries; a single
// paragraph longer than the limit is kept whole.
std::vector<std::string> split_oversized(const std::string& body) {
  if (body.size() <= kMaxSectionChars) return {body};
  std::vector<std::string> paragraphs;
  std::string current;
  std::istringstream in(body);
  std::string line;
  bool pending_blank = false;
  while (std::getline(in, line)) {
    if (is_blank(line)) {
      pending_blank = true;
      continue;
    }
    if (pending_blank && !current.empty()) {
      paragraphs.push_back(current);
      current.clear();
    }
    pending_blank = false;
    if (!current.empty()) current += '\n';
    current += line;
  }
  if (!current.empty()) paragraphs.push_back(current);

  std::vector<std::string> parts;
  std::string acc;
  for (const auto& p : paragraphs) {
    if (!acc.empty() && acc.size() + 2 + p.size() > kMaxSectionChars) {
      parts.push_back(acc);
      acc.clear();
    }
    if (!acc.empty()) acc += "\n\n";
    acc += p;
  }
  if (!acc.empty()) parts.push_back(acc);
  return parts.empty() ? std::vector<std::string>{body} : parts;
}

}  // namespace

std::vector<Chunk> chunk_markdown(const std::string& text) {
  if (is_blank(text)) throw Error(Errc::EmptyDocument, "no content to chunk");

  struct Section {
    std::string heading;
    std::vector<std::string> lines;
  };
  std::vector<Section> sections;
  sections.push_back(Section{});  // preamble
  bool in_fence = false;

  for (auto& line : split_lines(text)) {
    if (is_fence_line(line)) {
      in_fence = !in_fence;
      sections.back().lines.push_back(std::move(line));
      continue;
    }
    if (!in_fence) {
      if (auto heading = section_heading(line)) {
        sections.push_back(Section{*heading, {}});
        continue;
      }
    }
    sections.back().lines.push_back(std::move(line));
  }

  std::vector<Chunk> chunks;
  int next_id = 0;
  for (std::size_t s = 0; s < sections.size(); ++s) {
    std::string body = join_lines(sections[s].lines);
    const bool body_blank = is_blank(body);
    if (s == 0 && body_blank) continue;  // no preamble
    if (body_blank) {
      chunks.push_back(Chunk{next_id++, ChunkSource::PaperSection, sections[s].heading, ""});
      continue;
    }
    for (auto& part : split_oversized(body))
      chunks.push_back(Chunk{next_id++, ChunkSource::PaperSection, sections[s].heading, std::move(part)});
  }
  if (chunks.empty()) throw Error(Errc::EmptyDocument, "no content to chunk");
  return chunks;
}

HubRecord HubRecord::from_json(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedJson, e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.at("id").is_string())
    throw Error(Errc::MalformedJson, "record needs a string \"id\"");
  HubRecord r;
  r.id = j.at("id").get<std::string>();
  if (j.contains("tags"))
    for (const auto& t : j.at("tags"))
      if (t.is_string()) r.tags.push_back(t.get<std::string>());
  if (j.contains("downloads") && j.at("downloads").is_number())
    r.downloads = j.at("downloads").get<long long>();
  if (j.contains("likes") && j.at("likes").is_number())
    r.likes = j.at("likes").get<long long>();
  if (j.contains("description") && j.at("description").is_string())
    r.description = j.at("description").get<std::string>();
  if (j.contains("source_ref") && j.at("source_ref").is_string())
    r.source_ref = j.at("source_ref").get<std::string>();
  return r;
}

Chunk metadata_chunk(const HubRecord& record) {
  const bool has_description = !is_blank(record.description);
  if (!has_description && record.tags.empty())
    throw Error(Errc::EmptyMetadata, "record \"" + record.id + "\" has neither description nor tags");

  std::string license;
  for (const auto& t : record.tags) {
    if (t.rfind("license:", 0) == 0) {
      license = t.substr(8);
      break;
    }
  }

  std::string body;
  if (has_description) body += "description: " + record.description + "\n";
  if (!record.tags.empty()) {
    body += "tags: ";
    for (std::size_t i = 0; i < record.tags.size(); ++i) {
      if (i) body += ", ";
      body += record.tags[i];
    }
    body += "\n";
  }
  if (!license.empty()) body += "license: " + license + "\n";
  body += "downloads: " + std::to_string(record.downloads) + "\n";
  body += "likes: " + std::to_string(record.likes);

  return Chunk{0, ChunkSource::RepoMetadata, "Repository Metadata", body};
}

Document make_document(std::vector<Chunk> paper_chunks, std::optional<Chunk> metadata) {
  Document doc;
  doc.chunks = std::move(paper_chunks);
  if (metadata) doc.chunks.push_back(std::move(*metadata));
  for (std::size_t i = 0; i < doc.chunks.size(); ++i)
    doc.chunks[i].id = static_cast<int>(i);
  return doc;
}

std::string chunks_to_jsonl(const std::vector<Chunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    ordered_json j;
    j["id"] = c.id;
    j["source"] = std::string(to_string(c.source));
    j["heading"] = c.heading;
    j["body"] = c.body;
    out += j.dump() + "\n";
  }
  return out;
}

Document document_from_jsonl(const std::string& jsonl) {
  Document doc;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::MalformedJson, std::string("chunk line: ") + e.what());
    }
    Chunk c;
    c.id = static_cast<int>(doc.chunks.size());
    if (j.contains("source") && j.at("source").get<std::string>() == "repo_metadata")
      c.source = ChunkSource::RepoMetadata;
    if (j.contains("heading")) c.heading = j.at("heading").get<std::string>();
    if (j.contains("body")) c.body = j.at("body").get<std::string>();
    doc.chunks.push_back(std::move(c));
  }
  return doc;
}

}  // namespace cardforge
