#pragma once

// On-disk dataset layout:
//
//   <root>/manifest.jsonl   one JSON object per line:
//     {"id": "<string>", "label": 0|1, "entropy": <number>, "fcg": "<rel path>", "pcg": "<rel path>"}
//   edge files              "# nodes=<N> directed=true", then one "<source> <target>" per line
//   <root>/PROVENANCE       optional free text

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "gemini/error.hpp"
#include "gemini/graph.hpp"
#include "gemini/io.hpp"

namespace gemini {

namespace fs = std::filesystem;

inline std::string format_edge_file(const Graph &g) {
  std::string out = "# nodes=" + std::to_string(g.node_count) + " directed=true\n";
  for (const Edge &e : g.edges) {
    out += std::to_string(e.source);
    out += ' ';
    out += std::to_string(e.target);
    out += '\n';
  }
  return out;
}

// `origin` only labels error messages.
inline Graph parse_edge_file(std::string_view text, const std::string &origin) {
  auto lines = detail::split_lines(text);
  auto fail = [&](std::size_t line_no, const std::string &msg) -> ValidationError {
    return ValidationError(origin + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (lines.empty()) throw fail(1, "missing header '# nodes=<N> directed=true'");

  constexpr std::string_view prefix = "# nodes=";
  constexpr std::string_view suffix = " directed=true";
  std::string_view header = lines[0];
  if (!header.starts_with(prefix) || !header.ends_with(suffix) ||
      header.size() <= prefix.size() + suffix.size())
    throw fail(1, "malformed header '" + std::string(header) + "'");
  Graph g;
  std::string_view count = header.substr(prefix.size(), header.size() - prefix.size() - suffix.size());
  if (!detail::parse_uint(count, g.node_count)) throw fail(1, "malformed node count");
  if (g.node_count == 0) throw fail(1, "graph must have at least one node");

  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.empty() || line.front() == '#') continue;
    auto space = line.find(' ');
    Edge e;
    if (space == std::string_view::npos || !detail::parse_uint(line.substr(0, space), e.source) ||
        !detail::parse_uint(line.substr(space + 1), e.target))
      throw fail(i + 1, "malformed edge line '" + std::string(line) + "'");
    if (e.source >= g.node_count || e.target >= g.node_count)
      throw fail(i + 1, detail::sprintf("edge endpoint out of range for node_count %zu", g.node_count));
    g.edges.push_back(e);
  }
  return canonicalize(std::move(g));
}

inline Graph load_edge_file(const fs::path &path) {
  return parse_edge_file(detail::read_text_file(path), path.string());
}

inline void store_edge_file(const Graph &g, const fs::path &path) {
  detail::write_text_file(path, format_edge_file(g));
}

inline std::string format_manifest_line(const SamplePair &s, const std::string &fcg_path,
                                        const std::string &pcg_path) {
  using nlohmann::json;
  std::string out = "{\"id\": " + json(s.id).dump();
  out += ", \"label\": " + std::to_string(to_int(s.label));
  out += ", \"entropy\": " + detail::format_double(s.entropy);
  out += ", \"fcg\": " + json(fcg_path).dump();
  out += ", \"pcg\": " + json(pcg_path).dump();
  out += "}\n";
  return out;
}

inline Dataset load_dataset(const fs::path &root) {
  const fs::path manifest = root / "manifest.jsonl";
  if (!fs::exists(manifest)) throw IoError("missing manifest " + manifest.string());
  const std::string text = detail::read_text_file(manifest);

  Dataset ds;
  if (fs::exists(root / "PROVENANCE")) ds.provenance = detail::read_text_file(root / "PROVENANCE");

  std::unordered_set<std::string> ids;
  auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = manifest.string() + ":" + std::to_string(i + 1) + ": ";
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error &e) {
      throw ValidationError(where + "invalid JSON (" + e.what() + ")");
    }
    if (!row.is_object()) throw ValidationError(where + "manifest row must be a JSON object");
    for (const char *key : {"id", "label", "entropy", "fcg", "pcg"})
      if (!row.contains(key)) throw ValidationError(where + "missing field '" + key + "'");
    if (!row["id"].is_string() || !row["fcg"].is_string() || !row["pcg"].is_string())
      throw ValidationError(where + "fields id, fcg and pcg must be strings");
    if (!row["label"].is_number_integer()) throw ValidationError(where + "label must be 0 or 1");
    if (!row["entropy"].is_number()) throw ValidationError(where + "entropy must be a number");

    SamplePair s;
    s.id = row["id"].get<std::string>();
    try {
      s.label = label_from_int(row["label"].get<long long>());
    } catch (const ValidationError &e) {
      throw ValidationError(where + e.what());
    }
    s.entropy = row["entropy"].get<double>();
    if (!(s.entropy >= 0.0 && s.entropy <= 8.0))
      throw ValidationError(where + "entropy must lie in [0, 8]");
    if (!ids.insert(s.id).second) throw ValidationError(where + "duplicate id '" + s.id + "'");
    s.fcg = load_edge_file(root / row["fcg"].get<std::string>());
    s.pcg = load_edge_file(root / row["pcg"].get<std::string>());
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw ValidationError(manifest.string() + ": dataset is empty");
  return ds;
}

// Graph files are named by sample position, so ids never leak into paths.
inline void store_dataset(const Dataset &ds, const fs::path &root) {
  validate(ds);
  std::string manifest;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const SamplePair &s = ds.samples[i];
    const std::string stem = detail::sprintf("graphs/%06zu", i);
    const std::string fcg = stem + ".fcg.edges";
    const std::string pcg = stem + ".pcg.edges";
    store_edge_file(canonicalize(s.fcg), root / fcg);
    store_edge_file(canonicalize(s.pcg), root / pcg);
    manifest += format_manifest_line(s, fcg, pcg);
  }
  detail::write_text_file(root / "manifest.jsonl", manifest);
  if (!ds.provenance.empty()) detail::write_text_file(root / "PROVENANCE", ds.provenance);
}

} // namespace gemini
