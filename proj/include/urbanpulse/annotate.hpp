#pragma once

// Per-cell term documents (hashtags + venue categories) and TF-IDF ranking.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "urbanpulse/bins.hpp"
#include "urbanpulse/fuse.hpp"
#include "urbanpulse/records.hpp"

namespace urbanpulse {

/// Lowercases and strips leading '#' and trailing punctuation. Idempotent.
inline std::string normalize_token(std::string_view raw) {
  std::size_t b = 0;
  while (b < raw.size() && raw[b] == '#') ++b;
  std::size_t e = raw.size();
  while (e > b && std::ispunct(static_cast<unsigned char>(raw[e - 1])) && raw[e - 1] != '#') --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
  if (!out.empty() && out.front() == '#') return normalize_token(out);
  return out;
}

/// '#'-prefixed whitespace-delimited terms of a message.
inline std::vector<std::string> extract_hashtags(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i && text[i] == '#') {
      auto tok = normalize_token(text.substr(i, j - i));
      if (!tok.empty()) out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

struct AnnotationDoc {
  CellKey cell;
  std::map<std::string, int> token_counts;
};

struct AnnotationCorpus {
  BinScheme scheme;
  std::map<CellKey, AnnotationDoc> docs;
  std::map<std::string, int> document_frequency;
  std::size_t messages_outside{0};
  std::size_t checkins_outside{0};

  const AnnotationDoc* find(const CellKey& cell) const {
    const auto it = docs.find(cell);
    return it == docs.end() ? nullptr : &it->second;
  }
};

inline AnnotationCorpus build_docs(const std::vector<MessageRecord>& messages, const std::vector<CheckinRecord>& checkins,
                                   const ZoneSet& zones, const BinScheme& scheme) {
  AnnotationCorpus corpus;
  corpus.scheme = scheme;
  auto cell_of = [&](Instant t, const std::string& zone) {
    return CellKey{zone, t.date(), scheme.bin_of_minute(t.minute_of_day())};
  };
  for (const auto& m : messages) {
    const auto z = zones.point_to_zone(m.location);
    if (!z) {
      ++corpus.messages_outside;
      continue;
    }
    const auto tags = extract_hashtags(m.text);
    if (tags.empty()) continue;
    const auto cell = cell_of(m.timestamp, *z);
    auto& doc = corpus.docs[cell];
    doc.cell = cell;
    for (const auto& t : tags) ++doc.token_counts[t];
  }
  for (const auto& c : checkins) {
    const auto z = zones.point_to_zone(c.location);
    if (!z) {
      ++corpus.checkins_outside;
      continue;
    }
    const auto tok = normalize_token(c.category);
    if (tok.empty()) continue;
    const auto cell = cell_of(c.timestamp, *z);
    auto& doc = corpus.docs[cell];
    doc.cell = cell;
    ++doc.token_counts[tok];
  }
  for (const auto& [cell, doc] : corpus.docs) {
    for (const auto& [term, n] : doc.token_counts) ++corpus.document_frequency[term];
  }
  return corpus;
}

struct TermScore {
  std::string term;
  double score{0.0};
};

/// score(t) = count_in_target(t) * ln(N_docs / df(t)); ties broken by term.
inline std::vector<TermScore> tfidf_top_k(const AnnotationCorpus& corpus, const CellKey& target, int k) {
  if (k <= 0) throw DomainError("k must be positive");
  const AnnotationDoc* doc = corpus.find(target);
  if (!doc) throw DomainError("no document for the requested cell");
  const double n_docs = static_cast<double>(corpus.docs.size());
  std::vector<TermScore> scored;
  for (const auto& [term, count] : doc->token_counts) {
    const double df = corpus.document_frequency.at(term);
    scored.push_back({term, count * std::log(n_docs / df)});
  }
  std::sort(scored.begin(), scored.end(), [](const TermScore& a, const TermScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.term < b.term;
  });
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
  return scored;
}

inline nlohmann::json to_json(const std::vector<TermScore>& terms) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : terms) arr.push_back({{"term", t.term}, {"score", t.score}});
  return arr;
}

}  // namespace urbanpulse
