#include "intopt/retrieval.hpp"

#include "intopt/error.hpp"
#include "intopt/log.hpp"
#include "intopt/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace intopt::retrieval {
namespace {

SparseVector weigh(const std::map<std::size_t, double>& counts, const std::vector<double>& idf) {
  SparseVector v;
  v.reserve(counts.size());
  double norm2 = 0.0;
  for (const auto& [dim, tf] : counts) {
    double w = tf * idf[dim];
    v.emplace_back(dim, w);
    norm2 += w * w;
  }
  if (norm2 > 0.0) {
    double norm = std::sqrt(norm2);
    for (auto& entry : v) entry.second /= norm;
  }
  return v;
}

}  // namespace

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<std::string> ngrams(std::string_view text, int min_n, int max_n) {
  auto w = words(text);
  std::vector<std::string> out;
  for (int n = min_n; n <= max_n; ++n) {
    for (size_t i = 0; i + static_cast<size_t>(n) <= w.size(); ++i) {
      std::string gram = w[i];
      for (int k = 1; k < n; ++k) gram += " " + w[i + static_cast<size_t>(k)];
      out.push_back(std::move(gram));
    }
  }
  return out;
}

TfIdfIndex TfIdfIndex::build(const kb::KnowledgeBase& kb, IndexConfig config) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto& [id, entry] : kb.entries) docs.emplace_back(id, entry.desc);
  return build(docs, config);
}

TfIdfIndex TfIdfIndex::build(const std::vector<std::pair<std::string, std::string>>& documents, IndexConfig config) {
  if (documents.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot index an empty knowledge base");
  TfIdfIndex index;
  index.config_ = config;

  std::vector<std::map<std::string, double>> term_counts;
  std::map<std::string, std::size_t> df;
  for (const auto& [id, text] : documents) {
    std::map<std::string, double> counts;
    for (auto& gram : ngrams(text, config.min_n, config.max_n)) counts[gram] += 1.0;
    for (const auto& [gram, _] : counts) ++df[gram];
    term_counts.push_back(std::move(counts));
  }
  // std::map iteration gives a lexicographic, deterministic vocabulary order.
  const double n_docs = static_cast<double>(documents.size());
  for (const auto& [gram, freq] : df) {
    index.vocabulary_.emplace(gram, index.idf_.size());
    index.idf_.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(freq))) + 1.0);
  }
  for (size_t d = 0; d < documents.size(); ++d) {
    std::map<std::size_t, double> counts;
    for (const auto& [gram, tf] : term_counts[d]) counts[index.vocabulary_.at(gram)] = tf;
    index.doc_vectors_[documents[d].first] = weigh(counts, index.idf_);
  }
  return index;
}

SparseVector TfIdfIndex::vectorize(std::string_view text) const {
  std::map<std::size_t, double> counts;
  for (const auto& gram : ngrams(text, config_.min_n, config_.max_n))
    if (auto it = vocabulary_.find(gram); it != vocabulary_.end()) counts[it->second] += 1.0;
  return weigh(counts, idf_);
}

double cosine(const SparseVector& a, const SparseVector& b) {
  auto norm = [](const SparseVector& v) {
    double n2 = 0.0;
    for (const auto& [_, w] : v) n2 += w * w;
    return std::sqrt(n2);
  };
  double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (a == b) return 1.0;
  double dot = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) dot += a[i++].second * b[j++].second;
    else if (a[i].first < b[j].first) ++i;
    else ++j;
  }
  return std::clamp(dot / (na * nb), 0.0, 1.0);
}

std::vector<RetrievalHit> retrieve(const TfIdfIndex& index, std::string_view action_text, int m) {
  if (m < 1) throw Error(ErrorKind::Precondition, "retrieve: m must be >= 1");
  auto query = index.vectorize(action_text);
  if (query.empty()) log::info("retrieval: query has no in-vocabulary n-grams: " + std::string(action_text));
  return retrieve(index, query, m);
}

std::vector<RetrievalHit> retrieve(const TfIdfIndex& index, const SparseVector& query, int m) {
  if (m < 1) throw Error(ErrorKind::Precondition, "retrieve: m must be >= 1");
  if (query.empty()) return {};
  std::vector<RetrievalHit> hits;
  hits.reserve(index.doc_vectors().size());
  for (const auto& [id, doc] : index.doc_vectors()) hits.push_back({id, cosine(query, doc), 0, false});
  auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pass_id < b.pass_id;
  };
  size_t keep = std::min(hits.size(), static_cast<size_t>(m));
  std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(keep), hits.end(), better);
  hits.resize(keep);
  for (size_t r = 0; r < hits.size(); ++r) {
    hits[r].rank = static_cast<int>(r + 1);
    hits[r].zero_score = hits[r].score == 0.0;
  }
  return hits;
}

AnalysisResolution resolve_analysis_set(const OptimizationStrategy& strategy, const TfIdfIndex& index,
                                        const kb::KnowledgeBase& kb, int m) {
  if (strategy.actions.empty()) throw Error(ErrorKind::Precondition, "resolve_analysis_set: empty strategy");
  AnalysisResolution out;
  for (const auto& action : strategy.actions) {
    ActionRetrieval ar;
    ar.query = action.query_text();
    ar.hits = retrieve(index, ar.query, m);
    for (const auto& hit : ar.hits) {
      if (hit.zero_score) log::info("retrieval miss (score 0) for action: " + ar.query + " -> " + hit.pass_id);
      if (const auto* entry = kb.find(hit.pass_id)) out.analyses.insert(entry->deps.begin(), entry->deps.end());
    }
    out.per_action.push_back(std::move(ar));
  }
  return out;
}

}  // namespace intopt::retrieval
