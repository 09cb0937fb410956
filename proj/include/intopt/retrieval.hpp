#pragma once

#include "intopt/knowledge_base.hpp"

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace intopt {
struct OptimizationStrategy;
}

namespace intopt::retrieval {

// Sparse vector: (dimension, weight) sorted by dimension.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

// Lowercased alphanumeric words.
std::vector<std::string> words(std::string_view text);
// Word n-grams for n in [min_n, max_n], joined with a single space.
std::vector<std::string> ngrams(std::string_view text, int min_n = 1, int max_n = 3);

struct IndexConfig {
  int min_n = 1;
  int max_n = 3;
  std::string weighting = "raw-tf*smooth-idf,l2";
};

// TF-IDF over knowledge-base descriptions. Term frequency is the raw count,
// idf = ln((1 + N) / (1 + df)) + 1, vectors are L2-normalized.
class TfIdfIndex {
 public:
  static TfIdfIndex build(const kb::KnowledgeBase& kb, IndexConfig config = {});
  static TfIdfIndex build(const std::vector<std::pair<std::string, std::string>>& documents, IndexConfig config = {});

  const std::map<std::string, std::size_t>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& idf() const { return idf_; }
  const std::map<std::string, SparseVector>& doc_vectors() const { return doc_vectors_; }
  const IndexConfig& config() const { return config_; }

  // Normalized query vector; empty when no n-gram is in the vocabulary.
  SparseVector vectorize(std::string_view text) const;

 private:
  IndexConfig config_;
  std::map<std::string, std::size_t> vocabulary_;
  std::vector<double> idf_;
  std::map<std::string, SparseVector> doc_vectors_;
};

struct RetrievalHit {
  std::string pass_id;
  double score = 0.0;
  int rank = 0;
  bool zero_score = false;  // retrieval miss kept only because top-m is unconditional
};

// Cosine similarity clamped to [0, 1]; identical vectors score exactly 1 and
// a zero vector scores 0.
double cosine(const SparseVector& a, const SparseVector& b);

// Top-m passes by cosine similarity, ties broken by ascending pass id.
// Returns an empty list for a query with no in-vocabulary n-gram.
std::vector<RetrievalHit> retrieve(const TfIdfIndex& index, std::string_view action_text, int m = 3);
// Same ranking for an already vectorized query; the query need not be normalized.
std::vector<RetrievalHit> retrieve(const TfIdfIndex& index, const SparseVector& query, int m = 3);

struct ActionRetrieval {
  std::string query;
  std::vector<RetrievalHit> hits;
};

struct AnalysisResolution {
  std::set<std::string> analyses;
  std::vector<ActionRetrieval> per_action;
};

// Union of the analysis dependencies of every action's top-m passes.
AnalysisResolution resolve_analysis_set(const OptimizationStrategy& strategy, const TfIdfIndex& index,
                                        const kb::KnowledgeBase& kb, int m = 3);

}  // namespace intopt::retrieval
