#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace agentorch {

struct Document {
    std::string id;
    std::string title;
    std::string body;
};

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;

    void validate() const;
};

struct RetrievalHit {
    std::string doc_id;
    double score = 0.0;
    std::string title;
    std::string snippet;
};

inline constexpr std::size_t kSnippetChars = 1500;

/// Okapi BM25 over an in-memory corpus. Immutable once built, so a single
/// index can serve concurrent episodes.
class Bm25Index {
public:
    /// Throws CorpusError on an empty corpus or duplicate ids.
    static Bm25Index build(std::vector<Document> corpus, Bm25Params params = {});

    std::size_t doc_count() const { return docs_.size(); }
    double avgdl() const { return avgdl_; }
    std::size_t vocabulary_size() const { return document_frequency_.size(); }
    const Bm25Params& params() const { return params_; }
    const std::vector<Document>& documents() const { return docs_; }

    std::size_t document_frequency(std::string_view term) const;
    std::size_t doc_length(std::string_view doc_id) const;

    /// ln(1 + (N - df + 0.5) / (df + 0.5))
    double idf(std::string_view term) const;

    /// Throws LookupError when `doc_id` is not indexed.
    double score(std::span<const std::string> query_tokens, std::string_view doc_id) const;

    /// Descending score, ascending id on ties; zero scores are dropped.
    std::vector<RetrievalHit> retrieve_top_k(std::string_view query, std::size_t k) const;

    nlohmann::json to_json() const;

private:
    struct Posting {
        std::size_t doc;
        int tf;
    };

    std::size_t doc_index(std::string_view doc_id) const;
    double term_score(std::string_view term, std::size_t doc, int tf) const;

    Bm25Params params_;
    std::vector<Document> docs_;
    std::vector<std::size_t> doc_len_;
    std::vector<std::unordered_map<std::string, int>> term_freq_;
    std::unordered_map<std::string, std::size_t> id_to_doc_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::map<std::string, std::size_t, std::less<>> document_frequency_;
    double avgdl_ = 0.0;
};

/// One document per regular file: filename is the id, the first line the
/// title, the remainder the body. Files are read in filename order.
std::vector<Document> load_corpus_directory(const std::filesystem::path& dir);

}  // namespace agentorch
