#include "agentorch/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agentorch/core_state.hpp"
#include "agentorch/errors.hpp"
#include "agentorch/redundancy.hpp"

namespace agentorch {

void Bm25Params::validate() const {
    if (!(k1 > 0.0) || !std::isfinite(k1)) throw InvalidInputError("bm25 k1 must be positive");
    if (!(b >= 0.0 && b <= 1.0)) throw InvalidInputError("bm25 b must lie in [0,1]");
}

Bm25Index Bm25Index::build(std::vector<Document> corpus, Bm25Params params) {
    params.validate();
    if (corpus.empty()) throw CorpusError("corpus is empty");

    Bm25Index index;
    index.params_ = params;
    index.docs_ = std::move(corpus);
    index.doc_len_.reserve(index.docs_.size());
    index.term_freq_.reserve(index.docs_.size());

    std::size_t total_len = 0;
    for (std::size_t d = 0; d < index.docs_.size(); ++d) {
        const Document& doc = index.docs_[d];
        if (!index.id_to_doc_.emplace(doc.id, d).second) {
            throw CorpusError("duplicate document id: " + doc.id);
        }
        const auto tokens = normalize_tokens(doc.title + "\n" + doc.body);
        std::unordered_map<std::string, int> tf;
        for (const auto& t : tokens) ++tf[t];
        // Postings are appended in document order, so each list stays sorted.
        std::vector<std::string> terms;
        terms.reserve(tf.size());
        for (const auto& [term, count] : tf) terms.push_back(term);
        std::sort(terms.begin(), terms.end());
        for (const auto& term : terms) {
            index.postings_[term].push_back({d, tf[term]});
            ++index.document_frequency_[term];
        }
        index.doc_len_.push_back(tokens.size());
        index.term_freq_.push_back(std::move(tf));
        total_len += tokens.size();
    }
    index.avgdl_ = static_cast<double>(total_len) / static_cast<double>(index.docs_.size());
    return index;
}

std::size_t Bm25Index::document_frequency(std::string_view term) const {
    auto it = document_frequency_.find(term);
    return it == document_frequency_.end() ? 0 : it->second;
}

std::size_t Bm25Index::doc_index(std::string_view doc_id) const {
    auto it = id_to_doc_.find(std::string(doc_id));
    if (it == id_to_doc_.end()) throw LookupError("unknown document id: " + std::string(doc_id));
    return it->second;
}

std::size_t Bm25Index::doc_length(std::string_view doc_id) const {
    return doc_len_[doc_index(doc_id)];
}

double Bm25Index::idf(std::string_view term) const {
    const double n = static_cast<double>(docs_.size());
    const double df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::term_score(std::string_view term, std::size_t doc, int tf) const {
    const double f = tf;
    // avgdl is zero only when every document is empty, in which case tf is 0.
    const double len_ratio = avgdl_ > 0.0 ? static_cast<double>(doc_len_[doc]) / avgdl_ : 0.0;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * len_ratio);
    return idf(term) * f * (params_.k1 + 1.0) / (f + norm);
}

double Bm25Index::score(std::span<const std::string> query_tokens, std::string_view doc_id) const {
    const std::size_t doc = doc_index(doc_id);
    const std::set<std::string_view> distinct(query_tokens.begin(), query_tokens.end());
    double total = 0.0;
    for (std::string_view term : distinct) {
        auto it = term_freq_[doc].find(std::string(term));
        if (it == term_freq_[doc].end()) continue;
        total += term_score(term, doc, it->second);
    }
    return total;
}

std::vector<RetrievalHit> Bm25Index::retrieve_top_k(std::string_view query, std::size_t k) const {
    if (k == 0) throw InvalidInputError("k must be >= 1");
    const auto tokens = normalize_tokens(query);
    const std::set<std::string> distinct(tokens.begin(), tokens.end());

    std::vector<double> scores(docs_.size(), 0.0);
    // Accumulate per term in sorted order so results are bit-reproducible.
    for (const auto& term : distinct) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        for (const Posting& p : it->second) scores[p.doc] += term_score(term, p.doc, p.tf);
    }

    std::vector<std::size_t> order;
    for (std::size_t d = 0; d < docs_.size(); ++d) {
        if (scores[d] > 0.0) order.push_back(d);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return docs_[a].id < docs_[b].id;
    });
    if (order.size() > k) order.resize(k);

    std::vector<RetrievalHit> hits;
    hits.reserve(order.size());
    for (std::size_t d : order) {
        hits.push_back({docs_[d].id, scores[d], docs_[d].title,
                        truncate_utf8(docs_[d].body, kSnippetChars)});
    }
    return hits;
}

nlohmann::json Bm25Index::to_json() const {
    nlohmann::json j;
    j["params"] = {{"k1", params_.k1}, {"b", params_.b}};
    j["doc_count"] = docs_.size();
    j["avgdl"] = avgdl_;
    j["vocabulary_size"] = document_frequency_.size();
    auto& docs = j["documents"] = nlohmann::json::array();
    for (std::size_t d = 0; d < docs_.size(); ++d) {
        docs.push_back({{"id", docs_[d].id}, {"title", docs_[d].title}, {"length", doc_len_[d]}});
    }
    auto& postings = j["postings"] = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
        auto& arr = postings[term] = nlohmann::json::array();
        for (const Posting& p : list) arr.push_back({docs_[p.doc].id, p.tf});
    }
    return j;
}

std::vector<Document> load_corpus_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw CorpusError("not a directory: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (files.empty()) throw CorpusError("corpus directory is empty: " + dir.string());
    std::sort(files.begin(), files.end());

    std::vector<Document> docs;
    docs.reserve(files.size());
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw CorpusError("cannot read " + file.string());
        std::string title;
        std::getline(in, title);
        if (!title.empty() && title.back() == '\r') title.pop_back();
        std::ostringstream body;
        body << in.rdbuf();
        if (in.bad()) throw CorpusError("cannot read " + file.string());
        docs.push_back({file.filename().string(), std::move(title), body.str()});
    }
    return docs;
}

}  // namespace agentorch
