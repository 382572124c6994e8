#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace zsmad {

// Byte-level BPE vocabulary: 256 byte symbols, the same with an end-of-word
// suffix, one token per merge, then the start/end-of-text specials.
class Vocabulary {
public:
    using Merge = std::pair<std::string, std::string>;

    // Validates and indexes the tables. Throws VocabError.
    Vocabulary(std::vector<std::string> id_to_token, std::vector<Merge> merges, int context_length = 77);

    // Standard byte-level layout for a merge list; ids follow list order.
    static Vocabulary from_merges(std::vector<Merge> merges, int context_length = 77);

    std::size_t size() const { return id_to_token_.size(); }
    int32_t sot_id() const { return sot_id_; }
    int32_t eot_id() const { return eot_id_; }
    int context_length() const { return context_length_; }
    const std::vector<Merge>& merges() const { return merges_; }
    const std::string& token(int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
    int32_t id(const std::string& token) const;  // -1 when absent
    int merge_rank(std::string_view a, std::string_view b) const;  // -1 when no rule

    // Writes vocab.json (token -> id) and merges.txt (with a version header).
    void save(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path) const;

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int32_t> token_to_id_;
    std::vector<Merge> merges_;
    std::unordered_map<std::string, int> ranks_;
    int32_t sot_id_ = -1;
    int32_t eot_id_ = -1;
    int context_length_ = 77;
};

// Throws IoError or VocabError (duplicate or gapped ids, malformed merge line,
// merge over unknown tokens, missing specials or byte symbols).
Vocabulary load_vocab(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path,
                      int context_length = 77);

struct TokenSequence {
    std::vector<int64_t> ids;  // length context_length, zero padded
    int content_len = 0;       // occupied slots, start and end markers included
    bool operator==(const TokenSequence&) const = default;
};

// Lowercase and collapse whitespace, the normalisation tokenize applies.
std::string normalize_text(std::string_view text);

// BPE ids of the normalised text, no markers, no truncation.
std::vector<int32_t> encode_content(std::string_view text, const Vocabulary& vocab);

// SOT + content + EOT in context_length slots. Overlong content is cut so EOT
// still occupies the last slot.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

// Inverse of encode_content up to normalisation. Takes content ids; SOT and
// EOT are skipped. Every word ends in a space, as the end-of-word marker decodes to one.
std::string detokenize(std::span<const int64_t> ids, const Vocabulary& vocab);

// Greedy BPE learner over the normalised corpus: repeatedly fuses the most
// frequent adjacent pair (lexicographically smallest on ties).
std::vector<Vocabulary::Merge> learn_merges(std::span<const std::string> corpus, int max_merges);

}  // namespace zsmad
