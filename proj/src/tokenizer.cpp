#include "zsmad/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/ustring.h>
#include <unicode/utf8.h>

#include "io_util.hpp"
#include "zsmad/errors.hpp"

namespace zsmad {

namespace {

constexpr std::string_view kEndOfWord = "</w>";

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, c);
    out.append(buf, static_cast<size_t>(n));
}

// Printable bytes map to themselves; the rest to code points from U+0100 on.
struct ByteTable {
    std::array<std::string, 256> symbol;  // byte -> UTF-8 symbol
    std::vector<uint8_t> order;           // vocabulary order of the base bytes
    std::map<UChar32, uint8_t> decode;

    ByteTable() {
        std::vector<int> printable;
        for (int b = '!'; b <= '~'; ++b) printable.push_back(b);
        for (int b = 0xA1; b <= 0xAC; ++b) printable.push_back(b);
        for (int b = 0xAE; b <= 0xFF; ++b) printable.push_back(b);
        std::array<UChar32, 256> cp{};
        std::array<bool, 256> seen{};
        for (int b : printable) {
            cp[static_cast<size_t>(b)] = b;
            seen[static_cast<size_t>(b)] = true;
            order.push_back(static_cast<uint8_t>(b));
        }
        int n = 0;
        for (int b = 0; b < 256; ++b) {
            if (seen[static_cast<size_t>(b)]) continue;
            cp[static_cast<size_t>(b)] = 256 + n++;
            order.push_back(static_cast<uint8_t>(b));
        }
        for (int b = 0; b < 256; ++b) {
            append_utf8(symbol[static_cast<size_t>(b)], cp[static_cast<size_t>(b)]);
            decode[cp[static_cast<size_t>(b)]] = static_cast<uint8_t>(b);
        }
    }
};

const ByteTable& bytes() {
    static const ByteTable table;
    return table;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) || (c >= 0x1C && c <= 0x1F); }
bool is_letter(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_L_MASK) != 0; }
bool is_number(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_N_MASK) != 0; }

std::u16string to_utf16(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    int32_t len = 0;
    u_strFromUTF8WithSub(nullptr, 0, &len, s.data(), static_cast<int32_t>(s.size()), 0xFFFD, nullptr, &status);
    std::u16string out(static_cast<size_t>(len), u'\0');
    status = U_ZERO_ERROR;
    u_strFromUTF8WithSub(out.data(), len, nullptr, s.data(), static_cast<int32_t>(s.size()), 0xFFFD, nullptr, &status);
    if (U_FAILURE(status)) throw std::runtime_error(std::string("UTF-8 conversion failed: ") + u_errorName(status));
    return out;
}

std::string to_utf8(const std::u16string& s) {
    UErrorCode status = U_ZERO_ERROR;
    int32_t len = 0;
    u_strToUTF8(nullptr, 0, &len, s.data(), static_cast<int32_t>(s.size()), &status);
    std::string out(static_cast<size_t>(len), '\0');
    status = U_ZERO_ERROR;
    u_strToUTF8(out.data(), len, nullptr, s.data(), static_cast<int32_t>(s.size()), &status);
    if (U_FAILURE(status)) throw std::runtime_error(std::string("UTF-16 conversion failed: ") + u_errorName(status));
    return out;
}

std::vector<UChar32> code_points(std::string_view s) {
    std::vector<UChar32> out;
    int32_t i = 0;
    const auto n = static_cast<int32_t>(s.size());
    while (i < n) {
        UChar32 c;
        U8_NEXT(s.data(), i, n, c);
        out.push_back(c < 0 ? 0xFFFD : c);
    }
    return out;
}

// Contractions first, then letter runs, single digits, other-symbol runs.
constexpr std::string_view kSotMarker = "<start_of_text>";
constexpr std::string_view kEotMarker = "<end_of_text>";

std::vector<std::string> pre_tokenize(std::string_view normalized) {
    static constexpr std::array<std::u32string_view, 9> kLiterals = {
        U"<start_of_text>", U"<end_of_text>", U"'s", U"'t", U"'re", U"'ve", U"'m", U"'ll", U"'d"};
    const std::vector<UChar32> cps = code_points(normalized);
    std::vector<std::string> pieces;
    size_t i = 0;
    while (i < cps.size()) {
        const UChar32 c = cps[i];
        if (is_space(c)) {
            ++i;
            continue;
        }
        size_t end = i + 1;
        bool matched = false;
        for (auto k : kLiterals) {
            if (i + k.size() <= cps.size() && std::equal(k.begin(), k.end(), cps.begin() + static_cast<ptrdiff_t>(i))) {
                end = i + k.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            if (is_letter(c)) {
                while (end < cps.size() && is_letter(cps[end])) ++end;
            } else if (!is_number(c)) {
                while (end < cps.size() && !is_space(cps[end]) && !is_letter(cps[end]) && !is_number(cps[end])) ++end;
            }
        }
        std::string piece;
        for (size_t k = i; k < end; ++k) append_utf8(piece, cps[k]);
        pieces.push_back(std::move(piece));
        i = end;
    }
    return pieces;
}

// Splits a byte-mapped word into symbols, suffixing the last one.
std::vector<std::string> initial_symbols(std::string_view piece) {
    std::vector<std::string> word;
    for (unsigned char b : piece) word.push_back(bytes().symbol[b]);
    if (!word.empty()) word.back() += kEndOfWord;
    return word;
}

std::vector<std::string> apply_merge(const std::vector<std::string>& word, const std::string& first, const std::string& second) {
    std::vector<std::string> out;
    out.reserve(word.size());
    size_t i = 0;
    while (i < word.size()) {
        if (i + 1 < word.size() && word[i] == first && word[i + 1] == second) {
            out.push_back(first + second);
            i += 2;
        } else {
            out.push_back(word[i]);
            ++i;
        }
    }
    return out;
}

std::vector<std::string> bpe(std::vector<std::string> word, const Vocabulary& vocab) {
    while (word.size() > 1) {
        int best_rank = -1;
        size_t best = 0;
        for (size_t i = 0; i + 1 < word.size(); ++i) {
            const int r = vocab.merge_rank(word[i], word[i + 1]);
            if (r >= 0 && (best_rank < 0 || r < best_rank)) {
                best_rank = r;
                best = i;
            }
        }
        if (best_rank < 0) break;
        word = apply_merge(word, std::string(word[best]), std::string(word[best + 1]));
    }
    return word;
}

std::vector<std::string> byte_level_tokens(const std::vector<Vocabulary::Merge>& merges) {
    std::vector<std::string> tokens;
    tokens.reserve(512 + merges.size() + 2);
    for (uint8_t b : bytes().order) tokens.push_back(bytes().symbol[b]);
    for (uint8_t b : bytes().order) tokens.push_back(bytes().symbol[b] + std::string(kEndOfWord));
    for (const auto& [a, b] : merges) tokens.push_back(a + b);
    tokens.emplace_back("<|startoftext|>");
    tokens.emplace_back("<|endoftext|>");
    return tokens;
}

std::string rank_key(std::string_view a, std::string_view b) {
    std::string key;
    key.reserve(a.size() + b.size() + 1);
    key.append(a).append(" ").append(b);
    return key;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> id_to_token, std::vector<Merge> merges, int context_length)
    : id_to_token_(std::move(id_to_token)), merges_(std::move(merges)), context_length_(context_length) {
    if (context_length_ < 2) throw VocabError(fmt::format("context length {} leaves no room for markers", context_length_));
    token_to_id_.reserve(id_to_token_.size());
    for (size_t i = 0; i < id_to_token_.size(); ++i) {
        if (!token_to_id_.emplace(id_to_token_[i], static_cast<int32_t>(i)).second) {
            throw VocabError(fmt::format("token '{}' appears twice", id_to_token_[i]));
        }
    }
    for (const auto& [start, end] : {std::pair{"<|startoftext|>", "<|endoftext|>"}, std::pair{"<start_of_text>", "<end_of_text>"}}) {
        if (sot_id_ < 0 && token_to_id_.contains(start) && token_to_id_.contains(end)) {
            sot_id_ = token_to_id_.at(start);
            eot_id_ = token_to_id_.at(end);
        }
    }
    if (sot_id_ < 0) throw VocabError("vocabulary lacks start/end-of-text tokens");
    for (const auto& sym : bytes().symbol) {
        if (!token_to_id_.contains(sym) || !token_to_id_.contains(sym + std::string(kEndOfWord))) {
            throw VocabError("vocabulary lacks a byte-level base symbol");
        }
    }
    ranks_.reserve(merges_.size());
    for (size_t r = 0; r < merges_.size(); ++r) {
        const auto& [a, b] = merges_[r];
        if (!token_to_id_.contains(a) || !token_to_id_.contains(b)) {
            throw VocabError(fmt::format("merge {} '{} {}' references an unknown token", r + 1, a, b));
        }
        if (!token_to_id_.contains(a + b)) {
            throw VocabError(fmt::format("merge {} '{} {}' yields a token missing from the vocabulary", r + 1, a, b));
        }
        if (!ranks_.emplace(rank_key(a, b), static_cast<int>(r)).second) {
            throw VocabError(fmt::format("merge {} '{} {}' is repeated", r + 1, a, b));
        }
    }
}

Vocabulary Vocabulary::from_merges(std::vector<Merge> merges, int context_length) {
    auto tokens = byte_level_tokens(merges);
    return Vocabulary(std::move(tokens), std::move(merges), context_length);
}

int32_t Vocabulary::id(const std::string& token) const {
    const auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

int Vocabulary::merge_rank(std::string_view a, std::string_view b) const {
    const auto it = ranks_.find(rank_key(a, b));
    return it == ranks_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path) const {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (size_t i = 0; i < id_to_token_.size(); ++i) doc[id_to_token_[i]] = i;
    detail::write_file(vocab_path, doc.dump() + "\n");
    std::string text = "#version: 0.2\n";
    for (const auto& [a, b] : merges_) text += a + " " + b + "\n";
    detail::write_file(merges_path, text);
}

Vocabulary load_vocab(const std::filesystem::path& vocab_path, const std::filesystem::path& merges_path,
                      int context_length) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(detail::read_file(vocab_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw VocabError(vocab_path.filename().string() + ": " + e.what());
    }
    if (!doc.is_object()) throw VocabError(vocab_path.filename().string() + ": expected a token -> id object");
    std::vector<std::string> tokens(doc.size());
    std::vector<bool> filled(doc.size(), false);
    for (const auto& [token, value] : doc.items()) {
        if (!value.is_number_integer()) throw VocabError(fmt::format("token '{}' has a non-integer id", token));
        const auto id = value.get<int64_t>();
        if (id < 0 || id >= static_cast<int64_t>(tokens.size())) {
            throw VocabError(fmt::format("token '{}' has id {} outside [0, {})", token, id, tokens.size()));
        }
        if (filled[static_cast<size_t>(id)]) throw VocabError(fmt::format("id {} assigned twice", id));
        filled[static_cast<size_t>(id)] = true;
        tokens[static_cast<size_t>(id)] = token;
    }

    std::vector<Vocabulary::Merge> merges;
    const std::string text = detail::read_file(merges_path);
    std::string_view rest = text;
    for (size_t line_no = 1; !rest.empty(); ++line_no) {
        const size_t nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || (line_no == 1 && line.starts_with("#version"))) continue;
        const size_t sp = line.find(' ');
        if (sp == 0 || sp == std::string_view::npos || sp + 1 == line.size() ||
            line.find(' ', sp + 1) != std::string_view::npos) {
            throw VocabError(fmt::format("{}:{}: expected two space-separated symbols", merges_path.filename().string(), line_no));
        }
        merges.emplace_back(std::string(line.substr(0, sp)), std::string(line.substr(sp + 1)));
    }
    return Vocabulary(std::move(tokens), std::move(merges), context_length);
}

std::string normalize_text(std::string_view text) {
    const std::u16string wide = to_utf16(text);
    std::u16string collapsed;
    collapsed.reserve(wide.size());
    int32_t i = 0;
    const auto n = static_cast<int32_t>(wide.size());
    bool pending_space = false;
    while (i < n) {
        UChar32 c;
        U16_NEXT(wide.data(), i, n, c);
        if (is_space(c)) {
            pending_space = !collapsed.empty();
            continue;
        }
        if (pending_space) collapsed.push_back(u' ');
        pending_space = false;
        if (U_IS_BMP(c)) {
            collapsed.push_back(static_cast<char16_t>(c));
        } else {
            collapsed.push_back(static_cast<char16_t>(U16_LEAD(c)));
            collapsed.push_back(static_cast<char16_t>(U16_TRAIL(c)));
        }
    }
    UErrorCode status = U_ZERO_ERROR;
    const int32_t len = u_strToLower(nullptr, 0, collapsed.data(), static_cast<int32_t>(collapsed.size()), "", &status);
    std::u16string lower(static_cast<size_t>(len), u'\0');
    status = U_ZERO_ERROR;
    u_strToLower(lower.data(), len, collapsed.data(), static_cast<int32_t>(collapsed.size()), "", &status);
    if (U_FAILURE(status)) throw std::runtime_error(std::string("lowercasing failed: ") + u_errorName(status));
    return to_utf8(lower);
}

std::vector<int32_t> encode_content(std::string_view text, const Vocabulary& vocab) {
    std::vector<int32_t> ids;
    for (const auto& piece : pre_tokenize(normalize_text(text))) {
        if (piece == kSotMarker || piece == kEotMarker) {
            ids.push_back(piece == kSotMarker ? vocab.sot_id() : vocab.eot_id());
            continue;
        }
        for (const auto& sym : bpe(initial_symbols(piece), vocab)) ids.push_back(vocab.id(sym));
    }
    return ids;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
    const auto content = encode_content(text, vocab);
    const auto slots = static_cast<size_t>(vocab.context_length());
    TokenSequence seq;
    seq.ids.assign(slots, 0);
    seq.ids[0] = vocab.sot_id();
    const size_t kept = std::min(content.size(), slots - 2);
    std::copy_n(content.begin(), kept, seq.ids.begin() + 1);
    seq.ids[kept + 1] = vocab.eot_id();
    seq.content_len = static_cast<int>(kept + 2);
    return seq;
}

std::string detokenize(std::span<const int64_t> ids, const Vocabulary& vocab) {
    std::string joined;
    for (int64_t id : ids) {
        if (id == vocab.sot_id() || id == vocab.eot_id()) continue;
        if (id < 0 || id >= static_cast<int64_t>(vocab.size())) throw VocabError(fmt::format("token id {} out of range", id));
        joined += vocab.token(static_cast<int32_t>(id));
    }
    std::string raw;
    for (UChar32 c : code_points(joined)) {
        const auto it = bytes().decode.find(c);
        if (it == bytes().decode.end()) throw VocabError("token holds a symbol outside the byte alphabet");
        raw.push_back(static_cast<char>(it->second));
    }
    std::string text = to_utf8(to_utf16(raw));
    std::string out;
    for (size_t pos = 0;;) {
        const size_t hit = text.find(kEndOfWord, pos);
        out.append(text, pos, hit == std::string::npos ? std::string::npos : hit - pos);
        if (hit == std::string::npos) break;
        out.push_back(' ');
        pos = hit + kEndOfWord.size();
    }
    return out;
}

std::vector<Vocabulary::Merge> learn_merges(std::span<const std::string> corpus, int max_merges) {
    std::map<std::vector<std::string>, long> words;
    for (const auto& text : corpus) {
        for (const auto& piece : pre_tokenize(normalize_text(text))) {
            if (piece != kSotMarker && piece != kEotMarker) ++words[initial_symbols(piece)];
        }
    }
    std::set<std::string> known;
    for (const auto& t : byte_level_tokens({})) known.insert(t);
    std::vector<Vocabulary::Merge> merges;
    while (static_cast<int>(merges.size()) < max_merges) {
        std::map<Vocabulary::Merge, long> pairs;
        for (const auto& [word, count] : words) {
            for (size_t i = 0; i + 1 < word.size(); ++i) pairs[{word[i], word[i + 1]}] += count;
        }
        const Vocabulary::Merge* best = nullptr;
        long best_count = 0;
        for (const auto& [pair, count] : pairs) {
            if (count > best_count && !known.contains(pair.first + pair.second)) {
                best = &pair;
                best_count = count;
            }
        }
        if (!best) break;
        const Vocabulary::Merge merge = *best;
        known.insert(merge.first + merge.second);
        std::map<std::vector<std::string>, long> next;
        for (const auto& [word, count] : words) next[apply_merge(word, merge.first, merge.second)] += count;
        words = std::move(next);
        merges.push_back(merge);
    }
    return merges;
}

}  // namespace zsmad
