#include "hsd/textprep.hpp"

#include <algorithm>
#include <sstream>

#include "hsd/embed.hpp"
#include "hsd/error.hpp"
#include "hsd/kvconfig.hpp"

namespace hsd::text {

namespace detail {
std::string_view stopwords_resource();
std::string_view contractions_resource();
}  // namespace detail

namespace {

template <typename F>
void for_each_resource_line(std::string_view content, F&& f) {
    std::istringstream in{std::string(content)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        f(line);
    }
}

bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_ascii_punct(char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u);
}

// U+2019 RIGHT SINGLE QUOTATION MARK, used as an apostrophe in tweets.
constexpr std::string_view kCurlyApostrophe = "\xE2\x80\x99";

// Typographic punctuation treated like ASCII punctuation.
constexpr std::string_view kUnicodePunct[] = {
    "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C", "\xE2\x80\x9D",  // quotes
    "\xE2\x80\xA6",                                                  // ellipsis
    "\xE2\x80\x93", "\xE2\x80\x94",                                  // dashes
};

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (ascii_lower(s[i]) != prefix[i]) return false;
    }
    return true;
}

std::string strip_punct(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_space(text[i])) {
            out.push_back(' ');
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < text.size() && !is_space(text[end])) ++end;
        std::string_view chunk = text.substr(i, end - i);
        i = end;

        if (starts_with_ci(chunk, "http://") || starts_with_ci(chunk, "https://") || starts_with_ci(chunk, "www.") ||
            chunk.front() == '@') {
            out.push_back(' ');
            continue;
        }
        for (std::size_t k = 0; k < chunk.size();) {
            bool matched = false;
            for (auto p : kUnicodePunct) {
                if (chunk.substr(k, p.size()) == p) {
                    out.push_back(' ');
                    k += p.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            out.push_back(is_ascii_punct(chunk[k]) ? ' ' : chunk[k]);
            ++k;
        }
    }
    return out;
}

}  // namespace

std::set<std::string, std::less<>> bundled_stopwords() {
    std::set<std::string, std::less<>> out;
    for_each_resource_line(detail::stopwords_resource(), [&](const std::string& line) { out.insert(trim(line)); });
    return out;
}

ContractionTable bundled_contractions() {
    ContractionTable out;
    for_each_resource_line(detail::contractions_resource(), [&](const std::string& line) {
        auto tab = line.find('\t');
        if (tab == std::string::npos) return;
        out.emplace(trim(line.substr(0, tab)), trim(line.substr(tab + 1)));
    });
    return out;
}

void PipelineConfig::validate() const {
    for (auto neg : kNegators) {
        if (stopwords.contains(neg)) {
            throw ValidationError("stopword list must not contain the negator '" + std::string(neg) + "'");
        }
    }
    if (max_len < 1) throw ValidationError("max_len must be >= 1");
}

nlohmann::json to_json(const PipelineConfig& c) {
    return {
        {"lowercase", c.lowercase},
        {"expand_contractions", c.expand_contractions},
        {"strip_punctuation", c.strip_punctuation},
        {"stopwords", std::vector<std::string>(c.stopwords.begin(), c.stopwords.end())},
        {"contractions", c.contractions},
        {"max_len", c.max_len},
        {"resource_version", kResourceVersion},
    };
}

PipelineConfig pipeline_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        c.lowercase = j.at("lowercase").get<bool>();
        c.expand_contractions = j.at("expand_contractions").get<bool>();
        c.strip_punctuation = j.at("strip_punctuation").get<bool>();
        auto sw = j.at("stopwords").get<std::vector<std::string>>();
        c.stopwords = {sw.begin(), sw.end()};
        c.contractions.clear();
        for (const auto& [k, v] : j.at("contractions").items()) c.contractions.emplace(k, v.get<std::string>());
        c.max_len = j.at("max_len").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string expand_contractions(std::string_view text, const ContractionTable& table) {
    std::string out;
    out.reserve(text.size() + 16);

    auto word_char_len = [&](std::size_t pos) -> std::size_t {
        if (is_ascii_letter(text[pos]) || text[pos] == '\'') return 1;
        if (text.substr(pos, kCurlyApostrophe.size()) == kCurlyApostrophe) return kCurlyApostrophe.size();
        return 0;
    };

    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t len = word_char_len(i);
        if (len == 0) {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t end = i;
        while (end < text.size() && (len = word_char_len(end)) > 0) end += len;
        std::string_view run = text.substr(i, end - i);
        i = end;

        // Leading/trailing quote marks are not part of the word.
        std::size_t b = 0, e = run.size();
        auto apostrophe_at = [&](std::size_t pos) -> std::size_t {
            if (run[pos] == '\'') return 1;
            if (run.substr(pos, 3) == kCurlyApostrophe) return 3;
            return 0;
        };
        while (b < e) {
            std::size_t a = apostrophe_at(b);
            if (a == 0) break;
            b += a;
        }
        while (e > b) {
            if (run[e - 1] == '\'') {
                --e;
            } else if (e - b >= 3 && run.substr(e - 3, 3) == kCurlyApostrophe) {
                e -= 3;
            } else {
                break;
            }
        }

        std::string key;
        for (std::size_t k = b; k < e;) {
            std::size_t a = apostrophe_at(k);
            if (a > 0) {
                key.push_back('\'');
                k += a;
            } else {
                key.push_back(ascii_lower(run[k++]));
            }
        }
        auto it = table.find(key);
        out.append(run.substr(0, b));
        if (it != table.end()) {
            out.append(it->second);
        } else {
            out.append(run.substr(b, e - b));
        }
        out.append(run.substr(e));
    }
    return out;
}

TokenSequence preprocess(std::string_view text, const PipelineConfig& config) {
    std::string s = config.expand_contractions ? expand_contractions(text, config.contractions) : std::string(text);
    if (config.lowercase) std::transform(s.begin(), s.end(), s.begin(), ascii_lower);
    if (config.strip_punctuation) s = strip_punct(s);

    TokenSequence tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) {
            std::string tok = s.substr(start, i - start);
            if (!config.stopwords.contains(tok)) tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

std::string join(const TokenSequence& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::vector<std::int32_t> encode(const TokenSequence& seq, const embed::Vocabulary& vocab, int max_len) {
    if (max_len < 1) throw ValidationError("encode: max_len must be >= 1");
    std::vector<std::int32_t> out(static_cast<std::size_t>(max_len), kPadIndex);
    std::size_t n = std::min(seq.size(), out.size());
    for (std::size_t i = 0; i < n; ++i) out[i] = vocab.index_of(seq[i]);
    return out;
}

}  // namespace hsd::text
