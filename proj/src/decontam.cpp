#include "preftree/decontam.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <tuple>

#include "preftree/errors.hpp"

namespace preftree {

using nlohmann::json;

namespace {

// Decodes one UTF-8 sequence at s[i]. Returns the byte length, 0 when invalid.
std::size_t decode(std::string_view s, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len;
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    } else if ((b0 & 0xe0) == 0xc0) {
        cp = b0 & 0x1f;
        len = 2;
    } else if ((b0 & 0xf0) == 0xe0) {
        cp = b0 & 0x0f;
        len = 3;
    } else if ((b0 & 0xf8) == 0xf0) {
        cp = b0 & 0x07;
        len = 4;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xc0) != 0x80) return 0;
        cp = (cp << 6) | (b & 0x3f);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return 0;
    return len;
}

void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Whitespace, punctuation and symbol blocks; everything else counts as a word character.
bool is_separator(char32_t cp) {
    if (cp < 0x80) {
        return !((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z'));
    }
    if (cp == 0xaa || cp == 0xb5 || cp == 0xba) return false;
    return in(cp, 0x80, 0xbf) || cp == 0xd7 || cp == 0xf7 || cp == 0x1680 || in(cp, 0x2000, 0x2bff) ||
           in(cp, 0x2e00, 0x2e7f) || in(cp, 0x3000, 0x3003) || in(cp, 0x3008, 0x3020) || in(cp, 0xfe10, 0xfe6f) ||
           in(cp, 0xff01, 0xff0f) || in(cp, 0xff1a, 0xff20) || in(cp, 0xff3b, 0xff40) || in(cp, 0xff5b, 0xff65) ||
           cp == 0xfeff;
}

char32_t fold_case(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp < 0x80) return cp;
    if (in(cp, 0xc0, 0xde) && cp != 0xd7) return cp + 32;
    if (in(cp, 0x391, 0x3a9) && cp != 0x3a2) return cp + 32;
    if (in(cp, 0x410, 0x42f)) return cp + 32;
    if (in(cp, 0x400, 0x40f)) return cp + 80;
    if ((in(cp, 0x100, 0x137) || in(cp, 0x14a, 0x177)) && cp % 2 == 0 && cp != 0x130) return cp + 1;
    if ((in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17e)) && cp % 2 == 1) return cp + 1;
    if (in(cp, 0xff21, 0xff3a)) return cp + 32;
    return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size();) {
        char32_t cp = 0;
        std::size_t len = decode(text, i, cp);
        const bool sep = len == 0 || is_separator(cp);
        if (len == 0) len = 1;
        if (sep) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else if (cp < 0x80) {
            cur.push_back(static_cast<char>(fold_case(cp)));
        } else {
            encode(fold_case(cp), cur);
        }
        i += len;
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

json to_json(const MatchReport& r) {
    json matches = json::array();
    for (const auto& m : r.matches) {
        matches.push_back({{"test_doc", m.test_doc},
                           {"train_off", m.train_off},
                           {"test_off", m.test_off},
                           {"len", m.len},
                           {"kind", m.kind}});
    }
    return json{{"id", r.id}, {"contaminated", r.contaminated}, {"matches", matches}};
}

std::vector<Hash128> window_fingerprints(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<Hash128> out;
    if (n == 0 || tokens.size() < n) return out;
    std::vector<std::uint64_t> th(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) th[i] = hash64(tokens[i]);
    out.reserve(tokens.size() - n + 1);
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        out.push_back(murmur3_128(th.data() + i, n * sizeof(std::uint64_t), n));
    }
    return out;
}

namespace {

template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& f) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

bool same_window(const std::vector<std::string>& a, std::size_t ai, const std::vector<std::string>& b,
                 std::size_t bi, std::size_t n) {
    return std::equal(a.begin() + static_cast<std::ptrdiff_t>(ai), a.begin() + static_cast<std::ptrdiff_t>(ai + n),
                      b.begin() + static_cast<std::ptrdiff_t>(bi));
}

}  // namespace

NgramIndex NgramIndex::build(const std::vector<TestDoc>& docs, std::size_t n, std::size_t jobs, Tokenizer tokenizer) {
    if (n == 0) throw ConfigError("n-gram size must be at least 1");
    NgramIndex idx;
    idx.n_ = n;
    idx.tokenizer_ = std::move(tokenizer);
    idx.doc_ids_.reserve(docs.size());
    for (const auto& d : docs) idx.doc_ids_.push_back(d.id);
    idx.doc_tokens_.resize(docs.size());
    std::vector<std::vector<Hash128>> prints(docs.size());
    parallel_for(docs.size(), jobs, [&](std::size_t i) {
        idx.doc_tokens_[i] = idx.tokenizer_(docs[i].text);
        prints[i] = window_fingerprints(idx.doc_tokens_[i], n);
    });

    // Sequential merge keeps occurrence order independent of jobs.
    for (std::uint32_t d = 0; d < prints.size(); ++d) {
        for (std::uint32_t off = 0; off < prints[d].size(); ++off) {
            const auto slot = static_cast<std::uint32_t>(idx.occurrences_.size());
            auto [it, fresh] = idx.heads_.try_emplace(prints[d][off], slot, slot);
            idx.occurrences_.push_back({d, off, kEnd});
            if (!fresh) {
                idx.occurrences_[it->second.second].next = slot;
                it->second.second = slot;
            }
        }
        idx.windows_ += prints[d].size();
        prints[d].clear();
        prints[d].shrink_to_fit();
    }
    return idx;
}

MatchReport NgramIndex::check(const std::string& id, std::string_view text) const {
    MatchReport report;
    report.id = id;
    const auto tokens = tokenizer_(text);
    const auto prints = window_fingerprints(tokens, n_);

    // (doc, diagonal test_off - train_off, train_off) for each verified hit.
    std::vector<std::tuple<std::uint32_t, std::int64_t, std::size_t>> hits;
    for (std::size_t i = 0; i < prints.size(); ++i) {
        auto it = heads_.find(prints[i]);
        if (it == heads_.end()) continue;
        for (auto k = it->second.first; k != kEnd; k = occurrences_[k].next) {
            const auto& occ = occurrences_[k];
            if (!same_window(tokens, i, doc_tokens_[occ.doc], occ.offset, n_)) continue;
            hits.emplace_back(occ.doc, static_cast<std::int64_t>(occ.offset) - static_cast<std::int64_t>(i), i);
        }
    }
    std::sort(hits.begin(), hits.end());

    for (std::size_t a = 0; a < hits.size();) {
        std::size_t b = a + 1;
        while (b < hits.size() && std::get<0>(hits[b]) == std::get<0>(hits[a]) &&
               std::get<1>(hits[b]) == std::get<1>(hits[a]) && std::get<2>(hits[b]) == std::get<2>(hits[b - 1]) + 1) {
            ++b;
        }
        const auto [doc, diag, train_off] = hits[a];
        report.matches.push_back({doc_ids_[doc], train_off, static_cast<std::size_t>(diag + static_cast<std::int64_t>(train_off)),
                                  b - a + n_ - 1, "ngram"});
        a = b;
    }
    std::sort(report.matches.begin(), report.matches.end(), [](const Match& x, const Match& y) {
        return std::tie(x.train_off, x.test_doc, x.test_off) < std::tie(y.train_off, y.test_doc, y.test_off);
    });
    report.contaminated = !report.matches.empty();
    return report;
}

namespace {

constexpr std::uint64_t kMod = (1ULL << 61) - 1;
constexpr std::uint64_t kBase = 1'000'003;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
    const __uint128_t p = static_cast<__uint128_t>(a) * b;
    std::uint64_t r = static_cast<std::uint64_t>(p & kMod) + static_cast<std::uint64_t>(p >> 61);
    if (r >= kMod) r -= kMod;
    return r;
}

// Polynomial hashes of every length-w window.
std::vector<std::uint64_t> rolling(std::string_view s, std::size_t w) {
    std::vector<std::uint64_t> out;
    if (s.size() < w) return out;
    std::uint64_t top = 1;
    for (std::size_t i = 1; i < w; ++i) top = mulmod(top, kBase);
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < w; ++i) h = (mulmod(h, kBase) + static_cast<unsigned char>(s[i]) + 1) % kMod;
    out.push_back(h);
    for (std::size_t i = w; i < s.size(); ++i) {
        const std::uint64_t drop = mulmod(static_cast<unsigned char>(s[i - w]) + 1, top);
        h = (h + kMod - drop) % kMod;
        h = (mulmod(h, kBase) + static_cast<unsigned char>(s[i]) + 1) % kMod;
        out.push_back(h);
    }
    return out;
}

}  // namespace

std::vector<Match> substring_match(std::string_view train, const std::vector<TestDoc>& tests, std::size_t min_len) {
    if (min_len == 0) throw ConfigError("substring min_len must be at least 1");
    std::vector<Match> out;
    const auto train_h = rolling(train, min_len);
    for (const auto& doc : tests) {
        const std::string_view test = doc.text;
        const auto test_h = rolling(test, min_len);
        std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where;
        for (std::uint32_t j = 0; j < test_h.size(); ++j) where[test_h[j]].push_back(j);

        for (std::size_t i = 0; i < train_h.size(); ++i) {
            auto it = where.find(train_h[i]);
            if (it == where.end()) continue;
            for (const std::size_t j : it->second) {
                // Only left-maximal starts; each maximal pair has exactly one.
                if (i > 0 && j > 0 && train[i - 1] == test[j - 1]) continue;
                if (train.compare(i, min_len, test.substr(j, min_len)) != 0) continue;
                std::size_t len = min_len;
                while (i + len < train.size() && j + len < test.size() && train[i + len] == test[j + len]) ++len;
                out.push_back({doc.id, i, j, len, "substring"});
            }
        }
    }
    return out;
}

FilterResult filter_corpus(const std::vector<Instruction>& instructions,
                           const std::map<Task, std::vector<TestDoc>>& test_sets,
                           const std::vector<TestDoc>& code_corpus, const DecontamConfig& cfg) {
    for (const auto& inst : instructions) {
        if (!test_sets.count(inst.task)) {
            throw ConfigError("no test-set entry for task " + std::string(to_string(inst.task)));
        }
    }
    std::map<Task, NgramIndex> indexes;
    for (const auto& [task, docs] : test_sets) indexes.emplace(task, NgramIndex::build(docs, cfg.n, cfg.jobs));

    FilterResult result;
    result.reports.resize(instructions.size());
    parallel_for(instructions.size(), cfg.jobs, [&](std::size_t i) {
        const auto& inst = instructions[i];
        auto report = indexes.at(inst.task).check(inst.id, inst.prompt);
        if (inst.task == Task::Coding && !code_corpus.empty()) {
            // Code lives in the prompt and in reference solutions.
            std::string text = inst.prompt;
            for (const auto& s : inst.ground_truth.solutions) text += "\n" + s;
            for (auto& m : substring_match(text, code_corpus, cfg.min_len)) report.matches.push_back(std::move(m));
            report.contaminated = !report.matches.empty();
        }
        result.reports[i] = std::move(report);
    });
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        (result.reports[i].contaminated ? result.removed : result.kept).push_back(instructions[i]);
    }
    return result;
}

}  // namespace preftree
