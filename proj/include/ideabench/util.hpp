#pragma once

// Low-level helpers shared across the library: hashing, derived RNG streams,
// numeric reply parsing, string normalization and a bounded-parallelism map.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ideabench {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

namespace util {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : data) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

/// Hash an ordered list of parts into one seed. Parts are separated by a
/// NUL byte so ("ab","c") and ("a","bc") hash differently.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
    std::uint64_t h = kFnvOffset;
    for (int i = 0; i < 8; ++i) {
        h ^= (seed >> (8 * i)) & 0xFF;
        h *= kFnvPrime;
    }
    for (auto part : parts) {
        h = fnv1a64(part, h);
        h ^= 0;
        h *= kFnvPrime;
    }
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::initializer_list<std::string_view> parts = {}) {
    return std::mt19937_64(derive_seed(seed, parts));
}

/// Unbiased index in [0, n) via rejection sampling on the raw 64-bit stream.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    if (n == 0) throw ValidationError("uniform_index: n must be positive");
    if (n == 1) return 0;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    std::uint64_t r = rng();
    while (r > limit) r = rng();
    return static_cast<std::size_t>(r % n);
}

/// Uniform double in [0, 1) with 53 bits of entropy.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

/// Standard normal draw. Box-Muller on our own uniform01 stream so results
/// do not depend on the standard library's distribution internals.
inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// In-place Fisher-Yates shuffle driven by uniform_index, pinned across
/// standard library implementations.
template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

/// One categorical draw over non-negative weights (need not be normalized).
inline std::size_t sample_categorical(const std::vector<double>& weights, std::mt19937_64& rng) {
    if (weights.empty()) throw ValidationError("sample_categorical: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw ValidationError("sample_categorical: weights must be finite and >= 0");
        total += w;
    }
    if (total <= 0.0) throw ValidationError("sample_categorical: weights sum to zero");
    double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

/// First number appearing anywhere in `text`, or nullopt. Accepts plain
/// integers, decimals and exponent forms ("0.5", "-3", "85.", ".25").
inline std::optional<double> first_number(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool digit = std::isdigit(static_cast<unsigned char>(c)) != 0;
        bool lead = (c == '-' || c == '+' || c == '.') && i + 1 < text.size() &&
                    (std::isdigit(static_cast<unsigned char>(text[i + 1])) != 0 ||
                     (c != '.' && text[i + 1] == '.' && i + 2 < text.size() &&
                      std::isdigit(static_cast<unsigned char>(text[i + 2])) != 0));
        if (!digit && !lead) continue;
        std::string buf(text.substr(i, std::min<std::size_t>(64, text.size() - i)));
        char* end = nullptr;
        double v = std::strtod(buf.c_str(), &end);
        if (end != buf.c_str() && std::isfinite(v)) return v;
    }
    return std::nullopt;
}

/// Candidate-choice parsing for selector replies: the first numeral, or the
/// first cardinal/ordinal number word ("the second one" -> 2). Number words
/// match on word boundaries only.
inline std::optional<double> first_number_or_ordinal(std::string_view text) {
    struct Word {
        std::string_view word;
        double value;
    };
    static constexpr Word kWords[] = {
        {"first", 1},  {"second", 2}, {"third", 3},  {"fourth", 4}, {"fifth", 5},
        {"sixth", 6},  {"seventh", 7}, {"eighth", 8}, {"ninth", 9},  {"tenth", 10},
        {"one", 1},    {"two", 2},    {"three", 3},  {"four", 4},   {"five", 5},
        {"six", 6},    {"seven", 7},  {"eight", 8},  {"nine", 9},   {"ten", 10},
    };
    std::string lower;
    lower.reserve(text.size());
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    std::optional<double> best;
    std::size_t best_pos = std::string::npos;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(lower[i]))) {
            if (i < best_pos) {
                best = first_number(text.substr(i));
                best_pos = i;
            }
            break;
        }
    }
    auto is_word_char = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    for (const auto& w : kWords) {
        std::size_t pos = 0;
        while ((pos = lower.find(w.word, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
            bool right_ok = pos + w.word.size() >= lower.size() || !is_word_char(lower[pos + w.word.size()]);
            if (left_ok && right_ok) break;
            ++pos;
        }
        if (pos != std::string::npos && pos < best_pos) {
            best = w.value;
            best_pos = pos;
        }
    }
    return best;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Canonical text form used as the embedding cache key: lowercase, trimmed,
/// internal whitespace runs collapsed to single spaces.
inline std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Minimal CSV handling, quote-aware on both sides.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::vector<std::string> parse_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

template <typename R>
struct Outcome {
    std::optional<R> value;
    std::exception_ptr error;

    bool ok() const { return value.has_value(); }

    std::string error_message() const {
        if (!error) return {};
        try {
            std::rethrow_exception(error);
        } catch (const std::exception& e) {
            return e.what();
        } catch (...) {
            return "unknown error";
        }
    }
};

/// Apply `fn(item, index)` to every item with at most `bound` worker threads.
/// Results land at their input index; exceptions are captured per item.
/// A bound of 1 runs inline on the calling thread.
template <typename T, typename F>
auto parallel_map(const std::vector<T>& items, std::size_t bound, F fn)
    -> std::vector<Outcome<std::invoke_result_t<F, const T&, std::size_t>>> {
    using R = std::invoke_result_t<F, const T&, std::size_t>;
    std::vector<Outcome<R>> results(items.size());
    auto run_one = [&](std::size_t i) {
        try {
            results[i].value.emplace(fn(items[i], i));
        } catch (...) {
            results[i].error = std::current_exception();
        }
    };
    bound = std::max<std::size_t>(1, std::min(bound, items.size()));
    if (bound <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) run_one(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(bound);
    for (std::size_t w = 0; w < bound; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) run_one(i);
        });
    }
    for (auto& t : workers) t.join();
    return results;
}

}  // namespace util
}  // namespace ideabench
