#ifndef KNOWRL_TEXT_HPP_
#define KNOWRL_TEXT_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// ASCII-only text helpers. Bytes >= 0x80 pass through untouched, so UTF-8
// input is never split inside a code point.
namespace knowrl::text {

bool is_space(char c);
bool is_punct(char c);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);
std::size_t count_whitespace_tokens(std::string_view s);

// Lowercased whitespace tokens with leading/trailing punctuation removed;
// tokens that become empty are dropped. Used by the embedder and verifier.
std::vector<std::string> word_tokens(std::string_view s);

// Lowercase, trim, collapse whitespace runs, strip trailing '?'/'.'.
// normalize_question(normalize_question(x)) == normalize_question(x).
std::string normalize_question(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

bool contains_ci(std::string_view haystack, std::string_view needle);

}  // namespace knowrl::text

#endif  // KNOWRL_TEXT_HPP_
