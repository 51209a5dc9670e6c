#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sentipipe::util {

// Deterministic PRNG used everywhere randomness is needed. Pure integer
// arithmetic, so streams are identical across platforms and runs.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next();
    double next_unit();       // [0, 1)
    double next_symmetric();  // [-1, 1)
    std::uint64_t bounded(std::uint64_t n);  // [0, n), n > 0
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64(std::string_view text);

// Shortest round-trip decimal form, locale-independent.
std::string fmt_double(double v);
std::string fmt_float(float v);
double parse_double(std::string_view text);  // throws std::invalid_argument

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

std::string base64_encode(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);  // IoError
std::string read_file_text(const std::string& path);                 // IoError
void write_file(const std::string& path, std::string_view data);     // IoError

// Decodes the UTF-8 sequence starting at byte i. Returns (codepoint,
// byte length); malformed bytes decode as themselves with length 1.
std::pair<char32_t, int> utf8_decode(std::string_view s, std::size_t i);
void utf8_append(std::string& out, char32_t cp);

// Runs fn(0..n-1) on up to `jobs` worker threads. Exceptions from workers
// are captured and the first one rethrown after all workers join.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sentipipe::util
