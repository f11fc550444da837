#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ontorag {

using json = nlohmann::json;

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; empty string when the file does not exist.
std::string file_digest(const std::filesystem::path& path);

/// Digest of a JSON value's canonical dump (sorted keys, no whitespace).
std::string json_digest(const json& value);

std::string read_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` and renames over `path`, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Canonical JSON text: sorted keys, compact, trailing newline.
std::string dump_canonical(const json& value);
std::string dump_pretty(const json& value);

/// Parses one JSON object per non-blank line. Errors carry the 1-based line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::vector<json> parse_jsonl(std::string_view text);
std::string to_jsonl(std::span<const json> records);

json read_json(const std::filesystem::path& path);

/// Deterministic xoshiro256** generator with portable distribution helpers.
/// std::uniform_*_distribution output differs across standard libraries, so these
/// are hand-rolled to keep seeded runs bitwise reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t hash_combine(std::uint64_t seed, std::string_view text);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
/// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);
/// Scales to unit Euclidean norm in place; leaves zero vectors untouched.
void normalize(std::vector<double>& v);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware concurrency).
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::string zero_pad(std::size_t value, int width);
std::string join(std::span<const std::string> parts, std::string_view sep);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace ontorag
