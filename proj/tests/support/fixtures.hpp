#pragma once

#include "sentipipe/core.hpp"
#include "sentipipe/dataset_eval.hpp"
#include "sentipipe/knowledge_base.hpp"
#include "sentipipe/util.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sentipipe::fixtures {

// Temp directory removed on destruction.
class ScopedTempDir {
  public:
    ScopedTempDir();
    ~ScopedTempDir();
    ScopedTempDir(const ScopedTempDir&) = delete;
    ScopedTempDir& operator=(const ScopedTempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

// A valid 1x1 PNG with variant-derived trailing bytes, so distinct variants
// hash to distinct embeddings.
std::vector<std::uint8_t> tiny_png(std::uint64_t variant);

FeatureVector random_feature(int dimension, util::SplitMix64& rng);

// Store of `n` random entries with embedding dimension `dimension`;
// duplicate_every > 0 re-uses an earlier embedding every that-many entries
// to create exact similarity ties.
KbStore make_random_store(std::size_t n, int dimension, std::uint64_t seed,
                          std::size_t duplicate_every = 0);

// Labeled posts whose text contains exactly one keyword of the default stub
// lexicon, mapped to the gold label; visual content is precomputed vectors
// whose first component equals the label's default valence.
Dataset make_keyword_dataset(int per_label, std::uint64_t seed, int dimension,
                             const std::string& name = "fixture");

std::vector<CorpusEntry> make_corpus(int n, std::uint64_t seed);

}  // namespace sentipipe::fixtures
