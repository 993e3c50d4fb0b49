#pragma once

#include <cstdint>
#include <string_view>

#include "kge/tensor.hpp"

namespace kge {

// Deterministic text-to-vector map with word identity and subword locality:
// the text is split on whitespace, and every token contributes one
// whole-token bucket (with boundary markers) plus buckets for its character
// 3-5-grams. Buckets index a fixed table whose rows come from a seeded
// normal draw; the mean bucket vector is L2-normalized. Strings without any
// token map to the zero vector.
class SubwordEmbedder {
 public:
  static constexpr int kBuckets = 4096;
  static constexpr int kMinGram = 3;
  static constexpr int kMaxGram = 5;
  // One fixed seed for every corpus, so text vectors are comparable across
  // runs and files.
  static constexpr std::uint64_t kTableSeed = 0x6b67655f74657874ULL;

  explicit SubwordEmbedder(int width, std::uint64_t table_seed = kTableSeed);

  int width() const { return width_; }
  Eigen::RowVectorXd embed(std::string_view text) const;

  static std::uint64_t hash_gram(std::string_view gram);

 private:
  int width_;
  Matrix table_;  // kBuckets x width
};

}  // namespace kge
