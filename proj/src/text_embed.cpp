#include "kge/text_embed.hpp"

#include <cctype>
#include <random>

namespace kge {

SubwordEmbedder::SubwordEmbedder(int width, std::uint64_t table_seed) : width_(width) {
  if (width < 1) throw ContractError("text embedding width must be >= 1");
  std::mt19937_64 rng(table_seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  table_.resize(kBuckets, width_);
  for (Index r = 0; r < kBuckets; ++r) {
    for (Index c = 0; c < width_; ++c) table_(r, c) = dist(rng);
  }
}

std::uint64_t SubwordEmbedder::hash_gram(std::string_view gram) {
  // FNV-1a, 64-bit.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char byte : gram) {
    h ^= byte;
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::RowVectorXd SubwordEmbedder::embed(std::string_view text) const {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(width_);
  long count = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    if (end == pos) break;
    std::string_view token = text.substr(pos, end - pos);
    pos = end;
    // Whole-token bucket; the boundary markers keep it from colliding with
    // an identical inner n-gram of a longer token.
    std::string marked;
    marked.reserve(token.size() + 2);
    marked.push_back('<');
    marked.append(token);
    marked.push_back('>');
    acc += table_.row(static_cast<Index>(hash_gram(marked) % kBuckets));
    ++count;
    for (int n = kMinGram; n <= kMaxGram; ++n) {
      if (token.size() < static_cast<std::size_t>(n)) break;
      for (std::size_t at = 0; at + n <= token.size(); ++at) {
        acc += table_.row(static_cast<Index>(hash_gram(token.substr(at, n)) % kBuckets));
        ++count;
      }
    }
  }
  if (count == 0) return acc;
  acc /= static_cast<double>(count);
  double norm = acc.norm();
  if (norm > 0.0) acc /= norm;
  return acc;
}

}  // namespace kge
