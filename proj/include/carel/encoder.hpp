#pragma once

#include <random>
#include <string>
#include <vector>

#include "carel/autodiff.hpp"
#include "carel/params.hpp"

namespace carel {

/// Per-position hidden states: row i of a batch attends over the rows of
/// `states` listed in `positions[i]`.
struct TokenStates {
  ad::Var states;
  std::vector<std::vector<int>> positions;
};

/// Maps token-id sequences to fixed-size hidden vectors. Implementations own
/// their parameters under a name prefix inside a shared ParamStore.
class SequenceEncoder {
 public:
  virtual ~SequenceEncoder() = default;
  virtual std::string kind() const = 0;
  virtual Index output_dim() const = 0;
  virtual void init_params(ParamStore& store, std::size_t vocab_size, std::mt19937_64& rng) const = 0;
  /// Pooled representation, shape (batch, output_dim()).
  virtual ad::Var encode(ParamBinder& p, const std::vector<std::vector<int>>& seqs) const = 0;
  virtual TokenStates token_states(ParamBinder& p, const std::vector<std::vector<int>>& seqs) const = 0;
};

/// Trainable mean-of-embeddings encoder. Its per-position states are the
/// token embeddings themselves.
class EmbeddingBagEncoder final : public SequenceEncoder {
 public:
  EmbeddingBagEncoder(std::string prefix, Index dim) : prefix_(std::move(prefix)), dim_(dim) {}

  std::string kind() const override { return "embedding-bag"; }
  Index output_dim() const override { return dim_; }

  void init_params(ParamStore& store, std::size_t vocab_size, std::mt19937_64& rng) const override {
    store.add(table_name(), init::normal(static_cast<Index>(vocab_size), dim_, 0.01, rng));
  }

  ad::Var encode(ParamBinder& p, const std::vector<std::vector<int>>& seqs) const override {
    return ad::embedding_bag(p(table_name()), seqs);
  }

  TokenStates token_states(ParamBinder& p, const std::vector<std::vector<int>>& seqs) const override {
    return {p(table_name()), seqs};
  }

  std::string table_name() const { return prefix_ + ".embedding"; }

 private:
  std::string prefix_;
  Index dim_;
};

}  // namespace carel
