#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vln/autodiff.hpp"
#include "vln/checkpoint.hpp"
#include "vln/rng.hpp"
#include "vln/token_seq.hpp"

namespace vln {

// Word-embedding function x -> e. Scratch is a context-free lookup table
// trained with the agent; Causal is a left-to-right LSTM language model;
// Masked is a bidirectional LSTM trained to fill in masked tokens.
enum class EncoderKind : std::uint8_t { Scratch = 1, Causal = 2, Masked = 3 };

std::string_view encoder_name(EncoderKind k);  // "scratch", "causal", "masked"
EncoderKind parse_encoder(std::string_view s);  // ConfigError

enum class Stage : std::uint8_t { Embedding = 1, Finetune = 2 };

struct LrMap {
  double main = 1e-4;
  double lm = 5e-5;
};

struct PretrainConfig {
  std::size_t epochs = 20;
  double lr = 2e-3;
  std::size_t batch = 24;
  double mask_rate = 0.15;
  // Causal model only: inputs (never targets) are replaced by the unknown
  // token at this rate, so unknown words get a useful embedding.
  double unk_rate = 0.1;
  std::size_t embed_dim = 32;
  double clip_norm = 5.0;

  bool operator==(const PretrainConfig&) const = default;
};

class LMModel {
 public:
  LMModel() = default;
  // Random initialisation. Pretrained kinds also get an output head.
  LMModel(EncoderKind kind, std::size_t vocab_size, std::size_t embed_dim, std::uint64_t seed);

  EncoderKind kind() const { return kind_; }
  std::size_t vocab_size() const { return params_.empty() ? 0 : params_[0].value.rows(); }
  std::size_t embed_dim() const { return params_.empty() ? 0 : params_[0].value.cols(); }

  // Rows e_1..e_L ([L x d_e]) on `tape`. The const form never produces
  // gradients; the other produces them unless the model is frozen.
  // LookupError on a token id outside the vocabulary.
  Var embed(Tape& tape, const TokenSeq& x);
  Var embed(Tape& tape, const TokenSeq& x) const;
  Tensor embed_values(const TokenSeq& x) const;

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen);
  // Learning rate the optimiser uses for the embedding parameters.
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  // Parameters of x -> e (partition Embedding).
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  // Pretraining output layer (partition LmHead); empty once detached.
  std::vector<Parameter>& head() { return head_; }
  const std::vector<Parameter>& head() const { return head_; }
  void detach_head() { head_.clear(); }

  struct PretrainLoss {
    Var loss;               // mean over predicted positions
    std::size_t count = 0;  // number of predicted positions
  };
  // Next-token loss (causal) or masked-token loss (masked) on one sequence.
  // Draws the corruption pattern from rng.
  PretrainLoss pretrain_loss(Tape& tape, const TokenSeq& x, Rng& rng, const PretrainConfig& cfg);

  // Checkpoint tagged with the encoder kind; records "embedding", "lm.*",
  // and "head.*" while the head is attached.
  Checkpoint to_checkpoint() const;
  static LMModel from_checkpoint(const Checkpoint& ckpt);

 private:
  template <class Binder>
  Var embed_impl(Tape& tape, const TokenSeq& x, Binder bind) const;
  std::vector<TokenId> input_ids(const TokenSeq& x) const;

  EncoderKind kind_ = EncoderKind::Scratch;
  bool frozen_ = false;
  double lr_ = LrMap{}.main;
  std::vector<Parameter> params_;
  std::vector<Parameter> head_;
};

// Embedding stage freezes a pretrained model; fine-tuning unfreezes it at
// lrs.lm. The scratch table is never frozen and always uses lrs.main.
void set_stage(LMModel& model, Stage stage, const LrMap& lrs);

struct PretrainResult {
  LMModel model;  // head detached
  std::vector<double> epoch_loss;
  std::vector<double> perplexity;
};

// Trains a causal or masked model on the given corpus with Adamax. UsageError
// for the scratch kind; TrainingError on an empty corpus; NumericAbort on a
// non-finite loss.
PretrainResult pretrain(std::span<const TokenSeq> corpus, EncoderKind kind, std::size_t vocab_size,
                        const PretrainConfig& cfg, std::uint64_t seed);

}  // namespace vln
