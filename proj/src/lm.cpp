#include "vln/lm.hpp"

#include <cmath>
#include <string>

#include "vln/errors.hpp"
#include "vln/instructions.hpp"
#include "vln/layers.hpp"
#include "vln/optim.hpp"

namespace vln {
namespace {

// Index of each parameter in LMModel::params_.
constexpr std::size_t kEmbedding = 0;
constexpr std::size_t kFwdW = 1;
constexpr std::size_t kFwdB = 2;
constexpr std::size_t kBwdW = 3;
constexpr std::size_t kBwdB = 4;
constexpr std::size_t kMixW = 5;
constexpr std::size_t kMixB = 6;

std::vector<Var> run_lstm(Var W, Var b, std::span<const Var> xs, bool reverse, std::size_t hidden) {
  std::vector<Var> hs(xs.size());
  if (xs.empty()) return hs;
  LstmState s = lstm_zero_state(*W.tape, hidden);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const std::size_t i = reverse ? xs.size() - 1 - k : k;
    s = lstm_step(W, b, xs[i], s);
    hs[i] = s.h;
  }
  return hs;
}

}  // namespace

std::string_view encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::Scratch: return "scratch";
    case EncoderKind::Causal: return "causal";
    case EncoderKind::Masked: return "masked";
  }
  return "unknown";
}

EncoderKind parse_encoder(std::string_view s) {
  for (EncoderKind k : {EncoderKind::Scratch, EncoderKind::Causal, EncoderKind::Masked}) {
    if (encoder_name(k) == s) return k;
  }
  throw ConfigError("unknown encoder '" + std::string(s) + "' (expected scratch, causal or masked)");
}

LMModel::LMModel(EncoderKind kind, std::size_t vocab_size, std::size_t embed_dim,
                 std::uint64_t seed)
    : kind_(kind) {
  if (vocab_size <= Vocabulary::kNumReserved || embed_dim == 0) {
    throw ConfigError("language model needs a non-trivial vocabulary and embedding size");
  }
  const std::size_t d = embed_dim;
  auto add = [&](std::vector<Parameter>& into, std::string name, Partition part, Shape shape) {
    into.push_back({std::move(name), part, Tensor::zeros(std::move(shape), true)});
    return &into.back().value;
  };
  params_.reserve(7);
  Tensor* E = add(params_, "embedding", Partition::Embedding, {vocab_size, d});
  xavier_fill(*E, derive_seed(seed, "embedding"), d, d);
  if (kind == EncoderKind::Scratch) return;

  params_.push_back({"lm.fwd.W", Partition::Embedding, {}});
  params_.push_back({"lm.fwd.b", Partition::Embedding, {}});
  init_lstm(params_[kFwdW].value, params_[kFwdB].value, d, d, derive_seed(seed, "lm.fwd"));
  if (kind == EncoderKind::Masked) {
    params_.push_back({"lm.bwd.W", Partition::Embedding, {}});
    params_.push_back({"lm.bwd.b", Partition::Embedding, {}});
    init_lstm(params_[kBwdW].value, params_[kBwdB].value, d, d, derive_seed(seed, "lm.bwd"));
    Tensor* M = add(params_, "lm.mix.W", Partition::Embedding, {d, 2 * d});
    xavier_fill(*M, derive_seed(seed, "lm.mix"), 2 * d, d);
    add(params_, "lm.mix.b", Partition::Embedding, {d});
  }
  Tensor* H = add(head_, "head.W", Partition::LmHead, {vocab_size, d});
  xavier_fill(*H, derive_seed(seed, "head"), d, vocab_size);
  add(head_, "head.b", Partition::LmHead, {vocab_size});
}

void LMModel::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (Parameter& p : params_) {
    p.value.requires_grad = !frozen;
    if (frozen) p.value.grad.clear();
  }
}

std::vector<TokenId> LMModel::input_ids(const TokenSeq& x) const {
  std::vector<TokenId> ids = x.tokens;
  for (TokenId& id : ids) {
    if (id >= vocab_size()) {
      throw LookupError("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(vocab_size()));
    }
    // The masked model has only ever seen unknown positions as masks.
    if (kind_ == EncoderKind::Masked && id == Vocabulary::kUnk) id = Vocabulary::kMask;
  }
  return ids;
}

namespace {

template <class Binder>
std::vector<Var> contextual(EncoderKind kind, std::size_t dim, std::span<const TokenId> ids,
                            Binder bind) {
  Var E = bind(kEmbedding);
  std::vector<Var> rows;
  rows.reserve(ids.size());
  for (TokenId id : ids) rows.push_back(row(E, id));
  if (kind == EncoderKind::Scratch) return rows;
  // The context layer is residual, as in transformer LMs: without the token
  // row, words that predict the same continuations ("left", "right") would
  // collapse to the same embedding.
  std::vector<Var> fwd = run_lstm(bind(kFwdW), bind(kFwdB), rows, false, dim);
  std::vector<Var> out;
  out.reserve(ids.size());
  if (kind == EncoderKind::Causal) {
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back(add(rows[i], fwd[i]));
    return out;
  }
  std::vector<Var> bwd = run_lstm(bind(kBwdW), bind(kBwdB), rows, true, dim);
  Var W = bind(kMixW);
  Var b = bind(kMixB);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back(add(rows[i], tanh(add(matmul(W, concat(fwd[i], bwd[i])), b))));
  }
  return out;
}

}  // namespace

template <class Binder>
Var LMModel::embed_impl(Tape& tape, const TokenSeq& x, Binder bind) const {
  (void)tape;
  if (x.tokens.empty()) throw UsageError("cannot embed an empty token sequence");
  std::vector<TokenId> ids = input_ids(x);
  if (kind_ == EncoderKind::Causal) {
    ids.insert(ids.begin(), Vocabulary::kBos);
    std::vector<Var> hs = contextual(kind_, embed_dim(), ids, bind);
    return stack(std::span<const Var>(hs).subspan(1));
  }
  std::vector<Var> es = contextual(kind_, embed_dim(), ids, bind);
  return stack(es);
}

Var LMModel::embed(Tape& tape, const TokenSeq& x) {
  return embed_impl(tape, x, [&](std::size_t i) { return tape.param(params_[i].value); });
}

Var LMModel::embed(Tape& tape, const TokenSeq& x) const {
  return embed_impl(tape, x, [&](std::size_t i) { return tape.view(params_[i].value); });
}

Tensor LMModel::embed_values(const TokenSeq& x) const {
  Tape tape;
  Var e = embed(tape, x);
  auto v = e.value();
  return Tensor(e.shape(), std::vector<double>(v.begin(), v.end()));
}

LMModel::PretrainLoss LMModel::pretrain_loss(Tape& tape, const TokenSeq& x, Rng& rng,
                                             const PretrainConfig& cfg) {
  if (kind_ == EncoderKind::Scratch) throw UsageError("the scratch encoder has no pretraining objective");
  if (head_.empty()) throw UsageError("pretraining head has been detached");
  if (x.tokens.empty()) throw UsageError("cannot pretrain on an empty sequence");
  std::vector<TokenId> ids = input_ids(x);
  const std::size_t L = ids.size();
  auto bind = [&](std::size_t i) { return tape.param(params_[i].value); };
  Var HW = tape.param(head_[0].value);
  Var Hb = tape.param(head_[1].value);

  std::vector<Var> terms;
  if (kind_ == EncoderKind::Causal) {
    std::vector<TokenId> inputs;
    inputs.reserve(L);
    inputs.push_back(Vocabulary::kBos);
    for (std::size_t i = 0; i + 1 < L; ++i) {
      inputs.push_back(uniform01(rng) < cfg.unk_rate ? Vocabulary::kUnk : ids[i]);
    }
    std::vector<Var> hs = contextual(kind_, embed_dim(), inputs, bind);
    for (std::size_t j = 0; j < L; ++j) {
      terms.push_back(cross_entropy(add(matmul(HW, hs[j]), Hb), ids[j]));
    }
  } else {
    // The trailing end marker is never masked; it carries no information.
    const std::size_t eligible = L > 1 ? L - 1 : 1;
    std::vector<std::size_t> masked;
    for (std::size_t i = 0; i < eligible; ++i) {
      if (uniform01(rng) < cfg.mask_rate) masked.push_back(i);
    }
    if (masked.empty()) masked.push_back(uniform_index(rng, eligible));
    std::vector<TokenId> inputs = ids;
    const std::uint64_t V = vocab_size();
    for (std::size_t i : masked) {
      const double u = uniform01(rng);
      if (u < 0.8) {
        inputs[i] = Vocabulary::kMask;
      } else if (u < 0.9) {
        inputs[i] = static_cast<TokenId>(Vocabulary::kNumReserved +
                                         uniform_index(rng, V - Vocabulary::kNumReserved));
      }
    }
    std::vector<Var> es = contextual(kind_, embed_dim(), inputs, bind);
    for (std::size_t i : masked) {
      terms.push_back(cross_entropy(add(matmul(HW, es[i]), Hb), ids[i]));
    }
  }
  Var total = terms.size() == 1 ? terms[0] : sum(concat(terms));
  return {scale(total, 1.0 / static_cast<double>(terms.size())), terms.size()};
}

Checkpoint LMModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.tag = static_cast<std::uint8_t>(kind_);
  for (const Parameter& p : params_) ckpt.add(p.name, p.value);
  for (const Parameter& p : head_) ckpt.add(p.name, p.value);
  return ckpt;
}

LMModel LMModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.tag < 1 || ckpt.tag > 3) {
    throw IoError("checkpoint tag " + std::to_string(ckpt.tag) + " is not an encoder kind");
  }
  const auto kind = static_cast<EncoderKind>(ckpt.tag);
  const Tensor& E = ckpt.at("embedding");
  if (E.rank() != 2) throw IoError("embedding record must be a matrix");
  LMModel m(kind, E.rows(), E.cols(), 0);
  auto restore = [&](Parameter& p) {
    const Tensor& t = ckpt.at(p.name);
    if (t.shape != p.value.shape) {
      throw IoError("record " + p.name + " has shape " + shape_str(t.shape) + ", expected " +
                    shape_str(p.value.shape));
    }
    p.value.data = t.data;
  };
  for (Parameter& p : m.params_) restore(p);
  if (ckpt.find("head.W") != nullptr) {
    for (Parameter& p : m.head_) restore(p);
  } else {
    m.head_.clear();
  }
  return m;
}

void set_stage(LMModel& model, Stage stage, const LrMap& lrs) {
  if (model.kind() == EncoderKind::Scratch) {
    model.set_frozen(false);
    model.set_learning_rate(lrs.main);
    return;
  }
  if (stage == Stage::Embedding) {
    model.set_frozen(true);
    model.set_learning_rate(0.0);
  } else {
    model.set_frozen(false);
    model.set_learning_rate(lrs.lm);
  }
}

PretrainResult pretrain(std::span<const TokenSeq> corpus, EncoderKind kind, std::size_t vocab_size,
                        const PretrainConfig& cfg, std::uint64_t seed) {
  if (kind == EncoderKind::Scratch) throw UsageError("the scratch encoder has nothing to pretrain");
  if (corpus.empty()) throw TrainingError("pretraining corpus is empty");
  if (cfg.batch == 0 || cfg.lr <= 0.0 || cfg.mask_rate <= 0.0 || cfg.mask_rate > 1.0 ||
      cfg.unk_rate < 0.0 || cfg.unk_rate >= 1.0) {
    throw ConfigError("pretraining needs batch > 0, lr > 0, mask_rate in (0, 1], unk_rate in [0, 1)");
  }
  PretrainResult out;
  out.model = LMModel(kind, vocab_size, cfg.embed_dim, derive_seed(seed, "lm-init"));
  LMModel& m = out.model;
  std::vector<Parameter*> params;
  for (Parameter& p : m.params()) params.push_back(&p);
  for (Parameter& p : m.head()) params.push_back(&p);
  Adamax opt;
  const auto lr = [&](const Parameter&) { return cfg.lr; };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(seed, "pretrain", epoch);
    const std::vector<std::size_t> order = permutation(corpus.size(), rng);
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        auto pl = m.pretrain_loss(tape, corpus[order[k]], rng, cfg);
        const double v = pl.loss.item();
        if (!std::isfinite(v)) {
          throw NumericAbort("non-finite pretraining loss on sequence " + std::to_string(order[k]) +
                             " (epoch " + std::to_string(epoch + 1) + ")");
        }
        total += v * static_cast<double>(pl.count);
        tokens += pl.count;
        tape.backward(scale(pl.loss, inv));
      }
      clip_grad_norm(params, cfg.clip_norm);
      opt.step(params, lr);
    }
    const double mean = total / static_cast<double>(tokens);
    out.epoch_loss.push_back(mean);
    out.perplexity.push_back(std::exp(mean));
  }
  m.detach_head();
  for (Parameter& p : m.params()) p.value.grad.clear();
  return out;
}

}  // namespace vln
