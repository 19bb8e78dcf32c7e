#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgt/autodiff.hpp"
#include "kgt/graph.hpp"
#include "kgt/rng.hpp"
#include "kgt/sampler.hpp"
#include "kgt/transe.hpp"

namespace kgt {

// How negatives enter the margin loss: `substitute` swaps the corrupted
// side's restored vector for the base-table row of the replacement entity;
// `reencode` rebuilds and re-encodes the corrupted subgraph.
enum class NegativeMode { substitute, reencode };

inline const char* negative_mode_name(NegativeMode m) {
  return m == NegativeMode::substitute ? "substitute" : "reencode";
}

inline NegativeMode negative_mode_from_name(std::string_view name) {
  if (name == "substitute") return NegativeMode::substitute;
  if (name == "reencode") return NegativeMode::reencode;
  throw std::invalid_argument("unknown negative mode: " + std::string(name));
}

// Desk-scale defaults; full benchmark settings (d=100, batch 50000, 1200
// epochs) stay reachable through the same knobs.
struct KgfConfig {
  int layers = 4;
  int heads = 4;
  int dim = 16;
  int ff_dim = 64;  // 4 * dim
  double margin = 1.0;
  double learning_rate = 0.1;
  int epochs = 200;
  int batch = 128;  // ego samples per SGD step
  int k_in = 2;
  int k_out = 2;
  Norm norm = Norm::l1;
  NegativeMode negative = NegativeMode::substitute;
  std::uint64_t seed = 42;
};

struct LayerParams {
  std::vector<Eigen::MatrixXd> w_query, w_key, w_value;  // per head: d x (d/H)
  Eigen::MatrixXd w_out;                                 // d x d
  Eigen::MatrixXd w_ff1, b_ff1;                          // d x ff, 1 x ff
  Eigen::MatrixXd w_ff2, b_ff2;                          // ff x d, 1 x d
  Eigen::MatrixXd ln_attn_gain, ln_attn_bias;            // 1 x d
  Eigen::MatrixXd ln_ff_gain, ln_ff_bias;                // 1 x d
};

struct ModelParams {
  std::int32_t entity_count = 0;
  std::int32_t relation_count = 0;
  std::int32_t dim = 0;
  std::int32_t heads = 0;
  std::int32_t ff_dim = 0;
  Eigen::MatrixXd embeddings;  // (n_e + n_r) x dim
  std::vector<LayerParams> layers;

  std::int32_t layer_count() const { return static_cast<std::int32_t>(layers.size()); }
  std::int32_t vocab_size() const { return entity_count + relation_count; }
  std::int32_t head_dim() const { return dim / heads; }
};

// Every parameter matrix in declaration order: embeddings, then per layer
// (per head W_q, W_k, W_v), W_o, W1, b1, W2, b2, and both layer-norm pairs.
// This order is shared by the SGD update, the flattened gradient check, and
// the checkpoint layout.
inline std::vector<const Eigen::MatrixXd*> param_matrices(const ModelParams& p) {
  std::vector<const Eigen::MatrixXd*> mats;
  mats.push_back(&p.embeddings);
  for (const LayerParams& l : p.layers) {
    for (std::int32_t h = 0; h < p.heads; ++h) {
      mats.push_back(&l.w_query[static_cast<std::size_t>(h)]);
      mats.push_back(&l.w_key[static_cast<std::size_t>(h)]);
      mats.push_back(&l.w_value[static_cast<std::size_t>(h)]);
    }
    mats.push_back(&l.w_out);
    mats.push_back(&l.w_ff1);
    mats.push_back(&l.b_ff1);
    mats.push_back(&l.w_ff2);
    mats.push_back(&l.b_ff2);
    mats.push_back(&l.ln_attn_gain);
    mats.push_back(&l.ln_attn_bias);
    mats.push_back(&l.ln_ff_gain);
    mats.push_back(&l.ln_ff_bias);
  }
  return mats;
}

inline std::vector<Eigen::MatrixXd*> param_matrices(ModelParams& p) {
  std::vector<Eigen::MatrixXd*> mats;
  for (const Eigen::MatrixXd* m : param_matrices(static_cast<const ModelParams&>(p)))
    mats.push_back(const_cast<Eigen::MatrixXd*>(m));
  return mats;
}

namespace detail {

inline void check_kgf_config(const KgfConfig& cfg) {
  if (cfg.layers < 1 || cfg.heads < 1 || cfg.dim < 1 || cfg.ff_dim < 1)
    throw std::invalid_argument("kgformer: layers, heads and dims must be positive");
  if (cfg.dim % cfg.heads != 0)
    throw std::invalid_argument("kgformer: heads must divide dim");
  if (cfg.margin <= 0.0) throw std::invalid_argument("kgformer: margin must be positive");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("kgformer: learning rate must be positive");
  if (cfg.epochs < 0 || cfg.batch < 1)
    throw std::invalid_argument("kgformer: bad epochs or batch");
  if (cfg.k_in < 0 || cfg.k_out < 0 || cfg.k_in + cfg.k_out < 1)
    throw std::invalid_argument("kgformer: bad fan limits");
}

inline Eigen::MatrixXd xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace detail

// Fresh parameters: embeddings from `init` when given (shape-checked), else
// the same uniform recipe as the translation baseline; attention and
// feed-forward weights are Xavier-uniform, norms start as identity.
inline ModelParams init_params(std::int32_t entity_count, std::int32_t relation_count,
                               const KgfConfig& cfg, const EmbeddingTable* init = nullptr) {
  detail::check_kgf_config(cfg);
  if (entity_count <= 0 || relation_count < 0)
    throw std::invalid_argument("init_params: bad vocabulary sizes");
  ModelParams p;
  p.entity_count = entity_count;
  p.relation_count = relation_count;
  p.dim = cfg.dim;
  p.heads = cfg.heads;
  p.ff_dim = cfg.ff_dim;
  Rng rng(splitmix64(cfg.seed ^ 0x6b67666f726d6572ull));
  if (init != nullptr) {
    if (init->rows() != entity_count + relation_count || init->cols() != cfg.dim)
      throw std::invalid_argument(
          "init_params: init table shape mismatch, expected " +
          std::to_string(entity_count + relation_count) + "x" + std::to_string(cfg.dim) +
          ", got " + std::to_string(init->rows()) + "x" + std::to_string(init->cols()));
    p.embeddings = *init;
  } else {
    p.embeddings = init_embeddings(entity_count, relation_count, cfg.dim, rng.next_u64());
  }
  const std::int32_t d_h = cfg.dim / cfg.heads;
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (LayerParams& l : p.layers) {
    for (std::int32_t h = 0; h < cfg.heads; ++h) {
      l.w_query.push_back(detail::xavier_uniform(cfg.dim, d_h, rng));
      l.w_key.push_back(detail::xavier_uniform(cfg.dim, d_h, rng));
      l.w_value.push_back(detail::xavier_uniform(cfg.dim, d_h, rng));
    }
    l.w_out = detail::xavier_uniform(cfg.dim, cfg.dim, rng);
    l.w_ff1 = detail::xavier_uniform(cfg.dim, cfg.ff_dim, rng);
    l.b_ff1 = Eigen::MatrixXd::Zero(1, cfg.ff_dim);
    l.w_ff2 = detail::xavier_uniform(cfg.ff_dim, cfg.dim, rng);
    l.b_ff2 = Eigen::MatrixXd::Zero(1, cfg.dim);
    l.ln_attn_gain = Eigen::MatrixXd::Ones(1, cfg.dim);
    l.ln_attn_bias = Eigen::MatrixXd::Zero(1, cfg.dim);
    l.ln_ff_gain = Eigen::MatrixXd::Ones(1, cfg.dim);
    l.ln_ff_bias = Eigen::MatrixXd::Zero(1, cfg.dim);
  }
  return p;
}

using DTape = ad::Tape<double>;
using DVar = ad::Var<double>;

struct LayerVars {
  std::vector<DVar> w_query, w_key, w_value;
  DVar w_out, w_ff1, b_ff1, w_ff2, b_ff2;
  DVar ln_attn_gain, ln_attn_bias, ln_ff_gain, ln_ff_bias;
};

struct ParamVars {
  DVar embeddings;
  std::vector<LayerVars> layers;
};

inline ParamVars register_params(DTape& tape, const ModelParams& p) {
  ParamVars vars;
  vars.embeddings = tape.input(p.embeddings);
  for (const LayerParams& l : p.layers) {
    LayerVars lv;
    for (std::int32_t h = 0; h < p.heads; ++h) {
      lv.w_query.push_back(tape.input(l.w_query[static_cast<std::size_t>(h)]));
      lv.w_key.push_back(tape.input(l.w_key[static_cast<std::size_t>(h)]));
      lv.w_value.push_back(tape.input(l.w_value[static_cast<std::size_t>(h)]));
    }
    lv.w_out = tape.input(l.w_out);
    lv.w_ff1 = tape.input(l.w_ff1);
    lv.b_ff1 = tape.input(l.b_ff1);
    lv.w_ff2 = tape.input(l.w_ff2);
    lv.b_ff2 = tape.input(l.b_ff2);
    lv.ln_attn_gain = tape.input(l.ln_attn_gain);
    lv.ln_attn_bias = tape.input(l.ln_attn_bias);
    lv.ln_ff_gain = tape.input(l.ln_ff_gain);
    lv.ln_ff_bias = tape.input(l.ln_ff_bias);
    vars.layers.push_back(std::move(lv));
  }
  return vars;
}

// Flat view matching param_matrices order.
inline std::vector<DVar> param_vars_flat(const ParamVars& vars) {
  std::vector<DVar> flat;
  flat.push_back(vars.embeddings);
  for (const LayerVars& l : vars.layers) {
    for (std::size_t h = 0; h < l.w_query.size(); ++h) {
      flat.push_back(l.w_query[h]);
      flat.push_back(l.w_key[h]);
      flat.push_back(l.w_value[h]);
    }
    flat.push_back(l.w_out);
    flat.push_back(l.w_ff1);
    flat.push_back(l.b_ff1);
    flat.push_back(l.w_ff2);
    flat.push_back(l.b_ff2);
    flat.push_back(l.ln_attn_gain);
    flat.push_back(l.ln_attn_bias);
    flat.push_back(l.ln_ff_gain);
    flat.push_back(l.ln_ff_bias);
  }
  return flat;
}

// Inverse of param_vars_flat: rebuild the structured view over tape vars,
// using `shape` only for layer/head counts.
inline ParamVars bind_param_vars(const ModelParams& shape, const std::vector<DVar>& flat) {
  std::size_t at = 0;
  auto next = [&]() {
    if (at >= flat.size()) throw std::invalid_argument("bind_param_vars: too few vars");
    return flat[at++];
  };
  ParamVars vars;
  vars.embeddings = next();
  for (std::int32_t layer = 0; layer < shape.layer_count(); ++layer) {
    LayerVars lv;
    for (std::int32_t h = 0; h < shape.heads; ++h) {
      lv.w_query.push_back(next());
      lv.w_key.push_back(next());
      lv.w_value.push_back(next());
    }
    lv.w_out = next();
    lv.w_ff1 = next();
    lv.b_ff1 = next();
    lv.w_ff2 = next();
    lv.b_ff2 = next();
    lv.ln_attn_gain = next();
    lv.ln_attn_bias = next();
    lv.ln_ff_gain = next();
    lv.ln_ff_bias = next();
    vars.layers.push_back(std::move(lv));
  }
  if (at != flat.size()) throw std::invalid_argument("bind_param_vars: too many vars");
  return vars;
}

// Receiver-indexed attention mask: row i marks the nodes i may attend to,
// which are its in-neighbors (edges j -> i) plus itself.
inline Eigen::MatrixXd attention_mask(const TrainingSample& sample) {
  const std::int32_t n = sample.node_count();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
  for (std::int32_t i = 0; i < n; ++i) {
    mask(i, i) = 1.0;
    for (std::int32_t j = 0; j < n; ++j)
      if (sample.adjacency(j, i) == 1) mask(i, j) = 1.0;
  }
  return mask;
}

// Per-layer, per-head attention weights plus the post-attention rows,
// captured during a forward pass when requested.
struct ForwardTrace {
  std::vector<std::vector<Eigen::MatrixXd>> attention;  // [layer][head], N x N
  std::vector<Eigen::MatrixXd> post_attention;          // [layer], N x d
};

// Stacked masked-attention blocks over node states x (N x d): multi-head
// scaled dot-product attention restricted by `mask`, concatenated heads with
// an output projection, then residual + layer norm, then a ReLU feed-forward
// with its own residual + layer norm.
inline DVar encode(DTape& tape, const ParamVars& vars, const ModelParams& p, DVar x,
                   const Eigen::MatrixXd& mask, ForwardTrace* trace = nullptr) {
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(p.head_dim()));
  if (trace != nullptr) {
    trace->attention.assign(static_cast<std::size_t>(p.layer_count()), {});
    trace->post_attention.clear();
  }
  for (std::size_t layer = 0; layer < vars.layers.size(); ++layer) {
    const LayerVars& lv = vars.layers[layer];
    std::vector<DVar> heads;
    heads.reserve(static_cast<std::size_t>(p.heads));
    for (std::int32_t h = 0; h < p.heads; ++h) {
      const DVar q = ad::matmul(x, lv.w_query[static_cast<std::size_t>(h)]);
      const DVar k = ad::matmul(x, lv.w_key[static_cast<std::size_t>(h)]);
      const DVar v = ad::matmul(x, lv.w_value[static_cast<std::size_t>(h)]);
      const DVar scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dh);
      const DVar alpha = ad::masked_softmax(scores, mask);
      if (trace != nullptr) trace->attention[layer].push_back(tape.value(alpha));
      heads.push_back(ad::matmul(alpha, v));
    }
    const DVar attn = ad::matmul(ad::concat_cols(heads), lv.w_out);
    x = ad::layer_norm(ad::add(x, attn), lv.ln_attn_gain, lv.ln_attn_bias);
    if (trace != nullptr) trace->post_attention.push_back(tape.value(x));
    DVar ff = ad::relu(ad::add_rowvec(ad::matmul(x, lv.w_ff1), lv.b_ff1));
    ff = ad::add_rowvec(ad::matmul(ff, lv.w_ff2), lv.b_ff2);
    x = ad::layer_norm(ad::add(x, ff), lv.ln_ff_gain, lv.ln_ff_bias);
  }
  return x;
}

inline std::vector<std::int32_t> checked_node_rows(const ModelParams& p,
                                                   const TrainingSample& sample) {
  std::vector<std::int32_t> rows;
  rows.reserve(sample.node_ids.size());
  for (const std::int32_t id : sample.node_ids) {
    if (id < 0 || id >= p.vocab_size())
      throw std::out_of_range("forward: node id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(p.vocab_size()));
    rows.push_back(id);
  }
  return rows;
}

inline DVar forward(DTape& tape, const ParamVars& vars, const ModelParams& p,
                    const TrainingSample& sample, ForwardTrace* trace = nullptr) {
  if (sample.node_count() == 0) throw std::invalid_argument("forward: empty sample");
  const DVar x0 = ad::gather_rows(vars.embeddings, checked_node_rows(p, sample));
  return encode(tape, vars, p, x0, attention_mask(sample), trace);
}

// Value-only convenience forward.
inline Eigen::MatrixXd forward(const ModelParams& p, const TrainingSample& sample,
                               ForwardTrace* trace = nullptr) {
  DTape tape;
  const ParamVars vars = register_params(tape, p);
  const DVar out = forward(tape, vars, p, sample, trace);
  return tape.value(out);
}

// Splits encoder output back into per-triple (subject, relation, object)
// vectors: three T x d matrices addressed by the position matrix.
inline std::array<Eigen::MatrixXd, 3> restore_triples(const Eigen::MatrixXd& encoded,
                                                      const PositionMatrix& positions) {
  const Eigen::Index t_count = positions.rows();
  if (t_count == 0) throw std::invalid_argument("restore_triples: no rows");
  std::array<Eigen::MatrixXd, 3> out;
  for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(c)].resize(t_count, encoded.cols());
  for (Eigen::Index k = 0; k < t_count; ++k) {
    for (int c = 0; c < 3; ++c) {
      const std::int32_t pos = positions(k, c);
      if (pos < 0 || pos >= encoded.rows())
        throw std::out_of_range("restore_triples: position " + std::to_string(pos) +
                                " out of range");
      out[static_cast<std::size_t>(c)].row(k) = encoded.row(pos);
    }
  }
  return out;
}

namespace detail {

inline DVar energy_of(DVar s, DVar r, DVar o, Norm norm) {
  const DVar diff = ad::sub(ad::add(s, r), o);
  return norm == Norm::l1 ? ad::l1_norm(diff) : ad::l2_norm(diff);
}

inline DVar row_of(DTape& tape, DVar m, std::int32_t row) {
  (void)tape;
  return ad::gather_rows(m, std::vector<std::int32_t>{row});
}

// Margin loss over the sample's triples; rows whose negative is missing are
// skipped (the trainer uses this when corruption runs out of candidates).
inline DVar build_margin_loss(DTape& tape, const ParamVars& vars, const ModelParams& p,
                              const TrainingSample& sample,
                              const std::vector<std::optional<Corruption>>& negatives,
                              double margin, Norm norm, NegativeMode mode,
                              std::size_t* used_rows = nullptr) {
  if (static_cast<std::int32_t>(negatives.size()) != sample.triple_count())
    throw std::invalid_argument("margin_loss: one negative per restored triple required");
  if (margin <= 0.0) throw std::invalid_argument("margin_loss: margin must be positive");
  const DVar encoded = forward(tape, vars, p, sample);
  std::optional<DVar> loss;
  std::size_t used = 0;
  for (std::int32_t k = 0; k < sample.triple_count(); ++k) {
    const auto& neg = negatives[static_cast<std::size_t>(k)];
    if (!neg.has_value()) continue;
    const DVar s = row_of(tape, encoded, sample.positions(k, 0));
    const DVar r = row_of(tape, encoded, sample.positions(k, 1));
    const DVar o = row_of(tape, encoded, sample.positions(k, 2));
    const DVar e_pos = energy_of(s, r, o, norm);
    DVar e_neg;
    if (mode == NegativeMode::substitute) {
      const DVar swap = row_of(tape, vars.embeddings, neg->replacement);
      e_neg = neg->side == Corruption::Side::head ? energy_of(swap, r, o, norm)
                                                  : energy_of(s, r, swap, norm);
    } else {
      Subgraph corrupted;
      for (std::int32_t j = 0; j < sample.triple_count(); ++j)
        corrupted.triples.push_back(sample_triple(sample, p.entity_count, j));
      Triple& target = corrupted.triples[static_cast<std::size_t>(k)];
      (neg->side == Corruption::Side::head ? target.subject : target.object) =
          neg->replacement;
      const TrainingSample neg_sample = convert(corrupted, p.entity_count);
      const DVar neg_encoded = forward(tape, vars, p, neg_sample);
      const DVar ns = row_of(tape, neg_encoded, neg_sample.positions(k, 0));
      const DVar nr = row_of(tape, neg_encoded, neg_sample.positions(k, 1));
      const DVar no = row_of(tape, neg_encoded, neg_sample.positions(k, 2));
      e_neg = energy_of(ns, nr, no, norm);
    }
    const DVar term = ad::relu(ad::add_scalar(ad::sub(e_pos, e_neg), margin));
    loss = loss.has_value() ? ad::add(*loss, term) : term;
    ++used;
  }
  if (used_rows != nullptr) *used_rows = used;
  if (!loss.has_value()) return tape.input(Eigen::MatrixXd::Zero(1, 1));
  return *loss;
}

}  // namespace detail

// Sum over the sample's triples of max{d(t) - d(f(t)) + margin, 0}, where d
// is the translation energy over restored encoder outputs.
inline double margin_loss(const ModelParams& p, const TrainingSample& sample,
                          const std::vector<Corruption>& negatives, double margin, Norm norm,
                          NegativeMode mode = NegativeMode::substitute) {
  DTape tape;
  const ParamVars vars = register_params(tape, p);
  std::vector<std::optional<Corruption>> opt(negatives.begin(), negatives.end());
  const DVar loss =
      detail::build_margin_loss(tape, vars, p, sample, opt, margin, norm, mode);
  return tape.value(loss)(0, 0);
}

struct KgfTrainResult {
  ModelParams params;
  std::vector<double> epoch_mean_loss;
  std::size_t skipped_negatives = 0;
};

// SGD on the margin loss over ego samples. An epoch shuffles all non-isolated
// entities and walks them in batches; each batch is one tape (deterministic
// reduction order) and one mean-gradient step.
inline KgfTrainResult train_kgformer(const KnowledgeGraph& g, const KgfConfig& cfg,
                                     const EmbeddingTable* init = nullptr,
                                     std::ostream* log = nullptr) {
  detail::check_kgf_config(cfg);
  if (g.triple_count() == 0)
    throw std::invalid_argument("train_kgformer: graph has no triples");
  KgfTrainResult result;
  result.params = init_params(g.entity_count(), g.relation_count(), cfg, init);
  if (cfg.epochs == 0) return result;

  std::vector<EntityId> centers;
  for (EntityId e = 0; e < g.entity_count(); ++e)
    if (g.in_degree(e) + g.out_degree(e) > 0) centers.push_back(e);
  if (centers.empty()) throw std::invalid_argument("train_kgformer: no sampleable entities");

  Rng rng(splitmix64(cfg.seed ^ 0x747261696e6b6766ull));
  ModelParams& params = result.params;
  const std::vector<Eigen::MatrixXd*> mats = param_matrices(params);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(centers);
    double epoch_loss = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t begin = 0; begin < centers.size();
         begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end =
          std::min(centers.size(), begin + static_cast<std::size_t>(cfg.batch));
      DTape tape;
      const ParamVars vars = register_params(tape, params);
      std::optional<DVar> batch_sum;
      std::size_t batch_samples = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const Subgraph sub =
            sample_ego(g, centers[i], cfg.k_in, cfg.k_out, rng.next_u64());
        const TrainingSample sample = convert(sub, g.entity_count());
        std::vector<std::optional<Corruption>> negatives;
        negatives.reserve(static_cast<std::size_t>(sample.triple_count()));
        for (std::int32_t k = 0; k < sample.triple_count(); ++k) {
          try {
            negatives.emplace_back(corrupt(sample, g, k, rng.next_u64()));
          } catch (const std::runtime_error&) {
            negatives.emplace_back(std::nullopt);
            ++result.skipped_negatives;
          }
        }
        std::size_t used = 0;
        const DVar sample_loss = detail::build_margin_loss(
            tape, vars, params, sample, negatives, cfg.margin, cfg.norm, cfg.negative, &used);
        if (used == 0) continue;
        batch_sum = batch_sum.has_value() ? ad::add(*batch_sum, sample_loss) : sample_loss;
        ++batch_samples;
      }
      if (!batch_sum.has_value()) continue;
      const DVar batch_loss =
          ad::scale(*batch_sum, 1.0 / static_cast<double>(batch_samples));
      epoch_loss += tape.value(*batch_sum)(0, 0);
      epoch_samples += batch_samples;
      tape.backward(batch_loss);
      const std::vector<DVar> flat = param_vars_flat(vars);
      for (std::size_t m = 0; m < mats.size(); ++m)
        *mats[m] -= cfg.learning_rate * tape.grad(flat[m]);
    }
    const double mean_loss =
        epoch_samples > 0 ? epoch_loss / static_cast<double>(epoch_samples) : 0.0;
    result.epoch_mean_loss.push_back(mean_loss);
    if (log != nullptr)
      *log << "epoch " << (epoch + 1) << " mean_loss " << mean_loss << "\n";
  }
  return result;
}

enum class ExportMode { base, encoded_mean };

inline const char* export_mode_name(ExportMode m) {
  return m == ExportMode::base ? "base" : "encoded_mean";
}

inline ExportMode export_mode_from_name(std::string_view name) {
  if (name == "base") return ExportMode::base;
  if (name == "encoded_mean") return ExportMode::encoded_mean;
  throw std::invalid_argument("unknown export mode: " + std::string(name));
}

struct ExportResult {
  EmbeddingTable table;
  std::size_t isolated_fallbacks = 0;
};

// Deterministic per-entity, per-draw seed for encoded_mean exports; exposed
// so the derivation is replayable.
inline std::uint64_t export_sample_seed(std::uint64_t seed, EntityId entity, int draw) {
  return splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(entity) << 20) ^
                                      static_cast<std::uint64_t>(draw)));
}

// `base` copies the embedding table. `encoded_mean` encodes k ego samples per
// entity and averages that entity's output rows; isolated entities (and all
// relation rows) fall back to their base rows, counted in the result.
inline ExportResult export_embeddings(const ModelParams& p, const KnowledgeGraph& g,
                                      ExportMode mode, int k_samples = 1,
                                      std::uint64_t seed = 0, int k_in = 2, int k_out = 2) {
  if (g.entity_count() != p.entity_count || g.relation_count() != p.relation_count)
    throw std::invalid_argument("export_embeddings: graph/model vocabulary mismatch");
  ExportResult result;
  result.table = p.embeddings;
  if (mode == ExportMode::base) return result;
  if (k_samples < 1)
    throw std::invalid_argument("export_embeddings: k_samples must be at least 1");
  if (k_in < 0 || k_out < 0 || k_in + k_out < 1)
    throw std::invalid_argument("export_embeddings: bad fan limits");
  for (EntityId e = 0; e < g.entity_count(); ++e) {
    if (g.in_degree(e) + g.out_degree(e) == 0) {
      ++result.isolated_fallbacks;
      continue;
    }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(p.dim);
    for (int j = 0; j < k_samples; ++j) {
      const Subgraph sub = sample_ego(g, e, k_in, k_out, export_sample_seed(seed, e, j));
      const TrainingSample sample = convert(sub, g.entity_count());
      const Eigen::MatrixXd encoded = forward(p, sample);
      const auto it = std::find(sample.node_ids.begin(), sample.node_ids.end(), e);
      const Eigen::Index pos = it - sample.node_ids.begin();
      acc += encoded.row(pos);
    }
    result.table.row(e) = acc / static_cast<double>(k_samples);
  }
  return result;
}

}  // namespace kgt
