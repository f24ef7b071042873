#include "pjfit/implicit_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pjfit/checkpoint.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/metrics.hpp"
#include "pjfit/parallel.hpp"

namespace pjfit {

Tensor history_item(const HistoryEvent& event, std::size_t d_e) {
  require_size(event.resume.size(), d_e, "history_item");
  require_size(event.post.size(), d_e, "history_item");
  Tensor item({2 * d_e + 2});
  std::copy(event.resume.begin(), event.resume.end(), item.data());
  if (event.decision == Decision::Accept) item[d_e] = 1.0;
  if (event.decision == Decision::Reject) item[d_e + 1] = 1.0;
  std::copy(event.post.begin(), event.post.end(), item.data() + d_e + 2);
  return item;
}

Tensor pad_item(std::size_t d_e) { return Tensor({2 * d_e + 2}); }

std::vector<Tensor> encode_history(std::span<const HistoryEvent> events, std::size_t max_len,
                                   std::size_t d_e) {
  std::vector<Tensor> out;
  out.reserve(max_len);
  const std::size_t kept = std::min(events.size(), max_len);
  for (std::size_t i = kept; i < max_len; ++i) out.push_back(pad_item(d_e));
  for (std::size_t i = events.size() - kept; i < events.size(); ++i)
    out.push_back(history_item(events[i], d_e));
  return out;
}

void ImplicitConfig::validate() const {
  if (d_e == 0 || hidden == 0 || d_i == 0 || max_post_history == 0 || max_candidate_history == 0)
    throw ConfigError("implicit config: all sizes must be >= 1");
}

nlohmann::json to_json(const ImplicitConfig& c) {
  return {{"d_e", c.d_e},
          {"hidden", c.hidden},
          {"d_i", c.d_i},
          {"max_post_history", c.max_post_history},
          {"max_candidate_history", c.max_candidate_history},
          {"objective", c.objective == ImplicitObjective::Residual ? "residual" : "standalone"}};
}

ImplicitConfig implicit_config_from_json(const nlohmann::json& j) {
  ImplicitConfig c;
  try {
    c.d_e = j.at("d_e");
    c.hidden = j.at("hidden");
    c.d_i = j.at("d_i");
    c.max_post_history = j.at("max_post_history");
    c.max_candidate_history = j.at("max_candidate_history");
    const std::string obj = j.at("objective");
    if (obj == "residual")
      c.objective = ImplicitObjective::Residual;
    else if (obj == "standalone")
      c.objective = ImplicitObjective::Standalone;
    else
      throw DataError("unknown implicit objective " + obj);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed implicit config: ") + e.what());
  }
  c.validate();
  return c;
}

ImplicitTower::ImplicitTower(const std::string& tower_name, std::size_t item_size,
                             std::size_t hidden, std::size_t d_i, std::size_t length, Rng& rng)
    : name(tower_name),
      lstm(tower_name + ".lstm", item_size, hidden, rng),
      head(tower_name + ".head", hidden, d_i, rng),
      length_(length) {}

namespace {

bool is_pad(const Tensor& item) {
  return std::all_of(item.values().begin(), item.values().end(), [](double v) { return v == 0.0; });
}

}  // namespace

Tensor ImplicitTower::forward(const std::vector<Tensor>& sequence, Trace* trace,
                              const PadChain* chain) const {
  if (sequence.size() != length_)
    throw ShapeError("implicit_embed: sequence of " + std::to_string(sequence.size()) +
                     " items, tower expects " + std::to_string(length_));
  std::size_t start = 0;
  if (chain) {
    require_size(chain->states.size(), length_ + 1, "implicit_embed pad chain");
    while (start < length_ && is_pad(sequence[start])) ++start;
  }
  nn::LstmState state = chain ? chain->states[start] : nn::LstmState::zeros(lstm.hidden_size());
  if (trace) {
    trace->start = start;
    trace->steps.assign(length_ - start, {});
  }
  for (std::size_t t = start; t < length_; ++t)
    state = lstm.step(sequence[t], state, trace ? &trace->steps[t - start] : nullptr);
  Tensor y = head.forward(state.h);
  if (trace) {
    trace->h_last = std::move(state.h);
    trace->filled = true;
  }
  return y;
}

void ImplicitTower::backward(const Trace& trace, const Tensor& dy, PadChain* chain) {
  if (!trace.filled) throw ShapeError("implicit tower backward: no forward pass recorded");
  Tensor dh = head.backward(trace.h_last, dy);
  Tensor dc({lstm.hidden_size()});
  for (std::size_t k = trace.steps.size(); k-- > 0;) lstm.backward_step(trace.steps[k], dh, dc);
  if (trace.start > 0) {
    if (!chain) throw ShapeError("implicit tower backward: trace started from a pad chain");
    axpy(1.0, dh.values(), chain->dh[trace.start].values());
    axpy(1.0, dc.values(), chain->dc[trace.start].values());
  }
}

PadChain ImplicitTower::pad_chain() const {
  PadChain chain;
  const std::size_t hs = lstm.hidden_size();
  chain.states.push_back(nn::LstmState::zeros(hs));
  chain.caches.resize(length_);
  const Tensor pad({lstm.input_size()});
  for (std::size_t k = 0; k < length_; ++k)
    chain.states.push_back(lstm.step(pad, chain.states.back(), &chain.caches[k]));
  chain.dh.assign(length_ + 1, Tensor({hs}));
  chain.dc.assign(length_ + 1, Tensor({hs}));
  return chain;
}

void ImplicitTower::backward_chain(PadChain& chain) {
  const std::size_t hs = lstm.hidden_size();
  Tensor dh({hs}), dc({hs});
  for (std::size_t k = length_; k >= 1; --k) {
    axpy(1.0, chain.dh[k].values(), dh.values());
    axpy(1.0, chain.dc[k].values(), dc.values());
    lstm.backward_step(chain.caches[k - 1], dh, dc);
    chain.dh[k].fill(0.0);
    chain.dc[k].fill(0.0);
  }
}

nn::ParameterList ImplicitTower::parameters() {
  nn::ParameterList p;
  lstm.collect(p);
  head.collect(p);
  return p;
}

ImplicitModel::ImplicitModel(const ImplicitConfig& c, std::uint64_t seed) : config(c) {
  c.validate();
  Rng rng(seed);
  Rng r1 = rng.fork(3), r2 = rng.fork(4);
  candidate = ImplicitTower("implicit.candidate", c.item_size(), c.hidden, c.d_i,
                            c.max_candidate_history, r1);
  post = ImplicitTower("implicit.post", c.item_size(), c.hidden, c.d_i, c.max_post_history, r2);
}

nn::ParameterList ImplicitModel::parameters() {
  auto p = candidate.parameters();
  for (auto* q : post.parameters()) p.push_back(q);
  return p;
}

nlohmann::json ImplicitModel::config_json() const { return to_json(config); }

ExplicitEmbeddings embed_all(const Corpus& corpus, const EncodedCorpus& encoded,
                             const ExplicitModel& model) {
  ExplicitEmbeddings e;
  e.d_e = model.resume.config.d_e;
  e.resumes.resize(corpus.records.size());
  parallel_for(corpus.records.size(),
               [&](std::size_t i) { e.resumes[i] = model.resume.forward(encoded.resumes[i]); });
  std::vector<PostId> ids;
  for (const auto& [id, doc] : encoded.posts) ids.push_back(id);
  std::vector<Tensor> posts(ids.size());
  parallel_for(ids.size(), [&](std::size_t k) { posts[k] = model.post.forward(encoded.posts.at(ids[k])); });
  for (std::size_t k = 0; k < ids.size(); ++k) e.posts.emplace(ids[k], std::move(posts[k]));
  return e;
}

namespace {

std::vector<Tensor> sequence_of(const Corpus& corpus, const ExplicitEmbeddings& emb,
                                const std::vector<std::size_t>& past, std::size_t max_len) {
  std::vector<HistoryEvent> events;
  const std::size_t first = past.size() > max_len ? past.size() - max_len : 0;
  for (std::size_t k = first; k < past.size(); ++k) {
    const auto& rec = corpus.records[past[k]];
    events.push_back({emb.resumes[past[k]].values(), emb.posts.at(rec.post).values(),
                      rec.label == 1 ? Decision::Accept : Decision::Reject});
  }
  return encode_history(events, max_len, emb.d_e);
}

void check_embeddings(const Corpus& corpus, const ExplicitEmbeddings& emb, const ImplicitConfig& c) {
  if (emb.resumes.size() != corpus.records.size() || emb.posts.size() != corpus.posts.size())
    throw DataError("implicit model: explicit embeddings are missing; load the explicit towers first");
  if (emb.d_e != c.d_e)
    throw DataError("implicit model: explicit embeddings have d_E " + std::to_string(emb.d_e) +
                    ", implicit config expects " + std::to_string(c.d_e));
}

double explicit_logit(const Corpus& corpus, const ExplicitEmbeddings& emb, std::size_t i) {
  return dot(emb.resumes[i].values(), emb.posts.at(corpus.records[i].post).values());
}

}  // namespace

HistorySequences history_sequences(const Corpus& corpus, const HistoryIndex& index,
                                   const ExplicitEmbeddings& embeddings, std::size_t record,
                                   const ImplicitConfig& config) {
  const History h = index.before(record);
  return {sequence_of(corpus, embeddings, h.post_history, config.max_post_history),
          sequence_of(corpus, embeddings, h.candidate_history, config.max_candidate_history)};
}

TrainConfig implicit_train_defaults() {
  TrainConfig c;
  c.adam.lr = 0.001;
  c.adam.weight_decay = 1e-4;
  return c;
}

std::vector<double> implicit_logits(const Corpus& corpus, const ExplicitEmbeddings& embeddings,
                                    const ImplicitModel& model, IndexRange range) {
  check_embeddings(corpus, embeddings, model.config);
  const HistoryIndex index(corpus);
  const PadChain post_chain = model.post.pad_chain();
  const PadChain cand_chain = model.candidate.pad_chain();
  std::vector<double> out(range.size());
  parallel_for(range.size(), [&](std::size_t k) {
    const auto seq = history_sequences(corpus, index, embeddings, range.begin + k, model.config);
    const Tensor g = model.post.forward(seq.post, nullptr, &post_chain);
    const Tensor f = model.candidate.forward(seq.candidate, nullptr, &cand_chain);
    out[k] = dot(f.values(), g.values());
  });
  return out;
}

TrainResult train_implicit(const Corpus& corpus, const DatasetSplit& split,
                           const ExplicitEmbeddings& embeddings, ImplicitModel& model,
                           const TrainConfig& config) {
  if (split.train.size() == 0) throw DataError("train_implicit: empty train split");
  if (config.batch == 0) throw ConfigError("train_implicit: batch must be >= 1");
  check_embeddings(corpus, embeddings, model.config);
  const bool residual = model.config.objective == ImplicitObjective::Residual;
  const HistoryIndex index(corpus);
  auto params = model.parameters();
  nn::zero_grads(params);
  Rng rng = Rng(config.seed).fork(0x1a7e);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), split.train.begin);

  std::vector<int> val_labels;
  std::vector<double> val_offset;
  for (std::size_t i = split.validation.begin; i < split.validation.end; ++i) {
    val_labels.push_back(corpus.records[i].label);
    val_offset.push_back(residual ? explicit_logit(corpus, embeddings, i) : 0.0);
  }

  TrainResult result;
  std::vector<Tensor> best;
  bool have_best = false;
  ImplicitTower::Trace tc, tp;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0, batch = 1; start < order.size(); start += config.batch, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      PadChain post_chain = model.post.pad_chain();
      PadChain cand_chain = model.candidate.pad_chain();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const int label = corpus.records[i].label;
        const auto seq = history_sequences(corpus, index, embeddings, i, model.config);
        const Tensor g = model.post.forward(seq.post, &tp, &post_chain);
        const Tensor f = model.candidate.forward(seq.candidate, &tc, &cand_chain);
        const double z =
            dot(f.values(), g.values()) + (residual ? explicit_logit(corpus, embeddings, i) : 0.0);
        const double loss = nn::bce_loss(nn::sigmoid(z), label);
        if (!std::isfinite(z) || !std::isfinite(loss))
          throw NumericalError("train_implicit: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch));
        total += loss;
        const double dz = nn::bce_logit_grad(z, label) * scale;
        Tensor df = g, dg = f;
        for (double& v : df.values()) v *= dz;
        for (double& v : dg.values()) v *= dz;
        model.post.backward(tp, dg, &post_chain);
        model.candidate.backward(tc, df, &cand_chain);
      }
      model.post.backward_chain(post_chain);
      model.candidate.backward_chain(cand_chain);
      nn::adam_step(params, config.adam);
      nn::zero_grads(params);
    }
    EpochLog log{epoch, total / static_cast<double>(order.size()), 0.0};
    if (split.validation.size() > 0) {
      auto scores = implicit_logits(corpus, embeddings, model, split.validation);
      for (std::size_t k = 0; k < scores.size(); ++k) scores[k] += val_offset[k];
      log.validation_auc = compute_auc(scores, val_labels).value_or(0.5);
    }
    result.log.push_back(log);
    if (config.on_epoch) config.on_epoch(log);
    if (!have_best || log.validation_auc > result.best_validation_auc) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_validation_auc = log.validation_auc;
      best = snapshot(params);
    }
  }
  if (have_best) restore(params, best);
  return result;
}

}  // namespace pjfit
