#include "pjfit/explicit_model.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pjfit/checkpoint.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/metrics.hpp"
#include "pjfit/parallel.hpp"

namespace pjfit {

namespace {

void require_active(const SparseFeature& x, std::size_t fields, std::size_t rows, const char* op) {
  if (x.active() != fields)
    throw ShapeError(std::string(op) + ": " + std::to_string(x.active()) +
                     " active slots, expected " + std::to_string(fields));
  if (x.values.size() != x.indices.size())
    throw ShapeError(std::string(op) + ": indices and values differ in length");
  for (std::size_t idx : x.indices)
    if (idx >= rows)
      throw ShapeError(std::string(op) + ": slot " + std::to_string(idx) + " outside d_x " +
                       std::to_string(rows));
}

std::size_t pooled(std::size_t h, std::size_t pool) { return (h + pool - 1) / pool; }

std::size_t text_flat_size(const TextCnnConfig& c) {
  return c.sentences * c.channels * pooled(pooled(c.words, c.pool), c.pool);
}

}  // namespace

void ExplicitConfig::validate() const {
  if (fields == 0 || sparse_dim < fields) throw ConfigError("explicit config: need 1 <= s <= d_x");
  if (d_fm == 0) throw ConfigError("explicit config: d_fm must be >= 1");
  if (d_e == 0) throw ConfigError("explicit config: d_E must be >= 1");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("explicit config: block widths must be >= 1");
  if (use_text) {
    const auto& t = text;
    if (t.vocab < 2 || t.sentences == 0 || t.words == 0 || t.embed == 0 || t.channels == 0 ||
        t.kernel == 0 || t.kernel % 2 == 0 || t.pool == 0 || t.out == 0)
      throw ConfigError("explicit config: text dims must be >= 1 and the kernel height odd");
  }
}

nlohmann::json to_json(const ExplicitConfig& c) {
  return {{"fields", c.fields},
          {"sparse_dim", c.sparse_dim},
          {"d_fm", c.d_fm},
          {"d_e", c.d_e},
          {"hidden", c.hidden},
          {"use_text", c.use_text},
          {"text",
           {{"vocab", c.text.vocab},
            {"sentences", c.text.sentences},
            {"words", c.text.words},
            {"embed", c.text.embed},
            {"channels", c.text.channels},
            {"kernel", c.text.kernel},
            {"pool", c.text.pool},
            {"out", c.text.out}}}};
}

ExplicitConfig explicit_config_from_json(const nlohmann::json& j) {
  ExplicitConfig c;
  try {
    c.fields = j.at("fields");
    c.sparse_dim = j.at("sparse_dim");
    c.d_fm = j.at("d_fm");
    c.d_e = j.at("d_e");
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.use_text = j.at("use_text");
    const auto& t = j.at("text");
    c.text.vocab = t.at("vocab");
    c.text.sentences = t.at("sentences");
    c.text.words = t.at("words");
    c.text.embed = t.at("embed");
    c.text.channels = t.at("channels");
    c.text.kernel = t.at("kernel");
    c.text.pool = t.at("pool");
    c.text.out = t.at("out");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed explicit config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor fm_first_order(const SparseFeature& x, const Tensor& w, std::size_t fields) {
  require_active(x, fields, w.size(), "fm_first_order");
  Tensor out({fields});
  for (std::size_t j = 0; j < fields; ++j) out[j] = w[x.indices[j]] * x.values[j];
  return out;
}

Tensor fm_second_order(const SparseFeature& x, const Tensor& v, std::size_t fields) {
  require_active(x, fields, v.dim(0), "fm_second_order");
  const std::size_t d = v.dim(1);
  Tensor sum({d}), sq({d});
  for (std::size_t j = 0; j < fields; ++j) {
    const auto row = v.row(x.indices[j]);
    for (std::size_t k = 0; k < d; ++k) {
      const double a = row[k] * x.values[j];
      sum[k] += a;
      sq[k] += a * a;
    }
  }
  for (std::size_t k = 0; k < d; ++k) sum[k] = sum[k] * sum[k] - sq[k];
  return sum;
}

Tensor fm_embeddings(const SparseFeature& x, const Tensor& v, std::size_t fields) {
  require_active(x, fields, v.dim(0), "fm_embeddings");
  const std::size_t d = v.dim(1);
  Tensor out({fields * d});
  for (std::size_t j = 0; j < fields; ++j) {
    const auto row = v.row(x.indices[j]);
    for (std::size_t k = 0; k < d; ++k) out[j * d + k] = row[k] * x.values[j];
  }
  return out;
}

Tensor deep_component(const Tensor& embedded, const std::vector<nn::Dense>& blocks,
                      DeepTrace* trace) {
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Tensor h = embedded;
  for (const auto& block : blocks) {
    Tensor pre = block.forward(h);
    Tensor next = nn::relu(pre);
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

Tensor deep_backward(std::vector<nn::Dense>& blocks, const DeepTrace& trace, const Tensor& dy) {
  if (trace.inputs.size() != blocks.size())
    throw ShapeError("deep_backward: trace does not match the block stack");
  Tensor d = dy;
  for (std::size_t b = blocks.size(); b-- > 0;) {
    d = nn::relu_backward(trace.pre[b], d);
    d = blocks[b].backward(trace.inputs[b], d);
  }
  return d;
}

TextCnn::TextCnn(const std::string& name, const TextCnnConfig& c, Rng& rng)
    : config(c),
      words(name + ".words", c.vocab, c.embed, rng),
      conv1(name + ".conv1", 1, c.channels, c.kernel, c.embed, c.kernel / 2, 0, rng),
      conv2(name + ".conv2", c.channels, c.channels, c.kernel, 1, c.kernel / 2, 0, rng),
      head(name + ".head", text_flat_size(c), c.out, rng) {}

std::size_t TextCnn::flat_size() const { return text_flat_size(config); }

Tensor TextCnn::forward(const TextMatrix& text, Trace* trace) const {
  if (text.sentences != config.sentences || text.words != config.words ||
      text.ids.size() != text.sentences * text.words)
    throw ShapeError("text_cnn: text matrix " + std::to_string(text.sentences) + "x" +
                     std::to_string(text.words) + ", expected " +
                     std::to_string(config.sentences) + "x" + std::to_string(config.words));
  for (std::size_t id : text.ids)
    if (id >= config.vocab)
      throw ShapeError("text_cnn: word index " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(config.vocab));
  Tensor embedded = words.forward(text.ids).reshaped({config.sentences, 1, config.words, config.embed});
  Tensor c1 = conv1.forward(embedded);
  auto p1 = nn::max_pool2d(nn::relu(c1), config.pool, 1);
  Tensor c2 = conv2.forward(p1.output);
  auto p2 = nn::max_pool2d(nn::relu(c2), config.pool, 1);
  Tensor flat = p2.output.reshaped({p2.output.size()});
  Tensor y = head.forward(flat);
  if (trace) {
    trace->ids = text.ids;
    trace->embedded = std::move(embedded);
    trace->conv1 = std::move(c1);
    trace->pool1 = std::move(p1);
    trace->conv2 = std::move(c2);
    trace->pool2 = std::move(p2);
    trace->flat = std::move(flat);
    trace->filled = true;
  }
  return y;
}

void TextCnn::backward(const Trace& t, const Tensor& dy) {
  if (!t.filled) throw ShapeError("text_cnn backward: no forward pass recorded");
  Tensor d = head.backward(t.flat, dy).reshaped(t.pool2.output.shape());
  d = nn::max_pool2d_backward(t.pool2, d);
  d = conv2.backward(t.pool1.output, nn::relu_backward(t.conv2, d));
  d = nn::max_pool2d_backward(t.pool1, d);
  d = conv1.backward(t.embedded, nn::relu_backward(t.conv1, d));
  words.backward(t.ids, d.reshaped({t.ids.size(), config.embed}));
}

void TextCnn::collect(nn::ParameterList& out) {
  words.collect(out);
  conv1.collect(out);
  conv2.collect(out);
  head.collect(out);
}

ExplicitTower::ExplicitTower(const std::string& tower_name, const ExplicitConfig& c, Rng& rng)
    : name(tower_name),
      config(c),
      fm_w(tower_name + ".fm.w", {c.sparse_dim}),
      fm_v(tower_name + ".fm.v", {c.sparse_dim, c.d_fm}) {
  c.validate();
  nn::init_uniform(fm_w, c.fields, rng);
  nn::init_uniform(fm_v, c.d_fm, rng);
  std::size_t width = c.fields * c.d_fm;
  for (std::size_t b = 0; b < c.hidden.size(); ++b) {
    blocks.emplace_back(tower_name + ".deep." + std::to_string(b), width, c.hidden[b], rng);
    width = c.hidden[b];
  }
  std::size_t joint = c.fields + c.d_fm + width;
  if (c.use_text) {
    text = TextCnn(tower_name + ".text", c.text, rng);
    joint += c.text.out;
  }
  out = nn::Dense(tower_name + ".out", joint, c.d_e, rng);
}

Tensor ExplicitTower::forward(const EncodedDocument& doc, Trace* trace) const {
  const auto& x = doc.features;
  if (x.dim != config.sparse_dim)
    throw ShapeError("explicit_embed: sparse vector of length " + std::to_string(x.dim) +
                     ", tower expects d_x " + std::to_string(config.sparse_dim));
  const Tensor first = fm_first_order(x, fm_w.value, config.fields);
  const Tensor second = fm_second_order(x, fm_v.value, config.fields);
  Tensor embedded = fm_embeddings(x, fm_v.value, config.fields);
  const Tensor deep = deep_component(embedded, blocks, trace ? &trace->deep : nullptr);
  Tensor joint;
  if (config.use_text) {
    const Tensor t = text.forward(doc.text, trace ? &trace->text : nullptr);
    joint = concat({&first, &second, &deep, &t});
  } else {
    joint = concat({&first, &second, &deep});
  }
  Tensor y = out.forward(joint);
  if (trace) {
    trace->x = x;
    trace->embedded = std::move(embedded);
    trace->joint = std::move(joint);
    trace->filled = true;
  }
  return y;
}

void ExplicitTower::backward(const Trace& t, const Tensor& dy) {
  if (!t.filled) throw ShapeError("explicit tower backward: no forward pass recorded");
  const std::size_t s = config.fields, d = config.d_fm;
  const Tensor djoint = out.backward(t.joint, dy);
  const std::size_t deep_width = config.hidden.empty() ? s * d : config.hidden.back();
  const auto parts = config.use_text ? split(djoint, {s, d, deep_width, config.text.out})
                                     : split(djoint, {s, d, deep_width});
  const auto& x = t.x;

  for (std::size_t j = 0; j < s; ++j) fm_w.grad[x.indices[j]] += parts[0][j] * x.values[j];

  std::vector<double> sum(d, 0.0);
  for (std::size_t j = 0; j < s; ++j) {
    const auto row = fm_v.value.row(x.indices[j]);
    for (std::size_t k = 0; k < d; ++k) sum[k] += row[k] * x.values[j];
  }
  const Tensor demb = deep_backward(blocks, t.deep, parts[2]);
  for (std::size_t j = 0; j < s; ++j) {
    const auto row = fm_v.value.row(x.indices[j]);
    auto grow = fm_v.grad.row(x.indices[j]);
    const double xv = x.values[j];
    for (std::size_t k = 0; k < d; ++k) {
      grow[k] += parts[1][k] * 2.0 * (sum[k] - row[k] * xv) * xv;
      grow[k] += demb[j * d + k] * xv;
    }
  }
  if (config.use_text) text.backward(t.text, parts[3]);
}

nn::ParameterList ExplicitTower::parameters() {
  nn::ParameterList p{&fm_w, &fm_v};
  for (auto& b : blocks) b.collect(p);
  if (config.use_text) text.collect(p);
  out.collect(p);
  return p;
}

ExplicitModel::ExplicitModel(const ExplicitConfig& resume_config, const ExplicitConfig& post_config,
                             std::uint64_t seed) {
  if (resume_config.d_e != post_config.d_e)
    throw ConfigError("explicit towers must share d_E");
  Rng rng(seed);
  Rng r1 = rng.fork(1), r2 = rng.fork(2);
  resume = ExplicitTower("explicit.resume", resume_config, r1);
  post = ExplicitTower("explicit.post", post_config, r2);
}

nn::ParameterList ExplicitModel::parameters() {
  auto p = resume.parameters();
  for (auto* q : post.parameters()) p.push_back(q);
  return p;
}

nlohmann::json ExplicitModel::config_json() const {
  return {{"resume", to_json(resume.config)}, {"post", to_json(post.config)}};
}

ExplicitConfig explicit_config_for(const DocumentSchema& schema, const ExplicitConfig& base) {
  ExplicitConfig c = base;
  c.fields = schema.entities.size();
  c.sparse_dim = schema.entities.sparse_dim();
  c.text.vocab = schema.words.size();
  return c;
}

EncodedCorpus encode_corpus(const Corpus& corpus, const FittedSchemas& schemas,
                            const TextCnnConfig& resume_text, const TextCnnConfig& post_text) {
  EncodedCorpus e;
  e.resumes.resize(corpus.records.size());
  parallel_for(corpus.records.size(), [&](std::size_t i) {
    e.resumes[i] = encode_document(corpus.records[i].resume, schemas.resume, resume_text.sentences,
                                   resume_text.words);
  });
  for (const auto& [id, doc] : corpus.posts)
    e.posts.emplace(id, encode_document(doc, schemas.post, post_text.sentences, post_text.words));
  return e;
}

TrainConfig explicit_train_defaults() {
  TrainConfig c;
  c.adam.lr = 0.005;
  c.adam.weight_decay = 1e-5;
  return c;
}

std::vector<double> explicit_logits(const Corpus& corpus, const EncodedCorpus& encoded,
                                    const ExplicitModel& model, IndexRange range) {
  std::map<PostId, std::size_t> slot;
  std::vector<PostId> ids;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    if (slot.emplace(corpus.records[i].post, ids.size()).second) ids.push_back(corpus.records[i].post);
  }
  std::vector<Tensor> post_emb(ids.size());
  parallel_for(ids.size(), [&](std::size_t k) {
    post_emb[k] = model.post.forward(encoded.posts.at(ids[k]));
  });
  std::vector<double> out(range.size());
  parallel_for(range.size(), [&](std::size_t k) {
    const std::size_t i = range.begin + k;
    const Tensor f = model.resume.forward(encoded.resumes[i]);
    out[k] = dot(f.values(), post_emb[slot.at(corpus.records[i].post)].values());
  });
  return out;
}

namespace {

std::vector<int> labels_of(const Corpus& corpus, IndexRange range) {
  std::vector<int> out;
  for (std::size_t i = range.begin; i < range.end; ++i) out.push_back(corpus.records[i].label);
  return out;
}

}  // namespace

TrainResult train_explicit(const Corpus& corpus, const DatasetSplit& split,
                           const EncodedCorpus& encoded, ExplicitModel& model,
                           const TrainConfig& config) {
  if (split.train.size() == 0) throw DataError("train_explicit: empty train split");
  if (config.batch == 0) throw ConfigError("train_explicit: batch must be >= 1");
  auto params = model.parameters();
  nn::zero_grads(params);
  Rng rng = Rng(config.seed).fork(0x5eed);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), split.train.begin);
  const auto val_labels = labels_of(corpus, split.validation);

  TrainResult result;
  std::vector<Tensor> best;
  bool have_best = false;
  ExplicitTower::Trace tr, tp;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0, batch = 1; start < order.size(); start += config.batch, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto& rec = corpus.records[order[b]];
        const Tensor f = model.resume.forward(encoded.resumes[order[b]], &tr);
        const Tensor g = model.post.forward(encoded.posts.at(rec.post), &tp);
        const double z = dot(f.values(), g.values());
        const double loss = nn::bce_loss(nn::sigmoid(z), rec.label);
        if (!std::isfinite(z) || !std::isfinite(loss))
          throw NumericalError("train_explicit: non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch));
        total += loss;
        const double dz = nn::bce_logit_grad(z, rec.label) * scale;
        Tensor df = g, dg = f;
        for (double& v : df.values()) v *= dz;
        for (double& v : dg.values()) v *= dz;
        model.resume.backward(tr, df);
        model.post.backward(tp, dg);
      }
      nn::adam_step(params, config.adam);
      nn::zero_grads(params);
    }
    EpochLog log{epoch, total / static_cast<double>(order.size()), 0.0};
    if (split.validation.size() > 0) {
      const auto scores = explicit_logits(corpus, encoded, model, split.validation);
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
