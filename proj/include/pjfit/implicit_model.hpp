#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pjfit/corpus.hpp"
#include "pjfit/explicit_model.hpp"
#include "pjfit/nn.hpp"

namespace pjfit {

enum class Decision { Accept, Reject, Pad };

// One past application as seen by the encoder.
struct HistoryEvent {
  std::span<const double> resume;  // f_E(r)
  std::span<const double> post;    // g_E(p)
  Decision decision;
};

// [f_E(r); onehot(decision); g_E(p)], onehot 10 accept, 01 reject, 00 pad.
Tensor history_item(const HistoryEvent& event, std::size_t d_e);
Tensor pad_item(std::size_t d_e);

// Keeps the most recent max_len events and left-pads with zero items, so
// the result always has exactly max_len items in chronological order.
std::vector<Tensor> encode_history(std::span<const HistoryEvent> events, std::size_t max_len,
                                   std::size_t d_e);

// How the implicit logit enters training. Residual trains f_I . g_I on top
// of the frozen explicit logit, i.e. the fused score itself; Standalone
// trains sigmoid(f_I . g_I) alone.
enum class ImplicitObjective { Residual, Standalone };

struct ImplicitConfig {
  std::size_t d_e = 32;
  std::size_t hidden = 64;
  std::size_t d_i = 64;
  std::size_t max_post_history = 20;
  std::size_t max_candidate_history = 5;
  ImplicitObjective objective = ImplicitObjective::Residual;

  std::size_t item_size() const { return 2 * d_e + 2; }
  void validate() const;
  friend bool operator==(const ImplicitConfig&, const ImplicitConfig&) = default;
};

nlohmann::json to_json(const ImplicitConfig& c);
ImplicitConfig implicit_config_from_json(const nlohmann::json& j);

// LSTM states after 0..L padding items from the zero state. Every sequence
// with k leading pad items starts from states[k], and their gradients at
// that boundary are summed so the shared prefix is back-propagated once.
struct PadChain {
  std::vector<nn::LstmState> states;
  std::vector<nn::LstmStepCache> caches;
  std::vector<Tensor> dh;
  std::vector<Tensor> dc;
};

// LSTM over a fixed-length history, last hidden state through a dense head.
class ImplicitTower {
 public:
  struct Trace {
    std::size_t start = 0;  // leading items served by the pad chain
    std::vector<nn::LstmStepCache> steps;
    Tensor h_last;
    bool filled = false;
  };

  ImplicitTower() = default;
  ImplicitTower(const std::string& name, std::size_t item_size, std::size_t hidden,
                std::size_t d_i, std::size_t length, Rng& rng);

  std::size_t length() const { return length_; }

  // Throws ShapeError unless the sequence has length() items of the right size.
  Tensor forward(const std::vector<Tensor>& sequence, Trace* trace = nullptr,
                 const PadChain* chain = nullptr) const;
  void backward(const Trace& trace, const Tensor& dy, PadChain* chain = nullptr);

  PadChain pad_chain() const;
  void backward_chain(PadChain& chain);

  nn::ParameterList parameters();

  std::string name;
  nn::LstmCell lstm;
  nn::Dense head;

 private:
  std::size_t length_ = 0;
};

inline Tensor implicit_embed(const std::vector<Tensor>& sequence, const ImplicitTower& tower) {
  return tower.forward(sequence);
}

struct ImplicitModel {
  ImplicitModel() = default;
  ImplicitModel(const ImplicitConfig& config, std::uint64_t seed);

  nn::ParameterList parameters();
  nlohmann::json config_json() const;

  ImplicitConfig config;
  ImplicitTower candidate;  // f_I over the candidate's past applications
  ImplicitTower post;       // g_I over the post's past applications
};

// Frozen explicit embeddings of every record's resume and every post.
struct ExplicitEmbeddings {
  std::size_t d_e = 0;
  std::vector<Tensor> resumes;
  std::map<PostId, Tensor> posts;
};
ExplicitEmbeddings embed_all(const Corpus& corpus, const EncodedCorpus& encoded,
                             const ExplicitModel& model);

// Encoded history sequences of one record, built from history_before.
struct HistorySequences {
  std::vector<Tensor> post;
  std::vector<Tensor> candidate;
};
HistorySequences history_sequences(const Corpus& corpus, const HistoryIndex& index,
                                   const ExplicitEmbeddings& embeddings, std::size_t record,
                                   const ImplicitConfig& config);

TrainConfig implicit_train_defaults();  // lr 0.001, weight decay 1e-4

// Trains both implicit towers; the explicit embeddings stay fixed. Keeps
// the parameters of the epoch with the best validation AUC of the trained
// objective. Throws DataError when the embeddings do not match the config.
TrainResult train_implicit(const Corpus& corpus, const DatasetSplit& split,
                           const ExplicitEmbeddings& embeddings, ImplicitModel& model,
                           const TrainConfig& config);

// f_I(c) . g_I(p) for records [begin, end).
std::vector<double> implicit_logits(const Corpus& corpus, const ExplicitEmbeddings& embeddings,
                                    const ImplicitModel& model, IndexRange range);

}  // namespace pjfit
