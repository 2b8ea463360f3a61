#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamforge/encode/encode.hpp"

namespace streamforge::cnn {

class CnnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed three-block architecture; only the training knobs move.
struct CnnConfig {
  std::array<int, 3> channels = {32, 64, 128};
  int kernel = 3;  ///< 3x3, stride 1, padding 1 (fixed)
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 32;
  unsigned seed = 1;
  int ensemble = 3;  ///< number of independently seeded trainings (K)
  /// Stop early once held-out accuracy reaches this value (0 disables).
  double stop_at_accuracy = 0.0;
  double validation_fraction = 0.2;
};

enum class NegativeKind { RowPermuted, PositionSwapped, UniformRandom };

const char* negative_kind_name(NegativeKind kind);

struct NegativeSample {
  encode::SolutionTensor tensor;
  NegativeKind kind = NegativeKind::RowPermuted;
  int source_index = 0;  ///< positive the sample was perturbed from
};

/// One retained convolution filter and what it saw on the positive corpus.
struct FilterRecord {
  unsigned seed = 0;
  int layer = 0;   ///< 0, 1 or 2
  int filter = 0;  ///< index within the layer
  std::vector<double> activations;  ///< spatial mean per positive solution
  double variance = 0.0;            ///< population variance of `activations`
  std::vector<double> mean_map;     ///< H x W activation map, corpus average
  int map_height = 0;
  int map_width = 0;
};

/// Solutions at the two ends of one filter's activation range.
struct ContrastPair {
  unsigned seed = 0;
  int layer = 0;
  int filter = 0;
  std::vector<int> high_ids;  ///< solution indices, strongest activation first
  std::vector<int> low_ids;   ///< solution indices, weakest activation first
  std::vector<double> high_activations;
  std::vector<double> low_activations;
  bool degenerate = false;  ///< zero activation variance
};

// ---- model -----------------------------------------------------------------

/// Three conv blocks (3x3, stride 1, padding 1, batch norm, ReLU) followed by
/// global average pooling and a single logit.  All arithmetic is double
/// precision; training-mode losses are pure functions of parameters and
/// input, so analytic gradients can be verified by finite differences.
class CnnModel {
 public:
  CnnModel(int in_channels, int height, int width, const CnnConfig& config,
           unsigned seed);

  int in_channels() const { return in_c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  const std::array<int, 3>& channels() const { return channels_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::vector<double>& running_stats() { return running_; }
  const std::vector<double>& running_stats() const { return running_; }

  /// Mean logistic loss of a labelled batch in training mode (batch-norm uses
  /// batch statistics; running statistics are not touched).  Labels are +1
  /// or -1.
  double training_loss(const std::vector<const encode::SolutionTensor*>& xs,
                       const std::vector<int>& ys) const;

  /// As `training_loss`, also writing d(loss)/d(parameter) for every
  /// parameter into `grad` (resized to the parameter count).
  double training_loss_and_grad(
      const std::vector<const encode::SolutionTensor*>& xs,
      const std::vector<int>& ys, std::vector<double>& grad) const;

  /// One SGD-visible step's worth of bookkeeping: computes loss and gradient
  /// and folds the batch statistics into the running batch-norm statistics.
  double train_step(const std::vector<const encode::SolutionTensor*>& xs,
                    const std::vector<int>& ys, std::vector<double>& grad);

  /// Evaluation-mode logit (batch norm uses running statistics).
  double logit(const encode::SolutionTensor& x) const;

  /// Evaluation-mode post-ReLU activation map of one filter, H x W.
  std::vector<double> activation_map(const encode::SolutionTensor& x, int layer,
                                     int filter) const;

  /// Evaluation-mode post-ReLU activations of every filter in every layer for
  /// one input; per layer the data is filter-major (filter, row, column).
  std::array<std::vector<double>, 3> activations(
      const encode::SolutionTensor& x) const;

  /// Spatial mean of `activation_map`.
  double mean_activation(const encode::SolutionTensor& x, int layer,
                         int filter) const;

 private:
  struct Cache;
  double forward(const std::vector<const encode::SolutionTensor*>& xs,
                 const std::vector<int>& ys, bool training, Cache* cache) const;
  void backward(const Cache& cache, const std::vector<int>& ys,
                std::vector<double>& grad) const;

  int in_c_, h_, w_;
  std::array<int, 3> channels_;
  std::vector<double> params_;
  std::vector<double> running_;  ///< per BN layer: means then variances
  // Parameter layout offsets.
  struct Block {
    std::size_t conv_w, conv_b, bn_gamma, bn_beta;
    int in_c, out_c;
  };
  std::array<Block, 3> blocks_;
  std::size_t fc_w_, fc_b_;
  std::array<std::size_t, 3> run_mean_, run_var_;

  friend void save_model(const CnnModel&, const std::string&);
  friend CnnModel load_model(const std::string&);
};

/// Writes the weights (and running statistics) as a versioned text container.
void save_model(const CnnModel& model, const std::string& path);
CnnModel load_model(const std::string& path);

// ---- operations ------------------------------------------------------------

/// One negative per positive; generator kinds cycle in fixed order
/// (row_permuted, position_swapped, uniform_random).  Throws on an empty
/// corpus or degenerate 1x1 tensors.
std::vector<NegativeSample> generate_negatives(
    const std::vector<encode::SolutionTensor>& positives, unsigned seed);

struct SeedReport {
  unsigned seed = 0;
  double holdout_accuracy = 0.0;
  int epochs_run = 0;
  double final_loss = 0.0;
  bool no_signal = false;  ///< held-out accuracy indistinguishable from chance
};

struct TrainResult {
  std::vector<FilterRecord> records;  ///< 18 per ensemble member
  std::vector<SeedReport> reports;
  std::vector<CnnModel> models;  ///< one per ensemble member, seed order
};

/// Trains `config.ensemble` independently seeded models contrastively and
/// returns, per seed, the top six filters per layer ranked by per-solution
/// mean-activation variance over the positives.
TrainResult train_contrastive(const std::vector<encode::SolutionTensor>& positives,
                              const std::vector<NegativeSample>& negatives,
                              const CnnConfig& config);

/// Number of solutions on each side of a contrast pair for a corpus of n.
int contrast_group_size(std::size_t corpus_size);

/// One pair per record: the q strongest and q weakest activations, with
/// solution-index tie-breaks.  Throws when the corpus is smaller than 2q.
std::vector<ContrastPair> select_contrast_pairs(
    const std::vector<FilterRecord>& records, std::size_t corpus_size);

}  // namespace streamforge::cnn
