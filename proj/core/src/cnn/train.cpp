#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "streamforge/cnn/cnn.hpp"

namespace streamforge::cnn {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;
/// Held-out accuracy below this is indistinguishable from coin flipping.
constexpr double kNoSignalAccuracy = 0.6;

void check_same_shape(const encode::SolutionTensor& t,
                      const encode::SolutionTensor& ref, const char* what) {
  if (t.channels != ref.channels || t.height != ref.height ||
      t.width != ref.width) {
    std::ostringstream msg;
    msg << what << " tensor is " << t.channels << "x" << t.height << "x"
        << t.width << " but the corpus is " << ref.channels << "x" << ref.height
        << "x" << ref.width;
    throw CnnError(msg.str());
  }
}

/// Swaps the single 1-cells of two rows of a permutation matrix, keeping
/// every row and column sum at exactly one.
void swap_permutation_rows(encode::SolutionTensor& t, std::mt19937_64& rng) {
  const int h = t.height;
  std::uniform_int_distribution<int> row_dist(0, h - 1);
  int r1 = row_dist(rng);
  int r2 = row_dist(rng);
  while (r2 == r1) r2 = row_dist(rng);
  auto one_column = [&](int row) {
    int best = 0;
    double best_v = t.at(0, row, 0);
    for (int x = 1; x < t.width; ++x) {
      if (t.at(0, row, x) > best_v) {
        best_v = t.at(0, row, x);
        best = x;
      }
    }
    return best;
  };
  const int c1 = one_column(r1);
  const int c2 = one_column(r2);
  if (c1 == c2) return;
  std::swap(t.data[t.index(0, r1, c1)], t.data[t.index(0, r1, c2)]);
  std::swap(t.data[t.index(0, r2, c1)], t.data[t.index(0, r2, c2)]);
}

struct SeedOutcome {
  CnnModel model;
  SeedReport report;
  std::vector<FilterRecord> records;
};

SeedOutcome train_one_seed(const std::vector<encode::SolutionTensor>& positives,
                           const std::vector<NegativeSample>& negatives,
                           const CnnConfig& config, unsigned seed) {
  const encode::SolutionTensor& ref = positives.front();
  const int n_pos = static_cast<int>(positives.size());
  const int n_neg = static_cast<int>(negatives.size());

  std::mt19937_64 rng(seed);
  CnnModel model(ref.channels, ref.height, ref.width, config, seed);

  // Class-balanced 80/20 split.
  auto split = [&](int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    int val_n = static_cast<int>(
        std::lround(config.validation_fraction * static_cast<double>(n)));
    val_n = std::clamp(val_n, n >= 2 ? 1 : 0, n - 1);
    return std::pair<std::vector<int>, std::vector<int>>(
        {idx.begin(), idx.end() - val_n}, {idx.end() - val_n, idx.end()});
  };
  auto [pos_train, pos_val] = split(n_pos);
  auto [neg_train, neg_val] = split(n_neg);

  // Labelled sample views: label +1 for solutions, -1 for negatives.
  struct Sample {
    const encode::SolutionTensor* tensor;
    int label;
  };
  std::vector<Sample> train;
  train.reserve(pos_train.size() + neg_train.size());
  for (int i : pos_train) {
    train.push_back({&positives[static_cast<std::size_t>(i)], 1});
  }
  for (int i : neg_train) {
    train.push_back({&negatives[static_cast<std::size_t>(i)].tensor, -1});
  }
  std::vector<Sample> val;
  val.reserve(pos_val.size() + neg_val.size());
  for (int i : pos_val) {
    val.push_back({&positives[static_cast<std::size_t>(i)], 1});
  }
  for (int i : neg_val) {
    val.push_back({&negatives[static_cast<std::size_t>(i)].tensor, -1});
  }

  std::vector<double> adam_m(model.parameters().size(), 0.0);
  std::vector<double> adam_v(model.parameters().size(), 0.0);
  long long adam_t = 0;

  auto evaluate = [&](const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    int correct = 0;
    for (const Sample& s : samples) {
      const double z = model.logit(*s.tensor);
      if ((z > 0.0) == (s.label > 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
  };

  SeedReport report;
  report.seed = seed;
  std::vector<double> grad;
  std::vector<const encode::SolutionTensor*> batch_x;
  std::vector<int> batch_y;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < train.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(train.size(), start + static_cast<std::size_t>(config.batch_size));
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_x.push_back(train[i].tensor);
        batch_y.push_back(train[i].label);
      }
      const double loss = model.train_step(batch_x, batch_y, grad);
      if (!std::isfinite(loss)) {
        throw CnnError("non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;
      ++batches;

      ++adam_t;
      std::vector<double>& params = model.parameters();
      const double bias1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_t));
      const double bias2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        adam_m[i] = kAdamBeta1 * adam_m[i] + (1.0 - kAdamBeta1) * grad[i];
        adam_v[i] = kAdamBeta2 * adam_v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        const double m_hat = adam_m[i] / bias1;
        const double v_hat = adam_v[i] / bias2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
      }
    }
    report.final_loss = batches > 0 ? epoch_loss / batches : 0.0;
    report.epochs_run = epoch;
    report.holdout_accuracy = evaluate(val.empty() ? train : val);
    if (config.stop_at_accuracy > 0.0 &&
        report.holdout_accuracy >= config.stop_at_accuracy) {
      break;
    }
  }
  report.no_signal = report.holdout_accuracy < kNoSignalAccuracy;

  // Per-filter statistics over the positive corpus, batch norm frozen.
  const int plane = ref.height * ref.width;
  const auto& channels = model.channels();
  std::array<std::vector<std::vector<double>>, 3> acts;   // [layer][filter][sol]
  std::array<std::vector<std::vector<double>>, 3> maps;   // [layer][filter][h*w]
  for (int l = 0; l < 3; ++l) {
    acts[static_cast<std::size_t>(l)].assign(
        static_cast<std::size_t>(channels[static_cast<std::size_t>(l)]),
        std::vector<double>(static_cast<std::size_t>(n_pos), 0.0));
    maps[static_cast<std::size_t>(l)].assign(
        static_cast<std::size_t>(channels[static_cast<std::size_t>(l)]),
        std::vector<double>(static_cast<std::size_t>(plane), 0.0));
  }
  for (int s = 0; s < n_pos; ++s) {
    const auto layer_acts = model.activations(positives[static_cast<std::size_t>(s)]);
    for (int l = 0; l < 3; ++l) {
      const std::vector<double>& a = layer_acts[static_cast<std::size_t>(l)];
      for (int f = 0; f < channels[static_cast<std::size_t>(l)]; ++f) {
        const double* map = a.data() + static_cast<std::size_t>(f) * plane;
        double sum = 0.0;
        for (int p = 0; p < plane; ++p) {
          sum += map[p];
          maps[static_cast<std::size_t>(l)][static_cast<std::size_t>(f)]
              [static_cast<std::size_t>(p)] += map[p];
        }
        acts[static_cast<std::size_t>(l)][static_cast<std::size_t>(f)]
            [static_cast<std::size_t>(s)] = sum / plane;
      }
    }
  }

  SeedOutcome outcome{std::move(model), report, {}};
  for (int l = 0; l < 3; ++l) {
    const int n_filters = channels[static_cast<std::size_t>(l)];
    std::vector<std::pair<double, int>> ranked;  // (variance, filter)
    ranked.reserve(static_cast<std::size_t>(n_filters));
    for (int f = 0; f < n_filters; ++f) {
      const std::vector<double>& a =
          acts[static_cast<std::size_t>(l)][static_cast<std::size_t>(f)];
      double mean = 0.0;
      for (double v : a) mean += v;
      mean /= static_cast<double>(a.size());
      double var = 0.0;
      for (double v : a) var += (v - mean) * (v - mean);
      var /= static_cast<double>(a.size());
      ranked.emplace_back(var, f);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const int keep = std::min(6, n_filters);
    for (int i = 0; i < keep; ++i) {
      FilterRecord rec;
      rec.seed = seed;
      rec.layer = l;
      rec.filter = ranked[static_cast<std::size_t>(i)].second;
      rec.activations =
          acts[static_cast<std::size_t>(l)][static_cast<std::size_t>(rec.filter)];
      rec.variance = ranked[static_cast<std::size_t>(i)].first;
      rec.mean_map =
          maps[static_cast<std::size_t>(l)][static_cast<std::size_t>(rec.filter)];
      for (double& v : rec.mean_map) v /= static_cast<double>(n_pos);
      rec.map_height = ref.height;
      rec.map_width = ref.width;
      outcome.records.push_back(std::move(rec));
    }
  }
  return outcome;
}

}  // namespace

const char* negative_kind_name(NegativeKind kind) {
  switch (kind) {
    case NegativeKind::RowPermuted: return "row_permuted";
    case NegativeKind::PositionSwapped: return "position_swapped";
    case NegativeKind::UniformRandom: return "uniform_random";
  }
  return "unknown";
}

std::vector<NegativeSample> generate_negatives(
    const std::vector<encode::SolutionTensor>& positives, unsigned seed) {
  if (positives.empty()) {
    throw CnnError("cannot generate negatives from an empty corpus");
  }
  const encode::SolutionTensor& ref = positives.front();
  if (ref.height * ref.width <= 1) {
    throw CnnError("cannot generate negatives for degenerate 1x1 tensors");
  }
  for (const encode::SolutionTensor& t : positives) {
    check_same_shape(t, ref, "positive");
  }

  // Pooled empirical value distribution for uniform-random redraws.
  std::vector<double> pool;
  pool.reserve(positives.size() * ref.data.size());
  for (const encode::SolutionTensor& t : positives) {
    pool.insert(pool.end(), t.data.begin(), t.data.end());
  }

  std::mt19937_64 rng(seed);
  std::vector<NegativeSample> negatives;
  negatives.reserve(positives.size());
  const std::array<NegativeKind, 3> cycle = {NegativeKind::RowPermuted,
                                             NegativeKind::PositionSwapped,
                                             NegativeKind::UniformRandom};
  for (std::size_t i = 0; i < positives.size(); ++i) {
    NegativeSample sample;
    sample.kind = cycle[i % 3];
    sample.source_index = static_cast<int>(i);
    sample.tensor = positives[i];
    encode::SolutionTensor& t = sample.tensor;
    switch (sample.kind) {
      case NegativeKind::RowPermuted: {
        std::vector<int> order(static_cast<std::size_t>(t.height));
        std::iota(order.begin(), order.end(), 0);
        if (t.height > 1) {
          do {
            std::shuffle(order.begin(), order.end(), rng);
          } while (std::is_sorted(order.begin(), order.end()));
        }
        const encode::SolutionTensor& src = positives[i];
        for (int c = 0; c < t.channels; ++c) {
          for (int y = 0; y < t.height; ++y) {
            const int sy = order[static_cast<std::size_t>(y)];
            for (int x = 0; x < t.width; ++x) {
              t.data[t.index(c, y, x)] = src.at(c, sy, x);
            }
          }
        }
        break;
      }
      case NegativeKind::PositionSwapped: {
        if (t.kind == corpus::ShapeKind::Permutation && t.height > 1) {
          swap_permutation_rows(t, rng);
        } else {
          // Two independent random cell swaps.
          std::uniform_int_distribution<std::size_t> cell(0, t.data.size() - 1);
          for (int rep = 0; rep < 2; ++rep) {
            std::size_t a = cell(rng);
            std::size_t b = cell(rng);
            while (b == a) b = cell(rng);
            std::swap(t.data[a], t.data[b]);
          }
        }
        break;
      }
      case NegativeKind::UniformRandom: {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (double& v : t.data) v = pool[pick(rng)];
        break;
      }
    }
    negatives.push_back(std::move(sample));
  }
  return negatives;
}

TrainResult train_contrastive(const std::vector<encode::SolutionTensor>& positives,
                              const std::vector<NegativeSample>& negatives,
                              const CnnConfig& config) {
  if (positives.empty()) throw CnnError("cannot train on an empty corpus");
  if (negatives.empty()) throw CnnError("cannot train without negatives");
  if (config.ensemble < 1) throw CnnError("ensemble size must be at least one");
  if (config.epochs < 1) throw CnnError("epoch count must be at least one");
  if (config.batch_size < 1) throw CnnError("batch size must be at least one");
  if (config.validation_fraction <= 0.0 || config.validation_fraction >= 1.0) {
    throw CnnError("validation fraction must lie strictly between zero and one");
  }
  const encode::SolutionTensor& ref = positives.front();
  for (const encode::SolutionTensor& t : positives) {
    check_same_shape(t, ref, "positive");
  }
  for (const NegativeSample& s : negatives) {
    check_same_shape(s.tensor, ref, "negative");
  }

  const int k = config.ensemble;
  std::vector<SeedOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(k));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
  {
    // Ensemble members are independent; run them as parallel tasks.
    std::vector<std::optional<SeedOutcome>> slots(static_cast<std::size_t>(k));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      workers.emplace_back([&, i] {
        try {
          slots[static_cast<std::size_t>(i)] = train_one_seed(
              positives, negatives, config, config.seed + static_cast<unsigned>(i));
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      });
    }
    for (std::thread& t : workers) t.join();
    for (int i = 0; i < k; ++i) {
      if (errors[static_cast<std::size_t>(i)]) {
        std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
      }
      outcomes.push_back(std::move(*slots[static_cast<std::size_t>(i)]));
    }
  }

  TrainResult result;
  for (SeedOutcome& o : outcomes) {
    result.reports.push_back(o.report);
    for (FilterRecord& r : o.records) result.records.push_back(std::move(r));
    result.models.push_back(std::move(o.model));
  }
  return result;
}

int contrast_group_size(std::size_t corpus_size) {
  const std::size_t five_percent = (corpus_size + 19) / 20;
  return static_cast<int>(std::max<std::size_t>(3, five_percent));
}

std::vector<ContrastPair> select_contrast_pairs(
    const std::vector<FilterRecord>& records, std::size_t corpus_size) {
  const int q = contrast_group_size(corpus_size);
  if (corpus_size < 2 * static_cast<std::size_t>(q)) {
    std::ostringstream msg;
    msg << "corpus of " << corpus_size << " solutions is too small for contrast"
        << " groups of " << q;
    throw CnnError(msg.str());
  }
  std::vector<ContrastPair> pairs;
  pairs.reserve(records.size());
  for (const FilterRecord& rec : records) {
    if (rec.activations.size() != corpus_size) {
      throw CnnError("filter record does not cover the corpus");
    }
    std::vector<int> ids(corpus_size);
    std::iota(ids.begin(), ids.end(), 0);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
      const double va = rec.activations[static_cast<std::size_t>(a)];
      const double vb = rec.activations[static_cast<std::size_t>(b)];
      if (va != vb) return va > vb;
      return a < b;
    });
    ContrastPair pair;
    pair.seed = rec.seed;
    pair.layer = rec.layer;
    pair.filter = rec.filter;
    pair.degenerate = rec.variance == 0.0;
    pair.high_ids.assign(ids.begin(), ids.begin() + q);
    std::vector<int> rest(ids.begin() + q, ids.end());
    std::sort(rest.begin(), rest.end(), [&](int a, int b) {
      const double va = rec.activations[static_cast<std::size_t>(a)];
      const double vb = rec.activations[static_cast<std::size_t>(b)];
      if (va != vb) return va < vb;
      return a < b;
    });
    pair.low_ids.assign(rest.begin(), rest.begin() + q);
    for (int id : pair.high_ids) {
      pair.high_activations.push_back(rec.activations[static_cast<std::size_t>(id)]);
    }
    for (int id : pair.low_ids) {
      pair.low_activations.push_back(rec.activations[static_cast<std::size_t>(id)]);
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace streamforge::cnn
