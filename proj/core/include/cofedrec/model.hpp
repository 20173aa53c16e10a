#pragma once

#include <optional>
#include <vector>

#include "cofedrec/clustering.hpp"
#include "cofedrec/matrix.hpp"
#include "cofedrec/rng.hpp"

namespace cofedrec {

// Client-private score function: predicted rating = sigmoid(w . row + b).
// Never leaves the client.
struct ScoreFunction {
  Vec weights;
  double bias = 0.0;
};

enum class SclVariant { supcontrast, item_s, none };

struct LossConfig {
  double lambda = 0.005;       // weight of the contrastive / similarity term
  double tau = 0.1;            // SupContrast temperature
  SclVariant variant = SclVariant::supcontrast;
  double learning_rate = 0.1;
  int local_epochs = 1;
  int batch_size = 256;
  int scl_max_items = 4096;    // above this, per-batch uniform item subsample
};

struct LocalBatch {
  std::vector<int> items;
  std::vector<int> labels;  // 0/1
};

double predict(const ScoreFunction& fn, const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Summed (not averaged) binary cross-entropy; probabilities clamped at 1e-12.
double bce_loss(const std::vector<double>& predictions, const std::vector<int>& labels);

struct SclValue {
  double loss = 0.0;
  long skipped_items = 0;  // items with no same-cluster partner
};

// Scratch buffers reused across training evaluations; one per worker.
struct SclWorkspace {
  Mat scaled;     // V / tau over the active item set
  Mat gram;       // pairwise dots / tau, reused for exp weights in the gradient
  Mat prod;       // gradient gemm output
  Mat sub;        // gathered rows when a subset is active
  Mat grad_full;  // |I| x d gradient accumulator used by local_train
  std::vector<std::vector<int>> cluster_positions;
  std::vector<int> position_cluster;
};

// SupContrast over the item set (or `subset` when given): for each item i
// with a nonempty same-cluster set Z(i),
//   loss_i = log(sum_{a != i} exp(V_i.V_a/tau)) - log(sum_{z in Z(i)} exp(V_i.V_z/tau)) + log|Z(i)|,
// summed over i. Dot products are raw (no row normalization); per-row
// max-shift keeps the exponentials stable.
SclValue scl_loss(const Mat& V, const ItemMembership& membership, double tau,
                  const std::vector<int>* subset = nullptr);

// Same term, also accumulating scale * dLoss/dV into grad (full-height
// |I| x d). Returns the loss value.
SclValue scl_loss_grad(const Mat& V, const ItemMembership& membership, double tau,
                       const std::vector<int>* subset, double scale, Mat& grad,
                       SclWorkspace& ws);

// Negative mean cosine alignment between each training item and its
// same-cluster peers (peers over the full item set). Items with no peer
// are skipped; zero-norm rows contribute cosine 0.
SclValue item_similarity_loss(const Mat& V, const ItemMembership& membership,
                              const std::vector<int>& train_items);
SclValue item_similarity_loss_grad(const Mat& V, const ItemMembership& membership,
                                   const std::vector<int>& train_items, double scale,
                                   Mat& grad);

// Per-step objective that local training descends on one batch:
// summed BCE plus lambda * variant term. Exposed so tests can
// finite-difference the exact quantity the analytic gradients implement.
double batch_loss(const Mat& V, const ScoreFunction& theta, const LocalBatch& batch,
                  const ItemMembership* membership, const LossConfig& cfg,
                  const std::vector<int>* scl_subset = nullptr,
                  SclValue* variant_out = nullptr);

// Analytic gradients of batch_loss at (theta, V).
void batch_gradients(const Mat& V, const ScoreFunction& theta, const LocalBatch& batch,
                     const ItemMembership* membership, const LossConfig& cfg,
                     const std::vector<int>* scl_subset, Vec& grad_w, double& grad_b,
                     Mat& grad_V, SclWorkspace& ws);

// Shuffle the tuples once and cut them into batches of cfg.batch_size.
std::vector<LocalBatch> make_batches(const std::vector<int>& items,
                                     const std::vector<int>& labels, int batch_size,
                                     Rng& rng);

struct LocalTrainResult {
  bool diverged = false;
  int steps = 0;
  double bce_sum = 0.0;
  double variant_sum = 0.0;
  long scl_skipped = 0;
};

// One client's local round: for every epoch and batch, an SGD step on the
// score function (embeddings fixed) followed by an SGD step on the
// embeddings (score function fixed). Non-finite parameters abort the round
// and restore the inputs. `rng` feeds the per-batch item subsample when
// the catalog exceeds cfg.scl_max_items.
LocalTrainResult local_train(Mat& V, ScoreFunction& theta,
                             const std::vector<LocalBatch>& batches,
                             const ItemMembership* membership, const LossConfig& cfg,
                             Rng& rng, SclWorkspace& ws);

}  // namespace cofedrec
