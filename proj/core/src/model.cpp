#include "cofedrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cofedrec {

namespace {

constexpr double kProbClamp = 1e-12;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

// Shared SupContrast kernel. Computes the loss and, when grad != nullptr,
// accumulates scale * dLoss/dV. The gram buffer is reused in place for the
// exponential weights and then the softmax coefficient matrix, so the
// whole evaluation allocates nothing once the workspace is warm.
SclValue scl_core(const Mat& V, const ItemMembership& membership, double tau,
                  const std::vector<int>* subset, double scale, Mat* grad,
                  SclWorkspace& ws) {
  if (tau <= 0.0) throw std::invalid_argument("scl_loss: tau must be positive");
  if (static_cast<Eigen::Index>(membership.labels.size()) != V.rows())
    throw std::invalid_argument("scl_loss: membership length != item count");

  const bool restricted = subset != nullptr;
  const Eigen::Index n = restricted ? static_cast<Eigen::Index>(subset->size()) : V.rows();

  SclValue out;
  if (n < 2) {
    out.skipped_items = n;
    return out;
  }

  const Mat* active = &V;
  if (restricted) {
    ws.sub.resize(n, V.cols());
    for (Eigen::Index p = 0; p < n; ++p)
      ws.sub.row(p) = V.row((*subset)[static_cast<std::size_t>(p)]);
    active = &ws.sub;
  }

  ws.scaled.resize(n, V.cols());
  ws.scaled.noalias() = *active * (1.0 / tau);
  ws.gram.resize(n, n);
  ws.gram.noalias() = ws.scaled * active->transpose();

  // Positions grouped by cluster over the active set.
  ws.position_cluster.assign(static_cast<std::size_t>(n), 0);
  ws.cluster_positions.resize(static_cast<std::size_t>(membership.num_clusters));
  for (auto& v : ws.cluster_positions) v.clear();
  for (Eigen::Index p = 0; p < n; ++p) {
    const int item = restricted ? (*subset)[static_cast<std::size_t>(p)] : static_cast<int>(p);
    const int c = membership.labels[static_cast<std::size_t>(item)];
    ws.position_cluster[static_cast<std::size_t>(p)] = c;
    ws.cluster_positions[static_cast<std::size_t>(c)].push_back(static_cast<int>(p));
  }

  // -inf on the diagonal drops self-terms from the row max, the
  // exponential weights and the row sums all at once.
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < n; ++p) ws.gram(p, p) = neg_inf;

  for (Eigen::Index p = 0; p < n; ++p) {
    auto row = ws.gram.row(p);
    const double row_max = row.maxCoeff();
    row = (row.array() - row_max).exp();  // diagonal becomes exp(-inf) = 0
    const double denom = row.sum();

    const auto& peers =
        ws.cluster_positions[static_cast<std::size_t>(ws.position_cluster[static_cast<std::size_t>(p)])];
    const std::size_t z_size = peers.size() - 1;
    if (z_size < 1) {
      ++out.skipped_items;
      if (grad) row.setZero();
      continue;
    }

    double num = 0.0;
    for (int q : peers)
      if (q != static_cast<int>(p)) num += ws.gram(p, q);

    out.loss += std::log(denom) - std::log(num) + std::log(static_cast<double>(z_size));

    if (grad) {
      // W[p][a] = q_pa - 1[a in Z(p)] * p_pa, written over the weights row.
      row *= 1.0 / denom;
      const double fixup = 1.0 - denom / num;
      for (int q : peers)
        if (q != static_cast<int>(p)) ws.gram(p, q) *= fixup;
    }
  }

  if (grad) {
    // dLoss/dV over the active rows is (W + W^T) V / tau.
    ws.prod.resize(n, V.cols());
    ws.prod.noalias() = ws.gram * (*active);
    ws.prod.noalias() += ws.gram.transpose() * (*active);
    const double c0 = scale / tau;
    if (restricted) {
      for (Eigen::Index p = 0; p < n; ++p)
        grad->row((*subset)[static_cast<std::size_t>(p)]) += c0 * ws.prod.row(p);
    } else {
      *grad += c0 * ws.prod;
    }
  }
  return out;
}

SclValue item_similarity_core(const Mat& V, const ItemMembership& membership,
                              const std::vector<int>& train_items, double scale,
                              Mat* grad) {
  if (static_cast<Eigen::Index>(membership.labels.size()) != V.rows())
    throw std::invalid_argument("item_similarity_loss: membership length != item count");

  SclValue out;
  if (train_items.empty()) return out;

  std::vector<std::vector<int>> cluster_items(
      static_cast<std::size_t>(membership.num_clusters));
  for (std::size_t i = 0; i < membership.labels.size(); ++i)
    cluster_items[static_cast<std::size_t>(membership.labels[i])].push_back(
        static_cast<int>(i));

  const double inv_d = 1.0 / static_cast<double>(train_items.size());
  double acc = 0.0;
  for (int i : train_items) {
    if (i < 0 || i >= V.rows())
      throw std::out_of_range("item_similarity_loss: train item out of range");
    const auto& peers = cluster_items[static_cast<std::size_t>(
        membership.labels[static_cast<std::size_t>(i)])];
    const std::size_t z_size = peers.size() - 1;
    if (z_size < 1) {
      ++out.skipped_items;
      continue;
    }
    const double norm_i = V.row(i).norm();
    const double inv_z = 1.0 / static_cast<double>(z_size);
    for (int z : peers) {
      if (z == i) continue;
      const double norm_z = V.row(z).norm();
      const double denom = norm_i * norm_z;
      if (denom <= 0.0) continue;  // zero-norm rows contribute cosine 0
      const double cos = V.row(i).dot(V.row(z)) / denom;
      acc += inv_z * cos;
      if (grad) {
        const double coeff = -scale * inv_d * inv_z;
        grad->row(i) += coeff * (V.row(z) / denom - cos / (norm_i * norm_i) * V.row(i));
        grad->row(z) += coeff * (V.row(i) / denom - cos / (norm_z * norm_z) * V.row(z));
      }
    }
  }
  out.loss = -inv_d * acc;
  return out;
}

}  // namespace

double predict(const ScoreFunction& fn, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  if (!row.allFinite() || !fn.weights.allFinite() || !std::isfinite(fn.bias))
    throw std::invalid_argument("predict: non-finite input");
  // Clamped so the result stays strictly inside (0, 1) even where the
  // sigmoid saturates in double precision.
  return clamp_prob(sigmoid(row.dot(fn.weights.transpose()) + fn.bias));
}

double bce_loss(const std::vector<double>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("bce_loss: prediction/label length mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    const double p = clamp_prob(predictions[j]);
    loss -= labels[j] ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

SclValue scl_loss(const Mat& V, const ItemMembership& membership, double tau,
                  const std::vector<int>* subset) {
  SclWorkspace ws;
  return scl_core(V, membership, tau, subset, 0.0, nullptr, ws);
}

SclValue scl_loss_grad(const Mat& V, const ItemMembership& membership, double tau,
                       const std::vector<int>* subset, double scale, Mat& grad,
                       SclWorkspace& ws) {
  return scl_core(V, membership, tau, subset, scale, &grad, ws);
}

SclValue item_similarity_loss(const Mat& V, const ItemMembership& membership,
                              const std::vector<int>& train_items) {
  return item_similarity_core(V, membership, train_items, 0.0, nullptr);
}

SclValue item_similarity_loss_grad(const Mat& V, const ItemMembership& membership,
                                   const std::vector<int>& train_items, double scale,
                                   Mat& grad) {
  return item_similarity_core(V, membership, train_items, scale, &grad);
}

namespace {

// Positive-labeled items of a batch list, sorted unique.
std::vector<int> positive_items(const std::vector<LocalBatch>& batches) {
  std::vector<int> out;
  for (const auto& b : batches)
    for (std::size_t j = 0; j < b.items.size(); ++j)
      if (b.labels[j] == 1) out.push_back(b.items[j]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

double batch_loss(const Mat& V, const ScoreFunction& theta, const LocalBatch& batch,
                  const ItemMembership* membership, const LossConfig& cfg,
                  const std::vector<int>* scl_subset, SclValue* variant_out) {
  std::vector<double> preds(batch.items.size());
  for (std::size_t j = 0; j < batch.items.size(); ++j)
    preds[j] = predict(theta, V.row(batch.items[j]));
  double loss = bce_loss(preds, batch.labels);

  if (membership && cfg.variant != SclVariant::none && cfg.lambda != 0.0) {
    SclValue v;
    if (cfg.variant == SclVariant::supcontrast) {
      v = scl_loss(V, *membership, cfg.tau, scl_subset);
    } else {
      v = item_similarity_loss(V, *membership, positive_items({batch}));
    }
    loss += cfg.lambda * v.loss;
    if (variant_out) *variant_out = v;
  }
  return loss;
}

void batch_gradients(const Mat& V, const ScoreFunction& theta, const LocalBatch& batch,
                     const ItemMembership* membership, const LossConfig& cfg,
                     const std::vector<int>* scl_subset, Vec& grad_w, double& grad_b,
                     Mat& grad_V, SclWorkspace& ws) {
  grad_w = Vec::Zero(theta.weights.size());
  grad_b = 0.0;
  grad_V = Mat::Zero(V.rows(), V.cols());

  for (std::size_t j = 0; j < batch.items.size(); ++j) {
    const int item = batch.items[j];
    const double p = sigmoid(V.row(item).dot(theta.weights.transpose()) + theta.bias);
    const double g = p - static_cast<double>(batch.labels[j]);
    grad_w += g * V.row(item).transpose();
    grad_b += g;
    grad_V.row(item) += g * theta.weights.transpose();
  }

  if (membership && cfg.variant != SclVariant::none && cfg.lambda != 0.0) {
    if (cfg.variant == SclVariant::supcontrast) {
      scl_loss_grad(V, *membership, cfg.tau, scl_subset, cfg.lambda, grad_V, ws);
    } else {
      item_similarity_loss_grad(V, *membership, positive_items({batch}), cfg.lambda,
                                grad_V);
    }
  }
}

std::vector<LocalBatch> make_batches(const std::vector<int>& items,
                                     const std::vector<int>& labels, int batch_size,
                                     Rng& rng) {
  if (items.size() != labels.size())
    throw std::invalid_argument("make_batches: item/label length mismatch");
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");

  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<LocalBatch> out;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    LocalBatch b;
    b.items.reserve(stop - start);
    b.labels.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      b.items.push_back(items[order[i]]);
      b.labels.push_back(labels[order[i]]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

LocalTrainResult local_train(Mat& V, ScoreFunction& theta,
                             const std::vector<LocalBatch>& batches,
                             const ItemMembership* membership, const LossConfig& cfg,
                             Rng& rng, SclWorkspace& ws) {
  LocalTrainResult res;
  if (batches.empty()) return res;
  // A zero rate is allowed (it makes the step a no-op); the simulator
  // validates that real runs use a positive one.
  if (cfg.learning_rate < 0.0)
    throw std::invalid_argument("local_train: learning rate must be nonnegative");

  const Mat V_in = V;
  const ScoreFunction theta_in = theta;
  const double lr = cfg.learning_rate;

  const bool use_variant =
      membership != nullptr && cfg.variant != SclVariant::none && cfg.lambda != 0.0;
  const bool subsample = use_variant && cfg.variant == SclVariant::supcontrast &&
                         V.rows() > cfg.scl_max_items;

  std::vector<int> item_s_items;
  if (use_variant && cfg.variant == SclVariant::item_s)
    item_s_items = positive_items(batches);

  std::vector<int> subset;
  std::vector<double> coeff;
  ws.grad_full.resize(V.rows(), V.cols());

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (const auto& batch : batches) {
      // Score-function step, embeddings held fixed.
      Vec grad_w = Vec::Zero(theta.weights.size());
      double grad_b = 0.0;
      for (std::size_t j = 0; j < batch.items.size(); ++j) {
        const int item = batch.items[j];
        const double p = sigmoid(V.row(item).dot(theta.weights.transpose()) + theta.bias);
        const double g = p - static_cast<double>(batch.labels[j]);
        grad_w += g * V.row(item).transpose();
        grad_b += g;
      }
      theta.weights -= lr * grad_w;
      theta.bias -= lr * grad_b;

      // Embedding step with the tuned score function held fixed.
      coeff.resize(batch.items.size());
      double bce = 0.0;
      for (std::size_t j = 0; j < batch.items.size(); ++j) {
        const int item = batch.items[j];
        const double p = sigmoid(V.row(item).dot(theta.weights.transpose()) + theta.bias);
        coeff[j] = p - static_cast<double>(batch.labels[j]);
        const double pc = clamp_prob(p);
        bce -= batch.labels[j] ? std::log(pc) : std::log(1.0 - pc);
      }
      res.bce_sum += bce;

      if (use_variant) {
        ws.grad_full.setZero();
        SclValue v;
        if (cfg.variant == SclVariant::supcontrast) {
          const std::vector<int>* sub = nullptr;
          if (subsample) {
            subset.resize(static_cast<std::size_t>(V.rows()));
            for (std::size_t i = 0; i < subset.size(); ++i) subset[i] = static_cast<int>(i);
            rng.partial_shuffle(subset, static_cast<std::size_t>(cfg.scl_max_items));
            subset.resize(static_cast<std::size_t>(cfg.scl_max_items));
            std::sort(subset.begin(), subset.end());
            sub = &subset;
          }
          v = scl_loss_grad(V, *membership, cfg.tau, sub, cfg.lambda, ws.grad_full, ws);
        } else {
          v = item_similarity_loss_grad(V, *membership, item_s_items, cfg.lambda,
                                        ws.grad_full);
        }
        res.variant_sum += v.loss;
        res.scl_skipped += v.skipped_items;
        V -= lr * ws.grad_full;
      }

      for (std::size_t j = 0; j < batch.items.size(); ++j)
        V.row(batch.items[j]) -= (lr * coeff[j]) * theta.weights.transpose();

      ++res.steps;
      if (!theta.weights.allFinite() || !std::isfinite(theta.bias) || !V.allFinite()) {
        V = V_in;
        theta = theta_in;
        res.diverged = true;
        return res;
      }
    }
  }
  return res;
}

}  // namespace cofedrec
