#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cxr/dataset.hpp"
#include "cxr/image.hpp"

namespace cxr {

struct AugmentParams {
  double rotate_deg_max = 0.0;
  double zoom_range = 0.0;  // zoom factor drawn from [1 - range, 1 + range]
  double shear_deg_max = 0.0;
  double hflip_prob = 0.0;
  double noise_sigma = 0.0;
};

// Affine resample about the image centre: the output-to-source mapping
// undoes rotation, then horizontal shear, then zoom. Bilinear sampling,
// out-of-bounds reads 0.
ImageBuffer affine_resample(const ImageBuffer& img, double rotate_deg, double zoom,
                            double shear_deg);

// Seeded random augmentation: affine_resample with drawn parameters,
// optional horizontal flip, then per-pixel Gaussian noise, clamped to [0,1].
// Draw order is rotation, zoom, shear, flip, noise; the four transform
// parameters are always drawn (even for zero ranges) so streams stay
// aligned across settings, while noise draws happen only when
// noise_sigma > 0. Deterministic given seed.
ImageBuffer augment(const ImageBuffer& img, const AugmentParams& params, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 8;
  int patience = 3;
  std::uint64_t seed = 0;
  int input_side = 28;
  AugmentParams augment;
  ClassWeights weights;  // empty -> uniform 1.0 per class
};

// The published fine-tuning recipe, kept as a preset: 1e-6 learning rate,
// 30 epochs, batch 8, patience 3. That rate targets a pretrained backbone;
// the from-scratch reference model trains far too slowly with it, so the
// default config above uses 1e-3.
TrainConfig published_preset();

struct ModelParams {
  Eigen::MatrixXd weights;  // classes x input dims
  Eigen::VectorXd bias;     // classes
  std::vector<std::string> class_names;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  int stopped_epoch = 0;  // epochs actually run, 1-based
  int best_epoch = 0;     // epoch whose parameters were returned
};

// max-subtracted, so large logits cannot overflow
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// loss = -w(label) * log(max(p_label, 1e-12)); gradient is with respect to
// the logits that produced probs: w(label) * (p - onehot(label)).
struct CeResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
};
CeResult weighted_ce(const Eigen::VectorXd& probs, int label, const std::vector<double>& weights);

struct AdamState {
  Eigen::VectorXd m, v;
  // zero-initialised to the parameter shape on first use
};
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               double learning_rate, long t, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Early-stopping rule on a validation-loss sequence: strict improvements
// reset the counter; `patience` consecutive non-improving epochs stop the
// run. Returns the 1-based stopping epoch and the best epoch.
struct EarlyStopDecision {
  int stopped_epoch = 0;
  int best_epoch = 0;
};
EarlyStopDecision early_stop_scan(const std::vector<double>& val_losses, int patience);

// Images with class indices; the bridge between split plans and training.
struct LabeledImages {
  std::vector<ImageBuffer> images;  // aligned with the subset records
  std::vector<int> labels;          // class index per image
  std::vector<std::string> class_names;
};

struct PartitionIndices {
  std::vector<int> train, val, test;
  std::vector<std::string> classes;  // sorted label order, defines class indices
};
PartitionIndices flatten_split(const SplitPlan& plan);

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Multinomial logistic regression trained with Adam on class-weighted
// cross entropy. Each epoch shuffles the training indices (seeded), augments
// every sample with its own per-(epoch, index) seed, downsamples to
// input_side and standardises channels. Validation is never augmented.
// Stops early per early_stop_scan and returns the best-epoch parameters.
TrainResult train(const LabeledImages& data, const std::vector<int>& train_idx,
                  const std::vector<int>& val_idx, const TrainConfig& config);

// softmax(W x + b); prediction is the argmax, ties to the lowest index.
Eigen::VectorXd predict(const ModelParams& params, const ModelInput& input);
int argmax_class(const Eigen::VectorXd& probs);

// resize to side, standardise: the shared image -> model-input path
ModelInput prepare_input(const ImageBuffer& img, int side);

std::string model_to_json(const ModelParams& params);
ModelParams model_from_json(const std::string& text);
std::string history_to_json(const TrainHistory& history);

}  // namespace cxr
