#include "cxr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cxr/rng.hpp"

namespace cxr {

namespace {

constexpr double kPi = 3.14159265358979323846;

float sample_bilinear_zero(const ImageBuffer& img, double sx, double sy) {
  const int w = static_cast<int>(img.cols()), h = static_cast<int>(img.rows());
  if (sx <= -1.0 || sy <= -1.0 || sx >= w || sy >= h) return 0.0f;
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  const auto at = [&](int y, int x) -> double {
    if (x < 0 || x >= w || y < 0 || y >= h) return 0.0;  // outside reads 0
    return img(y, x);
  };
  const double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1);
  const double bot = (1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1);
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

// validation loss/accuracy over a partition, no augmentation
std::pair<double, double> evaluate_partition(const ModelParams& params, const LabeledImages& data,
                                             const std::vector<int>& idx,
                                             const std::vector<double>& weights, int side) {
  double loss = 0.0;
  long correct = 0;
  for (int i : idx) {
    const ModelInput input = prepare_input(data.images[i], side);
    const Eigen::VectorXd probs = predict(params, input);
    loss += weighted_ce(probs, data.labels[i], weights).loss;
    if (argmax_class(probs) == data.labels[i]) ++correct;
  }
  const double n = static_cast<double>(idx.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace

ImageBuffer affine_resample(const ImageBuffer& img, double rotate_deg, double zoom,
                            double shear_deg) {
  if (zoom <= 0) throw std::invalid_argument("affine_resample: zoom must be positive");
  const int w = width(img), h = height(img);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double theta = rotate_deg * kPi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ts = std::tan(shear_deg * kPi / 180.0);

  ImageBuffer out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx, dy = y - cy;
      // R(-theta)
      double ux = ct * dx + st * dy;
      double uy = -st * dx + ct * dy;
      // Shear(-s), horizontal
      ux -= ts * uy;
      // Zoom^-1
      ux /= zoom;
      uy /= zoom;
      out(y, x) = sample_bilinear_zero(img, cx + ux, cy + uy);
    }
  return out;
}

ImageBuffer augment(const ImageBuffer& img, const AugmentParams& params, std::uint64_t seed) {
  if (params.rotate_deg_max < 0 || params.zoom_range < 0 || params.shear_deg_max < 0 ||
      params.noise_sigma < 0)
    throw std::invalid_argument("augment: ranges must be non-negative");
  if (params.hflip_prob < 0 || params.hflip_prob > 1)
    throw std::invalid_argument("augment: hflip_prob must be in [0,1]");

  Rng rng(seed);
  const double rotate = rng.uniform(-params.rotate_deg_max, params.rotate_deg_max);
  const double zoom = rng.uniform(1.0 - params.zoom_range, 1.0 + params.zoom_range);
  const double shear = rng.uniform(-params.shear_deg_max, params.shear_deg_max);
  const bool flip = rng.bernoulli(params.hflip_prob);

  const int w = width(img), h = height(img);
  ImageBuffer out = affine_resample(img, rotate, zoom, shear);

  if (flip) {
    ImageBuffer flipped(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) flipped(y, x) = out(y, w - 1 - x);
    out.swap(flipped);
  }

  if (params.noise_sigma > 0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out(y, x) = static_cast<float>(out(y, x) + params.noise_sigma * rng.gaussian());
  }
  return out.cwiseMax(0.0f).cwiseMin(1.0f);
}

TrainConfig published_preset() {
  TrainConfig c;
  c.learning_rate = 1e-6;
  c.epochs = 30;
  c.batch_size = 8;
  c.patience = 3;
  return c;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty logits");
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

CeResult weighted_ce(const Eigen::VectorXd& probs, int label, const std::vector<double>& weights) {
  if (label < 0 || label >= probs.size()) throw std::invalid_argument("weighted_ce: bad label");
  if (static_cast<Eigen::Index>(weights.size()) != probs.size())
    throw std::invalid_argument("weighted_ce: weight count does not match classes");
  const double w = weights[label];
  CeResult r;
  r.loss = -w * std::log(std::max(probs(label), 1e-12));
  r.grad = w * probs;
  r.grad(label) -= w;
  return r;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               double learning_rate, long t, double beta1, double beta2, double eps) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: shape mismatch");
  if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
  if (state.m.size() == 0) state.m = Eigen::VectorXd::Zero(params.size());
  if (state.v.size() == 0) state.v = Eigen::VectorXd::Zero(params.size());
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("adam_step: state shape mismatch");

  state.m = beta1 * state.m + (1.0 - beta1) * grads;
  state.v = beta2 * state.v + (1.0 - beta2) * grads.cwiseProduct(grads);
  const double mc = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double vc = 1.0 - std::pow(beta2, static_cast<double>(t));
  params -= learning_rate * (state.m / mc).cwiseQuotient(((state.v / vc).cwiseSqrt().array() + eps).matrix());
}

EarlyStopDecision early_stop_scan(const std::vector<double>& val_losses, int patience) {
  if (patience < 1) throw std::invalid_argument("early_stop_scan: patience must be >= 1");
  EarlyStopDecision d;
  double best = std::numeric_limits<double>::infinity();
  int streak = 0;
  for (size_t e = 0; e < val_losses.size(); ++e) {
    d.stopped_epoch = static_cast<int>(e) + 1;
    if (val_losses[e] < best) {
      best = val_losses[e];
      d.best_epoch = d.stopped_epoch;
      streak = 0;
    } else if (++streak >= patience) {
      break;
    }
  }
  return d;
}

PartitionIndices flatten_split(const SplitPlan& plan) {
  PartitionIndices out;
  for (const auto& kv : plan.train) out.classes.push_back(kv.first);
  for (const auto* part : {&plan.train, &plan.val, &plan.test}) {
    auto& dst = part == &plan.train ? out.train : part == &plan.val ? out.val : out.test;
    for (const auto& kv : *part) dst.insert(dst.end(), kv.second.begin(), kv.second.end());
  }
  return out;
}

ModelInput prepare_input(const ImageBuffer& img, int side) {
  if (width(img) == side && height(img) == side) return to_model_input(img);
  return to_model_input(resize_bilinear(img, side, side));
}

TrainResult train(const LabeledImages& data, const std::vector<int>& train_idx,
                  const std::vector<int>& val_idx, const TrainConfig& config) {
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train: train and validation partitions must be non-empty");
  if (config.learning_rate <= 0 || config.epochs < 0 || config.batch_size < 1 || config.patience < 1)
    throw std::invalid_argument("train: bad config");
  const int C = static_cast<int>(data.class_names.size());
  if (C < 2) throw std::invalid_argument("train: need at least 2 classes");
  for (int i : train_idx)
    if (data.labels[i] < 0 || data.labels[i] >= C) throw std::invalid_argument("train: label out of range");

  std::vector<double> weights =
      config.weights.w.empty() ? std::vector<double>(C, 1.0) : config.weights.w;
  if (static_cast<int>(weights.size()) != C)
    throw std::invalid_argument("train: class weight count does not match classes");

  const int D = 3 * config.input_side * config.input_side;
  TrainResult result;
  result.params.class_names = data.class_names;
  result.params.weights.resize(C, D);
  result.params.bias = Eigen::VectorXd::Zero(C);
  {
    Rng init(mix_seed(config.seed, 0));
    for (int c = 0; c < C; ++c)
      for (int d = 0; d < D; ++d) result.params.weights(c, d) = init.uniform(-0.01, 0.01);
  }

  if (config.epochs == 0) return result;

  // flat parameter vector [W row-major | b] so one Adam state drives both
  Eigen::VectorXd theta(static_cast<Eigen::Index>(C) * D + C);
  for (int c = 0; c < C; ++c)
    theta.segment(static_cast<Eigen::Index>(c) * D, D) = result.params.weights.row(c).transpose();
  theta.tail(C) = result.params.bias;
  const auto unpack = [&](const Eigen::VectorXd& flat, ModelParams& p) {
    for (int c = 0; c < C; ++c)
      p.weights.row(c) = flat.segment(static_cast<Eigen::Index>(c) * D, D).transpose();
    p.bias = flat.tail(C);
  };

  AdamState adam;
  long step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta = theta;
  int streak = 0;

  std::vector<int> order = train_idx;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, 1, static_cast<std::uint64_t>(epoch)));
    order = train_idx;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    long seen = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t stop = std::min(order.size(), start + config.batch_size);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      double batch_loss = 0.0;
      for (size_t bi = start; bi < stop; ++bi) {
        const int i = order[bi];
        const ImageBuffer aug = augment(
            data.images[i], config.augment,
            mix_seed(config.seed, 2, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)));
        const ModelInput input = prepare_input(aug, config.input_side);
        const Eigen::VectorXd x = input.values.cast<double>();

        Eigen::VectorXd logits(C);
        for (int c = 0; c < C; ++c)
          logits(c) = theta.segment(static_cast<Eigen::Index>(c) * D, D).dot(x) + theta(static_cast<Eigen::Index>(C) * D + c);
        const Eigen::VectorXd probs = softmax(logits);
        const CeResult ce = weighted_ce(probs, data.labels[i], weights);
        batch_loss += ce.loss;
        for (int c = 0; c < C; ++c) {
          grad.segment(static_cast<Eigen::Index>(c) * D, D) += ce.grad(c) * x;
          grad(static_cast<Eigen::Index>(C) * D + c) += ce.grad(c);
        }
      }
      const double bn = static_cast<double>(stop - start);
      grad /= bn;
      epoch_loss += batch_loss;
      seen += static_cast<long>(stop - start);
      adam_step(theta, grad, adam, config.learning_rate, ++step);
    }

    unpack(theta, result.params);
    const auto [vloss, vacc] = evaluate_partition(result.params, data, val_idx, weights, config.input_side);
    result.history.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    result.history.val_loss.push_back(vloss);
    result.history.val_accuracy.push_back(vacc);
    result.history.stopped_epoch = epoch;

    if (vloss < best_val) {
      best_val = vloss;
      best_theta = theta;
      result.history.best_epoch = epoch;
      streak = 0;
    } else if (++streak >= config.patience) {
      break;
    }
  }

  unpack(best_theta, result.params);
  return result;
}

Eigen::VectorXd predict(const ModelParams& params, const ModelInput& input) {
  if (params.weights.cols() != input.values.size())
    throw std::invalid_argument("predict: input dimension does not match model");
  const Eigen::VectorXd x = input.values.cast<double>();
  return softmax(params.weights * x + params.bias);
}

int argmax_class(const Eigen::VectorXd& probs) {
  int best = 0;
  for (int c = 1; c < probs.size(); ++c)
    if (probs(c) > probs(best)) best = c;
  return best;
}

std::string model_to_json(const ModelParams& params) {
  nlohmann::ordered_json j;
  j["classes"] = params.weights.rows();
  j["dims"] = params.weights.cols();
  j["class_names"] = params.class_names;
  std::vector<double> w;
  w.reserve(params.weights.size());
  for (Eigen::Index r = 0; r < params.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < params.weights.cols(); ++c) w.push_back(params.weights(r, c));
  j["weights"] = std::move(w);
  j["bias"] = std::vector<double>(params.bias.data(), params.bias.data() + params.bias.size());
  return j.dump();
}

ModelParams model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelParams p;
  const Eigen::Index C = j.at("classes").get<Eigen::Index>();
  const Eigen::Index D = j.at("dims").get<Eigen::Index>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != C * D || static_cast<Eigen::Index>(b.size()) != C)
    throw std::invalid_argument("model_from_json: shape header does not match data");
  p.weights.resize(C, D);
  for (Eigen::Index r = 0; r < C; ++r)
    for (Eigen::Index c = 0; c < D; ++c) p.weights(r, c) = w[static_cast<size_t>(r) * D + c];
  p.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), C);
  if (j.contains("class_names")) p.class_names = j.at("class_names").get<std::vector<std::string>>();
  return p;
}

std::string history_to_json(const TrainHistory& history) {
  nlohmann::ordered_json j;
  j["train_loss"] = history.train_loss;
  j["val_loss"] = history.val_loss;
  j["val_accuracy"] = history.val_accuracy;
  j["stopped_epoch"] = history.stopped_epoch;
  j["best_epoch"] = history.best_epoch;
  return j.dump();
}

}  // namespace cxr
