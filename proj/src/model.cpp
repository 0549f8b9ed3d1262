#include "gsda/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "gsda/errors.hpp"
#include "random.hpp"

namespace gsda {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'D', 'A', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

DenseLayer make_layer(int in, int out, std::mt19937_64& rng) {
  DenseLayer layer;
  layer.weight.resize(in, out);
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  // Fill column-major explicitly so the draw order is part of the format.
  for (int c = 0; c < out; ++c) {
    for (int r = 0; r < in; ++r) layer.weight(r, c) = dist(rng);
  }
  layer.bias = Eigen::RowVectorXd::Zero(out);
  return layer;
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}
bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}
bool get_u64(std::istream& in, std::uint64_t& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

}  // namespace

void ModelConfig::validate() const {
  if (point_widths.empty() || head_widths.empty()) {
    throw Error(ErrorCode::kConfig, "model needs at least one point layer and one head layer");
  }
  for (int w : point_widths) {
    if (w < 1) throw Error(ErrorCode::kConfig, "point layer width must be >= 1");
  }
  for (int w : head_widths) {
    if (w < 1) throw Error(ErrorCode::kConfig, "head layer width must be >= 1");
  }
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || !(learning_rate > 0.0) || weight_decay < 0.0) {
    throw Error(ErrorCode::kConfig, "invalid training configuration");
  }
}

struct Classifier::Pass {
  // h_0 = input, h_l = relu(z_l). ReLU is active exactly where h_l > 0, so
  // pre-activations are not kept.
  std::vector<Eigen::MatrixXd> point_post;
  std::vector<int> argmax;                  // row feeding each pooled feature
  std::vector<Eigen::RowVectorXd> head_pre;
  std::vector<Eigen::RowVectorXd> head_post;  // a_0 = pooled features
  Eigen::VectorXd logits;
};

Classifier::Classifier(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  auto rng = detail::make_rng({config_.seed, 0x6d6f64656cULL});
  int in = 3;
  for (int w : config_.point_widths) {
    point_layers_.push_back(make_layer(in, w, rng));
    in = w;
  }
  for (int w : config_.head_widths) {
    head_layers_.push_back(make_layer(in, w, rng));
    in = w;
  }
}

void Classifier::run_forward(const Points& points, Pass& pass) const {
  const Eigen::Index n = points.rows();
  const std::size_t depth = point_layers_.size();
  // Buffers are reused across calls; resize is a no-op for equal shapes.
  pass.point_post.resize(depth + 1);
  pass.point_post[0] = points;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = point_layers_[l];
    Eigen::MatrixXd& h = pass.point_post[l + 1];
    h.resize(n, layer.weight.cols());
    h.noalias() = pass.point_post[l] * layer.weight;
    h.rowwise() += layer.bias;
    h = h.cwiseMax(0.0);
  }
  const Eigen::MatrixXd& top = pass.point_post.back();
  const Eigen::Index width = top.cols();
  Eigen::RowVectorXd pooled(width);
  pass.argmax.assign(static_cast<std::size_t>(width), 0);
  for (Eigen::Index j = 0; j < width; ++j) {
    const double* col = top.col(j).data();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (col[i] > col[best]) best = i;
    }
    pass.argmax[static_cast<std::size_t>(j)] = static_cast<int>(best);
    pooled[j] = col[best];
  }
  pass.head_pre.clear();
  pass.head_post.clear();
  pass.head_post.push_back(std::move(pooled));
  for (std::size_t k = 0; k < head_layers_.size(); ++k) {
    Eigen::RowVectorXd z = pass.head_post.back() * head_layers_[k].weight + head_layers_[k].bias;
    const bool last = k + 1 == head_layers_.size();
    pass.head_post.push_back(last ? z : Eigen::RowVectorXd(z.cwiseMax(0.0)));
    pass.head_pre.push_back(std::move(z));
  }
  pass.logits = pass.head_pre.back().transpose();
}

Classifier::Pass& Classifier::scratch_pass() {
  thread_local Pass pass;
  return pass;
}

double objective_loss(const Eigen::VectorXd& logits, const Objective& objective) {
  const double log_p = logits[objective.label] - log_sum_exp(logits);
  if (objective.kind == Objective::Kind::kTargeted) return -log_p;
  return std::max(log_p, std::log(kUntargetedProbFloor));
}

Prediction Classifier::forward(const Points& points) const {
  Pass& pass = scratch_pass();
  run_forward(points, pass);
  Prediction pred;
  pred.logits = pass.logits;
  const double lse = log_sum_exp(pass.logits);
  pred.probs = (pass.logits.array() - lse).exp().matrix();
  pred.label = argmax_lowest(pass.logits);
  return pred;
}

double Classifier::run_backward(const Pass& pass, const Objective& objective, Points* input_grad,
                                Eigen::VectorXd* param_grad) const {
  const Eigen::VectorXd& logits = pass.logits;
  if (objective.label < 0 || objective.label >= logits.size()) {
    throw Error(ErrorCode::kConfig, "objective label out of range");
  }
  const double lse = log_sum_exp(logits);
  const Eigen::VectorXd probs = (logits.array() - lse).exp().matrix();
  const double log_p = logits[objective.label] - lse;

  double loss = 0.0;
  Eigen::RowVectorXd dlogits = Eigen::RowVectorXd::Zero(logits.size());
  if (objective.kind == Objective::Kind::kTargeted) {
    loss = -log_p;
    dlogits = probs.transpose();
    dlogits[objective.label] -= 1.0;
  } else {
    const double floor = std::log(kUntargetedProbFloor);
    if (log_p > floor) {
      loss = log_p;
      dlogits = -probs.transpose();
      dlogits[objective.label] += 1.0;
    } else {
      loss = floor;
    }
  }

  // Offsets of each layer's weight and bias inside the flat parameter vector.
  std::vector<Eigen::Index> offsets;
  Eigen::Index offset = 0;
  for (const auto* group : {&point_layers_, &head_layers_}) {
    for (const auto& layer : *group) {
      offsets.push_back(offset);
      offset += layer.weight.size() + layer.bias.size();
    }
  }
  if (param_grad) param_grad->setZero(offset);
  auto write_layer_grad = [&](std::size_t layer_index, const Eigen::MatrixXd& dW,
                              const Eigen::RowVectorXd& db) {
    const Eigen::Index o = offsets[layer_index];
    param_grad->segment(o, dW.size()) = Eigen::Map<const Eigen::VectorXd>(dW.data(), dW.size());
    param_grad->segment(o + dW.size(), db.size()) = db.transpose();
  };

  Eigen::RowVectorXd da = dlogits;
  for (std::size_t k = head_layers_.size(); k-- > 0;) {
    Eigen::RowVectorXd dz = da;
    if (k + 1 != head_layers_.size()) {
      dz = (pass.head_pre[k].array() > 0.0).select(da, 0.0);
    }
    if (param_grad) {
      write_layer_grad(point_layers_.size() + k, pass.head_post[k].transpose() * dz, dz);
    }
    da = dz * head_layers_[k].weight.transpose();
  }

  // Only argmax rows receive gradient from the pool, so the per-point pass
  // runs on that compact row set, stored transposed (features x rows).
  std::vector<int> rows = pass.argmax;
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  auto compact = [&](int r) { return std::lower_bound(rows.begin(), rows.end(), r) - rows.begin(); };
  auto gather_t = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd t(m.cols(), n_rows);
    for (Eigen::Index c = 0; c < n_rows; ++c) t.col(c) = m.row(rows[static_cast<std::size_t>(c)]).transpose();
    return t;
  };

  // Top layer: one nonzero per pooled feature.
  const std::size_t top = point_layers_.size() - 1;
  const DenseLayer& top_layer = point_layers_[top];
  Eigen::MatrixXd dh_t = Eigen::MatrixXd::Zero(top_layer.weight.rows(), n_rows);
  Eigen::MatrixXd top_dw;
  Eigen::RowVectorXd top_db;
  Eigen::MatrixXd h_prev_t;
  if (param_grad) {
    top_dw = Eigen::MatrixXd::Zero(top_layer.weight.rows(), top_layer.weight.cols());
    top_db = Eigen::RowVectorXd::Zero(top_layer.weight.cols());
    h_prev_t = gather_t(pass.point_post[top]);
  }
  for (Eigen::Index j = 0; j < top_layer.weight.cols(); ++j) {
    const int r = pass.argmax[static_cast<std::size_t>(j)];
    if (!(pass.point_post[top + 1](r, j) > 0.0) || da[j] == 0.0) continue;
    const auto c = compact(r);
    dh_t.col(c) += da[j] * top_layer.weight.col(j);
    if (param_grad) {
      top_dw.col(j) += da[j] * h_prev_t.col(c);
      top_db[j] += da[j];
    }
  }
  if (param_grad) write_layer_grad(top, top_dw, top_db);

  for (std::size_t l = top; l-- > 0;) {
    const Eigen::MatrixXd z_t = gather_t(pass.point_post[l + 1]);
    const Eigen::MatrixXd dz_t = (z_t.array() > 0.0).select(dh_t, 0.0);
    if (param_grad) {
      const Eigen::MatrixXd h_t = gather_t(pass.point_post[l]);
      write_layer_grad(l, h_t * dz_t.transpose(), dz_t.rowwise().sum().transpose());
    }
    dh_t = point_layers_[l].weight * dz_t;
  }
  if (input_grad) {
    input_grad->setZero(pass.point_post.front().rows(), 3);
    for (Eigen::Index c = 0; c < n_rows; ++c) {
      input_grad->row(rows[static_cast<std::size_t>(c)]) = dh_t.col(c).transpose();
    }
  }
  return loss;
}

InputGradient Classifier::input_gradient(const Points& points, const Objective& objective) const {
  Pass& pass = scratch_pass();
  run_forward(points, pass);
  InputGradient out;
  out.loss = run_backward(pass, objective, &out.gradient, nullptr);
  out.prediction.logits = pass.logits;
  const double lse = log_sum_exp(pass.logits);
  out.prediction.probs = (pass.logits.array() - lse).exp().matrix();
  out.prediction.label = argmax_lowest(pass.logits);
  return out;
}

double Classifier::parameter_gradient(const Points& points, const Objective& objective,
                                      Eigen::VectorXd& grad_out) const {
  Pass& pass = scratch_pass();
  run_forward(points, pass);
  return run_backward(pass, objective, nullptr, &grad_out);
}

Eigen::Index Classifier::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto* group : {&point_layers_, &head_layers_}) {
    for (const auto& layer : *group) count += layer.weight.size() + layer.bias.size();
  }
  return count;
}

Eigen::VectorXd Classifier::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index o = 0;
  for (const auto* group : {&point_layers_, &head_layers_}) {
    for (const auto& layer : *group) {
      flat.segment(o, layer.weight.size()) =
          Eigen::Map<const Eigen::VectorXd>(layer.weight.data(), layer.weight.size());
      o += layer.weight.size();
      flat.segment(o, layer.bias.size()) = layer.bias.transpose();
      o += layer.bias.size();
    }
  }
  return flat;
}

void Classifier::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "parameter vector has wrong length");
  }
  Eigen::Index o = 0;
  for (auto* group : {&point_layers_, &head_layers_}) {
    for (auto& layer : *group) {
      Eigen::Map<Eigen::VectorXd>(layer.weight.data(), layer.weight.size()) =
          flat.segment(o, layer.weight.size());
      o += layer.weight.size();
      layer.bias = flat.segment(o, layer.bias.size()).transpose();
      o += layer.bias.size();
    }
  }
}

double accuracy(const Classifier& model, const std::vector<PointCloud>& clouds) {
  if (clouds.empty()) return 0.0;
  int correct = 0;
  for (const auto& c : clouds) {
    if (c.label && model.classify(c.points) == *c.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(clouds.size());
}

TrainHistory train(Classifier& model, const std::vector<PointCloud>& train_set,
                   const TrainConfig& config, const std::vector<PointCloud>* test_set) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::kConfig, "training set is empty");
  for (const auto& c : train_set) {
    if (!c.label || *c.label < 0 || *c.label >= model.num_classes()) {
      throw Error(ErrorCode::kConfig, "training cloud '" + c.name + "' has no valid label");
    }
  }

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd sample_grad;
  long step = 0;

  TrainHistory history;
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = detail::make_rng({config.seed, static_cast<std::uint64_t>(epoch), 0x7261696eULL});
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    int correct = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const auto& cloud = train_set[order[b]];
        Classifier::Pass& pass = Classifier::scratch_pass();
        model.run_forward(cloud.points, pass);
        if (argmax_lowest(pass.logits) == *cloud.label) ++correct;
        batch_loss += model.run_backward(pass, Objective::cross_entropy(*cloud.label), nullptr,
                                         &sample_grad);
        grad += sample_grad;
      }
      const double count = static_cast<double>(stop - start);
      grad /= count;
      batch_loss /= count;
      grad += config.weight_decay * params;

      ++step;
      m = kBeta1 * m + (1.0 - kBeta1) * grad;
      v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      params.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
      model.set_parameters(params);

      history.step_losses.push_back(batch_loss);
      loss_sum += batch_loss;
      ++batches;
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / batches;
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (test_set) stats.test_accuracy = accuracy(model, *test_set);
    history.epochs.push_back(stats);
  }
  return history;
}

void save_model(const Classifier& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  nlohmann::json meta;
  meta["point_widths"] = model.config().point_widths;
  meta["head_widths"] = model.config().head_widths;
  meta["seed"] = model.config().seed;
  const std::string text = meta.dump();
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const Eigen::VectorXd params = model.parameters();
  put_u64(out, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(params[i]));
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Classifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[sizeof(kMagic)] = {};
  std::uint32_t version = 0;
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 ||
      !get_u32(in, version) || version != kFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, path.string() + " is not a version " +
                                                 std::to_string(kFormatVersion) + " checkpoint");
  }
  std::uint32_t meta_len = 0;
  if (!get_u32(in, meta_len) || meta_len > (1u << 20)) {
    throw Error(ErrorCode::kModelLoad, path.string() + ": bad metadata length");
  }
  std::string text(meta_len, '\0');
  if (!in.read(text.data(), meta_len)) throw Error(ErrorCode::kModelLoad, path.string() + ": truncated");
  ModelConfig config;
  try {
    const auto meta = nlohmann::json::parse(text);
    config.point_widths = meta.at("point_widths").get<std::vector<int>>();
    config.head_widths = meta.at("head_widths").get<std::vector<int>>();
    config.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kModelLoad, path.string() + ": bad metadata: " + e.what());
  }
  Classifier model(config);
  std::uint64_t count = 0;
  if (!get_u64(in, count) || count != static_cast<std::uint64_t>(model.parameter_count())) {
    throw Error(ErrorCode::kModelLoad, path.string() + ": parameter count mismatch");
  }
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits = 0;
    if (!get_u64(in, bits)) throw Error(ErrorCode::kModelLoad, path.string() + ": truncated payload");
    params[i] = std::bit_cast<double>(bits);
  }
  if (!params.allFinite()) throw Error(ErrorCode::kModelLoad, path.string() + ": non-finite weights");
  model.set_parameters(params);
  return model;
}

}  // namespace gsda
