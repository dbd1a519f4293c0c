#include "mml/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mml/json_io.hpp"
#include "mml/numerics.hpp"

namespace mml {

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::MultiModal: return "multimodal";
    case Kind::SoftTriple: return "softtriple";
    case Kind::SumCe: return "sum_ce";
    case Kind::WeightedSumCe: return "weighted_sum_ce";
    case Kind::NnCe: return "nn_ce";
    case Kind::Unimodal: return "unimodal:" + std::to_string(modality + 1);
  }
  return "multimodal";
}

MethodSpec MethodSpec::parse(const std::string& text) {
  MethodSpec m;
  if (text == "multimodal") {
    m.kind = Kind::MultiModal;
  } else if (text == "softtriple") {
    m.kind = Kind::SoftTriple;
  } else if (text == "sum_ce") {
    m.kind = Kind::SumCe;
  } else if (text == "weighted_sum_ce") {
    m.kind = Kind::WeightedSumCe;
  } else if (text == "nn_ce") {
    m.kind = Kind::NnCe;
  } else if (text.rfind("unimodal:", 0) == 0) {
    m.kind = Kind::Unimodal;
    const int idx = std::stoi(text.substr(9));
    if (idx < 1) throw std::invalid_argument("unimodal index is 1-based: " + text);
    m.modality = idx - 1;
  } else {
    throw std::invalid_argument("unknown method: " + text);
  }
  return m;
}

namespace {

std::vector<int> active_modalities(const MethodSpec& method, int total) {
  if (method.kind == MethodSpec::Kind::Unimodal) {
    if (method.modality < 0 || method.modality >= total)
      throw std::invalid_argument("unimodal modality index out of range");
    return {method.modality};
  }
  std::vector<int> all(total);
  for (int m = 0; m < total; ++m) all[m] = m;
  return all;
}

Matrix concat_columns(const ModalityOutputs& x) {
  const std::size_t B = x[0].rows(), C = x[0].cols();
  Matrix out(B, x.size() * C);
  for (std::size_t m = 0; m < x.size(); ++m)
    for (std::size_t i = 0; i < B; ++i)
      std::memcpy(out.row(i) + m * C, x[m].row(i), C * sizeof(double));
  return out;
}

ModalityOutputs split_columns(const Matrix& grad, std::size_t modalities) {
  const std::size_t B = grad.rows(), C = grad.cols() / modalities;
  ModalityOutputs out(modalities, Matrix(B, C));
  for (std::size_t m = 0; m < modalities; ++m)
    for (std::size_t i = 0; i < B; ++i)
      std::memcpy(out[m].row(i), grad.row(i) + m * C, C * sizeof(double));
  return out;
}

struct Snapshot {
  MlpStack stack;
  ProxyBank bank;
  Matrix st_proxies;
  FusionHead head;
};

Snapshot take_snapshot(const TrainedModel& m) {
  return Snapshot{m.stack, m.bank, m.st_proxies, m.head};
}

void restore_snapshot(TrainedModel& m, const Snapshot& s) {
  m.stack = s.stack;
  m.bank = s.bank;
  m.st_proxies = s.st_proxies;
  m.head = s.head;
}

// batch loss + gradient w.r.t. the modality outputs, plus loss-parameter
// gradients stashed in stable storage for the optimizer step
struct StepGrads {
  double loss = 0.0;
  ModalityOutputs d_outputs;
  LossGrad mm;            // MultiModal proxies
  SoftTripleResult st;    // SoftTriple proxies
  FusionGrad fusion;      // Nn head
};

StepGrads loss_step(TrainedModel& model, const ModalityOutputs& outputs,
                    const std::vector<int>& labels) {
  StepGrads grads;
  switch (model.cfg.method.kind) {
    case MethodSpec::Kind::MultiModal: {
      grads.mm = mm_loss_backward(
          mm_loss_forward(outputs, labels, model.bank, model.cfg.mm_config()));
      grads.loss = grads.mm.loss;
      grads.d_outputs = grads.mm.d_outputs;
      break;
    }
    case MethodSpec::Kind::SoftTriple: {
      const Matrix x = concat_columns(outputs);
      grads.st = softtriple_forward_backward(x, labels, model.st_proxies, model.classes,
                                             model.cfg.softtriple);
      grads.loss = grads.st.loss;
      grads.d_outputs = split_columns(grads.st.d_x, outputs.size());
      break;
    }
    case MethodSpec::Kind::SumCe:
    case MethodSpec::Kind::Unimodal: {
      grads.fusion = fusion_ce_forward_backward(outputs, labels, FusionHead::sum());
      grads.loss = grads.fusion.loss;
      grads.d_outputs = grads.fusion.d_outputs;
      break;
    }
    case MethodSpec::Kind::WeightedSumCe:
    case MethodSpec::Kind::NnCe: {
      grads.fusion = fusion_ce_forward_backward(outputs, labels, model.head);
      grads.loss = grads.fusion.loss;
      grads.d_outputs = grads.fusion.d_outputs;
      break;
    }
  }
  return grads;
}

std::vector<ParamRef> collect_params(TrainedModel& model, MlpGrads& mlp_grads,
                                     StepGrads& grads) {
  std::vector<ParamRef> params;
  for (std::size_t a = 0; a < model.stack.nets.size(); ++a) {
    for (std::size_t l = 0; l < model.stack.nets[a].layers.size(); ++l) {
      MlpLayer& layer = model.stack.nets[a].layers[l];
      const std::string base = "mlp" + std::to_string(a) + ".layer" + std::to_string(l);
      params.push_back({base + ".W", layer.W.data(), mlp_grads[a][l].W.data(), layer.W.size()});
      params.push_back({base + ".b", layer.b.data(), mlp_grads[a][l].b.data(), layer.b.size()});
    }
  }
  switch (model.cfg.method.kind) {
    case MethodSpec::Kind::MultiModal:
      for (int m = 0; m < model.bank.modalities; ++m)
        params.push_back({"proxies.m" + std::to_string(m), model.bank.w[m].data(),
                          grads.mm.d_proxies[m].data(), model.bank.w[m].size()});
      break;
    case MethodSpec::Kind::SoftTriple:
      params.push_back({"softtriple.proxies", model.st_proxies.data(),
                        grads.st.d_proxies.data(), model.st_proxies.size()});
      break;
    case MethodSpec::Kind::NnCe:
      params.push_back({"head.W", model.head.W.data(), grads.fusion.d_W.data(),
                        model.head.W.size()});
      params.push_back({"head.b", model.head.b.data(), grads.fusion.d_b.data(),
                        model.head.b.size()});
      break;
    default:
      break;  // sum and weighted-sum heads carry no trainable parameters
  }
  return params;
}

double criterion_value(const EpochStats& s, EsCriterion c) {
  switch (c) {
    case EsCriterion::ValLoss: return s.val_loss;
    case EsCriterion::ValAcc: return -s.val_acc;  // lower is better, uniformly
    case EsCriterion::TrainLoss: return s.train_loss;
  }
  return s.val_loss;
}

std::vector<Matrix> select_features(const std::vector<Matrix>& features,
                                    const std::vector<int>& active) {
  std::vector<Matrix> out;
  out.reserve(active.size());
  for (int a : active) out.push_back(features[a]);
  return out;
}

}  // namespace

ModalityOutputs model_outputs(const TrainedModel& model, const std::vector<Matrix>& features) {
  return mlp_forward(model.stack, select_features(features, model.active));
}

Matrix model_logits(const TrainedModel& model, const ModalityOutputs& outputs) {
  switch (model.cfg.method.kind) {
    case MethodSpec::Kind::MultiModal: {
      const Matrix sim = mm_similarity(outputs, model.bank);
      const MultiModalConfig mm = model.cfg.mm_config();
      Matrix scores = mm_class_similarity(sim, mm.gamma, mm.norm_axis, model.bank.classes,
                                          model.bank.proxies);
      if (mm.include_attended) {
        const Matrix att = mm_attention(sim, mm.gamma, mm.attention);
        const Matrix attended = mm_attended_output(outputs, model.bank, att);
        for (std::size_t idx = 0; idx < scores.size(); ++idx)
          scores.data()[idx] += attended.data()[idx];
      }
      return scores;
    }
    case MethodSpec::Kind::SoftTriple:
      return softtriple_class_sim(concat_columns(outputs), model.st_proxies, model.classes,
                                  model.cfg.softtriple);
    case MethodSpec::Kind::SumCe:
    case MethodSpec::Kind::Unimodal:
      return fusion_logits(outputs, FusionHead::sum());
    case MethodSpec::Kind::WeightedSumCe:
    case MethodSpec::Kind::NnCe:
      return fusion_logits(outputs, model.head);
  }
  throw std::logic_error("model_logits: unknown method");
}

std::vector<int> predict_from_logits(const Matrix& logits) {
  std::vector<int> pred(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    pred[i] = static_cast<int>(best);
  }
  return pred;
}

double method_loss(const TrainedModel& model, const ModalityOutputs& outputs,
                   const std::vector<int>& labels) {
  switch (model.cfg.method.kind) {
    case MethodSpec::Kind::MultiModal:
      return mm_loss_value(outputs, labels, model.bank, model.cfg.mm_config());
    case MethodSpec::Kind::SoftTriple:
      return softtriple_forward_backward(concat_columns(outputs), labels, model.st_proxies,
                                         model.classes, model.cfg.softtriple)
          .loss;
    case MethodSpec::Kind::SumCe:
    case MethodSpec::Kind::Unimodal:
      return fusion_ce_forward_backward(outputs, labels, FusionHead::sum()).loss;
    case MethodSpec::Kind::WeightedSumCe:
    case MethodSpec::Kind::NnCe:
      return fusion_ce_forward_backward(outputs, labels, model.head).loss;
  }
  throw std::logic_error("method_loss: unknown method");
}

TrainedModel train(const SplitData& train_set, const SplitData& val_set, const TrainConfig& cfg) {
  if (train_set.size() == 0 || val_set.size() == 0)
    throw std::invalid_argument("train: empty split");
  if (train_set.modalities() == 0 || train_set.modalities() != val_set.modalities())
    throw std::invalid_argument("train: modality count mismatch between splits");
  if (cfg.patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (cfg.max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  int classes = 0;
  for (int y : train_set.labels) classes = std::max(classes, y + 1);
  for (int y : val_set.labels) classes = std::max(classes, y + 1);
  classes = std::max(classes, 2);

  TrainedModel model;
  model.cfg = cfg;
  model.classes = classes;
  model.active = active_modalities(cfg.method, static_cast<int>(train_set.modalities()));

  Rng rng(cfg.seed);
  for (int a : model.active) {
    std::vector<int> dims;
    dims.push_back(static_cast<int>(train_set.features[a].cols()));
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(classes);
    model.stack.nets.push_back(Mlp::init(dims, rng));
  }
  const int M = static_cast<int>(model.active.size());
  switch (cfg.method.kind) {
    case MethodSpec::Kind::MultiModal:
      model.bank = ProxyBank::init(classes, cfg.proxies, M, cfg.gamma, rng, cfg.proxy_init_sd);
      break;
    case MethodSpec::Kind::SoftTriple: {
      model.st_proxies = Matrix(static_cast<std::size_t>(classes) * cfg.softtriple.proxies,
                                static_cast<std::size_t>(M) * classes);
      for (double& v : model.st_proxies.storage()) v = rng.normal(0.0, cfg.proxy_init_sd);
      break;
    }
    case MethodSpec::Kind::WeightedSumCe:
      if (cfg.method.weights.size() != static_cast<std::size_t>(M))
        throw std::invalid_argument("weighted_sum_ce needs one weight per modality");
      model.head = FusionHead::weighted_sum(cfg.method.weights);
      break;
    case MethodSpec::Kind::NnCe:
      model.head = FusionHead::nn(M, classes, rng);
      break;
    default:
      model.head = FusionHead::sum();
      break;
  }

  AdamState adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  const std::vector<Matrix> val_features = select_features(val_set.features, model.active);

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Snapshot best = take_snapshot(model);
  double best_value = 0.0;
  int bad_epochs = 0;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    try {
      rng.shuffle(order);
      double epoch_loss = 0.0;
      for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
        const std::size_t bsize = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
        std::vector<Matrix> batch;
        batch.reserve(model.active.size());
        for (int a : model.active) {
          Matrix feats(bsize, train_set.features[a].cols());
          for (std::size_t r = 0; r < bsize; ++r)
            std::memcpy(feats.row(r), train_set.features[a].row(order[pos + r]),
                        feats.cols() * sizeof(double));
          batch.push_back(std::move(feats));
        }
        std::vector<int> labels(bsize);
        for (std::size_t r = 0; r < bsize; ++r) labels[r] = train_set.labels[order[pos + r]];

        MlpCache cache;
        const ModalityOutputs outputs = mlp_forward(model.stack, batch, &cache);
        StepGrads grads = loss_step(model, outputs, labels);
        if (!std::isfinite(grads.loss))
          throw std::runtime_error("training diverged (non-finite loss)");
        epoch_loss += grads.loss * static_cast<double>(bsize);

        MlpGrads mlp_grads = mlp_backward(model.stack, cache, grads.d_outputs);
        adam.step(collect_params(model, mlp_grads, grads));
      }

      EpochStats stats;
      stats.train_loss = epoch_loss / static_cast<double>(train_set.size());
      const ModalityOutputs val_out = mlp_forward(model.stack, val_features);
      stats.val_loss = method_loss(model, val_out, val_set.labels);
      const std::vector<int> pred = predict_from_logits(model_logits(model, val_out));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == val_set.labels[i];
      stats.val_acc = static_cast<double>(hits) / static_cast<double>(pred.size());
      stats.seconds = elapsed();
      model.history.push_back(stats);

      const double value = criterion_value(stats, cfg.criterion);
      if (!std::isfinite(value)) throw std::runtime_error("training diverged (non-finite loss)");
      if (epoch == 0 || value < best_value) {
        best_value = value;
        model.best_epoch = epoch;
        best = take_snapshot(model);
        bad_epochs = 0;
      } else if (++bad_epochs >= cfg.patience) {
        break;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }

  restore_snapshot(model, best);
  model.wall_seconds = elapsed();
  model.seconds_to_best = model.history[model.best_epoch].seconds;
  model.adam = std::move(adam);
  model.rng_state = rng.state();
  return model;
}

LrGridResult lr_grid_search(const SplitData& train_set, const SplitData& val_set,
                            const TrainConfig& cfg) {
  if (cfg.lr_grid.empty()) throw std::invalid_argument("lr_grid_search: empty grid");
  LrGridResult result;
  bool have_winner = false;
  for (double lr : cfg.lr_grid) {
    LrGridCell cell;
    cell.lr = lr;
    TrainConfig run_cfg = cfg;
    run_cfg.lr = lr;
    try {
      TrainedModel model = train(train_set, val_set, run_cfg);
      cell.ok = true;
      cell.val_loss = model.history[model.best_epoch].val_loss;
      cell.val_acc = model.history[model.best_epoch].val_acc;
      cell.best_epoch = model.best_epoch;
      const double winner_acc =
          have_winner ? result.model.history[result.model.best_epoch].val_acc : -1.0;
      if (!have_winner || cell.val_acc > winner_acc ||
          (cell.val_acc == winner_acc && lr < result.best_lr)) {
        result.best_lr = lr;
        result.model = std::move(model);
        have_winner = true;
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    result.cells.push_back(std::move(cell));
  }
  if (!have_winner) throw std::runtime_error("lr_grid_search: every learning rate failed");
  return result;
}

// ---- checkpoint -------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'M', 'M', 'L', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& f, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& f) {
  unsigned char buf[8];
  f.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& f, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(f, bits);
}

double get_f64(std::istream& f) {
  const std::uint64_t bits = get_u64(f);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void put_vec(std::ostream& f, const std::vector<double>& v) {
  put_u64(f, v.size());
  for (double d : v) put_f64(f, d);
}

std::vector<double> get_vec(std::istream& f) {
  std::vector<double> v(get_u64(f));
  for (double& d : v) d = get_f64(f);
  return v;
}

void put_matrix(std::ostream& f, const Matrix& m) {
  put_u64(f, m.rows());
  put_u64(f, m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) put_f64(f, m.data()[i]);
}

Matrix get_matrix(std::istream& f) {
  const std::uint64_t rows = get_u64(f), cols = get_u64(f);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = get_f64(f);
  return m;
}

void put_string(std::ostream& f, const std::string& s) {
  put_u64(f, s.size());
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& f) {
  std::string s(get_u64(f), '\0');
  f.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(kCkptMagic, 8);
  put_u64(f, 1);  // version

  put_string(f, nlohmann::json(model.cfg).dump());
  put_u64(f, model.active.size());
  for (int a : model.active) put_u64(f, static_cast<std::uint64_t>(a));
  put_u64(f, static_cast<std::uint64_t>(model.classes));

  put_u64(f, model.stack.nets.size());
  for (const Mlp& net : model.stack.nets) {
    put_u64(f, net.layers.size());
    for (const MlpLayer& layer : net.layers) {
      put_matrix(f, layer.W);
      put_vec(f, layer.b);
    }
  }

  put_u64(f, model.bank.w.empty() ? 0 : 1);
  if (!model.bank.w.empty()) {
    put_u64(f, static_cast<std::uint64_t>(model.bank.classes));
    put_u64(f, static_cast<std::uint64_t>(model.bank.proxies));
    put_u64(f, static_cast<std::uint64_t>(model.bank.modalities));
    put_f64(f, model.bank.gamma);
    for (const Matrix& w : model.bank.w) put_matrix(f, w);
  }
  put_matrix(f, model.st_proxies);
  put_u64(f, static_cast<std::uint64_t>(model.head.kind));
  put_vec(f, model.head.weights);
  put_matrix(f, model.head.W);
  put_vec(f, model.head.b);

  put_u64(f, model.history.size());
  for (const EpochStats& s : model.history) {
    put_f64(f, s.train_loss);
    put_f64(f, s.val_loss);
    put_f64(f, s.val_acc);
    put_f64(f, s.seconds);
  }
  put_u64(f, static_cast<std::uint64_t>(model.best_epoch));
  put_f64(f, model.wall_seconds);
  put_f64(f, model.seconds_to_best);

  const AdamConfig& ac = model.adam.config();
  put_f64(f, ac.lr);
  put_f64(f, ac.beta1);
  put_f64(f, ac.beta2);
  put_f64(f, ac.eps);
  put_f64(f, ac.weight_decay);
  put_u64(f, static_cast<std::uint64_t>(model.adam.step_count()));
  put_u64(f, model.adam.first_moments().size());
  for (std::size_t b = 0; b < model.adam.first_moments().size(); ++b) {
    put_vec(f, model.adam.first_moments()[b]);
    put_vec(f, model.adam.second_moments()[b]);
  }

  for (std::uint64_t word : model.rng_state.s) put_u64(f, word);
  put_u64(f, model.rng_state.has_spare ? 1 : 0);
  put_f64(f, model.rng_state.spare);
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint64_t version = get_u64(f);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");

  TrainedModel model;
  model.cfg = nlohmann::json::parse(get_string(f)).get<TrainConfig>();
  model.active.resize(get_u64(f));
  for (int& a : model.active) a = static_cast<int>(get_u64(f));
  model.classes = static_cast<int>(get_u64(f));

  model.stack.nets.resize(get_u64(f));
  for (Mlp& net : model.stack.nets) {
    net.layers.resize(get_u64(f));
    for (MlpLayer& layer : net.layers) {
      layer.W = get_matrix(f);
      layer.b = get_vec(f);
    }
  }

  if (get_u64(f) == 1) {
    model.bank.classes = static_cast<int>(get_u64(f));
    model.bank.proxies = static_cast<int>(get_u64(f));
    model.bank.modalities = static_cast<int>(get_u64(f));
    model.bank.gamma = get_f64(f);
    model.bank.w.resize(model.bank.modalities);
    for (Matrix& w : model.bank.w) w = get_matrix(f);
  }
  model.st_proxies = get_matrix(f);
  model.head.kind = static_cast<FusionHead::Kind>(get_u64(f));
  model.head.weights = get_vec(f);
  model.head.W = get_matrix(f);
  model.head.b = get_vec(f);

  model.history.resize(get_u64(f));
  for (EpochStats& s : model.history) {
    s.train_loss = get_f64(f);
    s.val_loss = get_f64(f);
    s.val_acc = get_f64(f);
    s.seconds = get_f64(f);
  }
  model.best_epoch = static_cast<int>(get_u64(f));
  model.wall_seconds = get_f64(f);
  model.seconds_to_best = get_f64(f);

  AdamConfig ac;
  ac.lr = get_f64(f);
  ac.beta1 = get_f64(f);
  ac.beta2 = get_f64(f);
  ac.eps = get_f64(f);
  ac.weight_decay = get_f64(f);
  const std::int64_t step = static_cast<std::int64_t>(get_u64(f));
  std::vector<std::vector<double>> m(get_u64(f)), v(m.size());
  for (std::size_t b = 0; b < m.size(); ++b) {
    m[b] = get_vec(f);
    v[b] = get_vec(f);
  }
  model.adam = AdamState(ac);
  model.adam.restore(step, std::move(m), std::move(v));

  for (std::uint64_t& word : model.rng_state.s) word = get_u64(f);
  model.rng_state.has_spare = get_u64(f) == 1;
  model.rng_state.spare = get_f64(f);
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);
  return model;
}

}  // namespace mml
