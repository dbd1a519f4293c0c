#include "mml/json_io.hpp"

#include <stdexcept>

namespace mml {

std::string attention_name(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::Soft: return "soft";
    case AttentionMode::Hard: return "hard";
    case AttentionMode::None: return "none";
  }
  return "soft";
}

AttentionMode attention_from_name(const std::string& name) {
  if (name == "soft") return AttentionMode::Soft;
  if (name == "hard") return AttentionMode::Hard;
  if (name == "none") return AttentionMode::None;
  throw std::invalid_argument("unknown attention mode: " + name);
}

std::string norm_axis_name(NormAxis axis) {
  return axis == NormAxis::Class ? "class" : "proxy";
}

NormAxis norm_axis_from_name(const std::string& name) {
  if (name == "class") return NormAxis::Class;
  if (name == "proxy") return NormAxis::Proxy;
  throw std::invalid_argument("unknown normalization axis: " + name);
}

std::string criterion_name(EsCriterion c) {
  switch (c) {
    case EsCriterion::ValLoss: return "val_loss";
    case EsCriterion::ValAcc: return "val_acc";
    case EsCriterion::TrainLoss: return "train_loss";
  }
  return "val_loss";
}

EsCriterion criterion_from_name(const std::string& name) {
  if (name == "val_loss") return EsCriterion::ValLoss;
  if (name == "val_acc") return EsCriterion::ValAcc;
  if (name == "train_loss") return EsCriterion::TrainLoss;
  throw std::invalid_argument("unknown early-stopping criterion: " + name);
}

void to_json(nlohmann::json& j, const SynthConfig& cfg) {
  j = nlohmann::json{{"n_modalities", cfg.n_modalities},
                     {"dim", cfg.dim},
                     {"n_train", cfg.n_train},
                     {"n_val", cfg.n_val},
                     {"n_test", cfg.n_test},
                     {"sparsity", cfg.sparsity},
                     {"beta_sd", cfg.beta_sd},
                     {"sigma", cfg.sigma},
                     {"epsilon_sd", cfg.epsilon_sd},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SynthConfig& cfg) {
  // merge semantics: absent keys keep the value already in cfg, so partial
  // JSON files layer over presets
  const SynthConfig defaults = cfg;
  cfg.n_modalities = j.value("n_modalities", defaults.n_modalities);
  cfg.dim = j.value("dim", defaults.dim);
  cfg.n_train = j.value("n_train", defaults.n_train);
  cfg.n_val = j.value("n_val", defaults.n_val);
  cfg.n_test = j.value("n_test", defaults.n_test);
  cfg.sparsity = j.value("sparsity", defaults.sparsity);
  cfg.beta_sd = j.value("beta_sd", defaults.beta_sd);
  cfg.epsilon_sd = j.value("epsilon_sd", defaults.epsilon_sd);
  cfg.seed = j.value("seed", defaults.seed);
  if (j.contains("sigma")) {
    cfg.sigma = j.at("sigma").get<std::vector<double>>();
  } else if (cfg.sigma.size() != static_cast<std::size_t>(cfg.n_modalities)) {
    cfg.sigma.assign(cfg.n_modalities, 0.2);
  }
}

void to_json(nlohmann::json& j, const MethodSpec& m) { j = m.label(); }

void from_json(const nlohmann::json& j, MethodSpec& m) {
  m = MethodSpec::parse(j.get<std::string>());
}

void to_json(nlohmann::json& j, const SoftTripleConfig& cfg) {
  j = nlohmann::json{{"lambda", cfg.lambda},
                     {"delta", cfg.delta},
                     {"gamma", cfg.gamma},
                     {"proxies", cfg.proxies}};
}

void from_json(const nlohmann::json& j, SoftTripleConfig& cfg) {
  const SoftTripleConfig defaults = cfg;
  cfg.lambda = j.value("lambda", defaults.lambda);
  cfg.delta = j.value("delta", defaults.delta);
  cfg.gamma = j.value("gamma", defaults.gamma);
  cfg.proxies = j.value("proxies", defaults.proxies);
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"method", cfg.method},
                     {"hidden", cfg.hidden},
                     {"lr", cfg.lr},
                     {"lr_grid", cfg.lr_grid},
                     {"weight_decay", cfg.weight_decay},
                     {"patience", cfg.patience},
                     {"max_epochs", cfg.max_epochs},
                     {"batch_size", cfg.batch_size},
                     {"seed", cfg.seed},
                     {"criterion", criterion_name(cfg.criterion)},
                     {"proxies", cfg.proxies},
                     {"gamma", cfg.gamma},
                     {"proxy_init_sd", cfg.proxy_init_sd},
                     {"attention", attention_name(cfg.attention)},
                     {"norm_axis", norm_axis_name(cfg.norm_axis)},
                     {"include_attended", cfg.include_attended},
                     {"softtriple", cfg.softtriple}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  const TrainConfig defaults = cfg;
  if (j.contains("method")) cfg.method = j.at("method").get<MethodSpec>();
  cfg.hidden = j.value("hidden", defaults.hidden);
  cfg.lr = j.value("lr", defaults.lr);
  cfg.lr_grid = j.value("lr_grid", defaults.lr_grid);
  cfg.weight_decay = j.value("weight_decay", defaults.weight_decay);
  cfg.patience = j.value("patience", defaults.patience);
  cfg.max_epochs = j.value("max_epochs", defaults.max_epochs);
  cfg.batch_size = j.value("batch_size", defaults.batch_size);
  cfg.seed = j.value("seed", defaults.seed);
  cfg.criterion = criterion_from_name(j.value("criterion", criterion_name(defaults.criterion)));
  cfg.proxies = j.value("proxies", defaults.proxies);
  cfg.gamma = j.value("gamma", defaults.gamma);
  cfg.proxy_init_sd = j.value("proxy_init_sd", defaults.proxy_init_sd);
  cfg.attention = attention_from_name(j.value("attention", attention_name(defaults.attention)));
  cfg.norm_axis = norm_axis_from_name(j.value("norm_axis", norm_axis_name(defaults.norm_axis)));
  cfg.include_attended = j.value("include_attended", defaults.include_attended);
  if (j.contains("softtriple")) from_json(j.at("softtriple"), cfg.softtriple);
}

}  // namespace mml
