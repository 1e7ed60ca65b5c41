#include "branchnet/training.hpp"

#include <cstdio>
#include <fstream>

#include "branchnet/errors.hpp"
#include "json.hpp"

namespace branchnet {

void validate(const TrainConfig& cfg) {
  if (cfg.max_epochs < 1 || cfg.patience < 1 || cfg.batch_size_cap < 2)
    throw DataError("train config: epochs/patience must be positive, batch cap at least 2");
  if (cfg.lr < 0 || cfg.eta_min < 0 || cfg.eta_min > cfg.lr)
    throw DataError("train config: need 0 <= eta_min <= lr");
  if (!(cfg.t0 > 0) || cfg.t_mult < 1.0)
    throw DataError("train config: need t0 > 0 and t_mult >= 1");
  if (std::abs(cfg.ce_weight + cfg.focal_weight - 1.0) > 1e-12 || cfg.ce_weight < 0 ||
      cfg.focal_weight < 0)
    throw DataError("train config: loss weights must be nonnegative and sum to 1");
  if (!(cfg.focal_alpha > 0) || !(cfg.focal_gamma > 0))
    throw DataError("train config: focal alpha and gamma must be positive");
  if (!(cfg.adam_beta1 > 0 && cfg.adam_beta1 < 1) || !(cfg.adam_beta2 > 0 && cfg.adam_beta2 < 1) ||
      !(cfg.adam_eps > 0))
    throw DataError("train config: adam betas in (0,1), eps positive");
  if (!(cfg.bn_eps > 0) || !(cfg.bn_momentum > 0 && cfg.bn_momentum <= 1))
    throw DataError("train config: bn eps positive, momentum in (0,1]");
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad train config JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("train config JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "max_epochs") cfg.max_epochs = value.get<int>();
      else if (key == "patience") cfg.patience = value.get<int>();
      else if (key == "batch_size_cap") cfg.batch_size_cap = value.get<int>();
      else if (key == "lr") cfg.lr = value.get<double>();
      else if (key == "t0") cfg.t0 = value.get<double>();
      else if (key == "t_mult") cfg.t_mult = value.get<double>();
      else if (key == "eta_min") cfg.eta_min = value.get<double>();
      else if (key == "ce_weight") cfg.ce_weight = value.get<double>();
      else if (key == "focal_weight") cfg.focal_weight = value.get<double>();
      else if (key == "focal_alpha") cfg.focal_alpha = value.get<double>();
      else if (key == "focal_gamma") cfg.focal_gamma = value.get<double>();
      else if (key == "adam_beta1") cfg.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") cfg.adam_beta2 = value.get<double>();
      else if (key == "adam_eps") cfg.adam_eps = value.get<double>();
      else if (key == "bn_eps") cfg.bn_eps = value.get<double>();
      else if (key == "bn_momentum") cfg.bn_momentum = value.get<double>();
      else if (key == "bn_affine_trainable") cfg.bn_affine_trainable = value.get<bool>();
      else if (key == "restore_best") cfg.restore_best = value.get<bool>();
      else if (key == "schedule_per_batch") cfg.schedule_per_batch = value.get<bool>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw DataError("train config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw DataError("train config key '" + key + "': " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["batch_size_cap"] = cfg.batch_size_cap;
  j["lr"] = cfg.lr;
  j["t0"] = cfg.t0;
  j["t_mult"] = cfg.t_mult;
  j["eta_min"] = cfg.eta_min;
  j["ce_weight"] = cfg.ce_weight;
  j["focal_weight"] = cfg.focal_weight;
  j["focal_alpha"] = cfg.focal_alpha;
  j["focal_gamma"] = cfg.focal_gamma;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["bn_eps"] = cfg.bn_eps;
  j["bn_momentum"] = cfg.bn_momentum;
  j["bn_affine_trainable"] = cfg.bn_affine_trainable;
  j["restore_best"] = cfg.restore_best;
  j["schedule_per_batch"] = cfg.schedule_per_batch;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

std::string train_record_to_json(const TrainRecord& rec) {
  nlohmann::json j;
  j["train_loss"] = rec.train_loss;
  j["val_loss"] = rec.val_loss;
  j["lr"] = rec.lr;
  j["best_epoch"] = rec.best_epoch;
  j["stopped_epoch"] = rec.stopped_epoch;
  j["best_val_loss"] = rec.best_val_loss;
  j["batch_size"] = rec.batch_size;
  j["diverged"] = rec.diverged;
  j["message"] = rec.message;
  j["wall_time_s"] = rec.wall_time_s;
  return j.dump(2);
}

void write_train_record_csv(const TrainRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "epoch,train_loss,val_loss,lr\n";
  char buf[200];
  for (std::size_t i = 0; i < rec.train_loss.size(); ++i) {
    const double val = i < rec.val_loss.size() ? rec.val_loss[i] : 0.0;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i + 1, rec.train_loss[i], val,
                  rec.lr[i]);
    out << buf;
  }
}

std::vector<std::vector<int>> make_batches(const std::vector<int>& order, int batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
    if (end - begin < 2) break;  // a single leftover sample cannot be normalized
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace branchnet
