#include "branchnet/model_io.hpp"

#include <filesystem>
#include <fstream>

#include "branchnet/errors.hpp"
#include "branchnet/matrix_io.hpp"
#include "json.hpp"

namespace branchnet {
namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json bn_to_json(const BatchNormState<double>& bn) {
  return {{"eps", bn.eps},
          {"momentum", bn.momentum},
          {"gamma", to_std(bn.gamma)},
          {"beta", to_std(bn.beta)},
          {"running_mean", to_std(bn.running_mean)},
          {"running_var", to_std(bn.running_var)}};
}

BatchNormState<double> bn_from_json(const nlohmann::json& j, Eigen::Index width) {
  BatchNormState<double> bn;
  bn.eps = j.at("eps").get<double>();
  bn.momentum = j.at("momentum").get<double>();
  bn.gamma = from_std(j.at("gamma").get<std::vector<double>>());
  bn.beta = from_std(j.at("beta").get<std::vector<double>>());
  bn.running_mean = from_std(j.at("running_mean").get<std::vector<double>>());
  bn.running_var = from_std(j.at("running_var").get<std::vector<double>>());
  if (bn.gamma.size() != width || bn.beta.size() != width || bn.running_mean.size() != width ||
      bn.running_var.size() != width)
    throw DataError("model: normalization vector width mismatch");
  if ((bn.running_var.array() < 0).any())
    throw DataError("model: negative running variance");
  return bn;
}

}  // namespace

void save_model(const BranchNetModel<double>& model, std::uint64_t seed, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "branchnet-model/1";
  j["d"] = model.n_features();
  j["H"] = model.n_hidden();
  j["C"] = model.n_classes();
  j["mode"] = model.mode == RunMode::train ? "train" : "eval";
  j["affine_trainable"] = model.affine_trainable;
  j["seed"] = seed;
  j["bn_in"] = bn_to_json(model.bn_in);
  j["bn_pre"] = bn_to_json(model.bn_pre);
  j["bn_post"] = bn_to_json(model.bn_post);
  std::ofstream out(std::filesystem::path(dir) / "model.json");
  if (!out) throw DataError("cannot write model header in " + dir);
  out << j.dump(2) << '\n';
  write_matrix_csv(model.w1, (std::filesystem::path(dir) / "w1.csv").string());
  write_matrix_csv(model.w2, (std::filesystem::path(dir) / "w2.csv").string());
  write_matrix_csv(model.mask_m1, (std::filesystem::path(dir) / "mask_m1.csv").string());
}

SavedModel load_model(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "model.json");
  if (!in) throw DataError("cannot open model header in " + dir);
  SavedModel out;
  Eigen::Index d = 0, H = 0, C = 0;
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("format").get<std::string>() != "branchnet-model/1")
      throw DataError("unsupported model format");
    d = j.at("d").get<Eigen::Index>();
    H = j.at("H").get<Eigen::Index>();
    C = j.at("C").get<Eigen::Index>();
    out.model.mode = j.at("mode").get<std::string>() == "train" ? RunMode::train : RunMode::eval;
    out.model.affine_trainable = j.at("affine_trainable").get<bool>();
    out.seed = j.at("seed").get<std::uint64_t>();
    out.model.bn_in = bn_from_json(j.at("bn_in"), d);
    out.model.bn_pre = bn_from_json(j.at("bn_pre"), H);
    out.model.bn_post = bn_from_json(j.at("bn_post"), H);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model JSON: ") + e.what());
  }
  out.model.w1 = read_matrix_csv((std::filesystem::path(dir) / "w1.csv").string());
  out.model.w2 = read_matrix_csv((std::filesystem::path(dir) / "w2.csv").string());
  out.model.mask_m1 = read_matrix_csv((std::filesystem::path(dir) / "mask_m1.csv").string());
  if (out.model.w1.rows() != H || out.model.w1.cols() != d || out.model.w2.rows() != C ||
      out.model.w2.cols() != H || out.model.mask_m1.rows() != H || out.model.mask_m1.cols() != d)
    throw DataError("model matrices disagree with header dims in " + dir);
  return out;
}

}  // namespace branchnet
