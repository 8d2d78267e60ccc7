#pragma once

#include <string>
#include <utility>
#include <variant>

#include "contracate/error.hpp"
#include "contracate/model/cate_model.hpp"
#include "contracate/model/linear_model.hpp"
#include "contracate/model/train.hpp"

namespace contracate::model {

enum class Family { Network, Linear };

inline const char* to_string(Family f) { return f == Family::Network ? "network" : "linear"; }

inline Family parse_family(const std::string& s) {
  if (s == "network") return Family::Network;
  if (s == "linear") return Family::Linear;
  throw ConfigError("unknown model family '" + s + "' (expected network or linear)");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "plain") return Mode::Plain;
  if (s == "contrastive") return Mode::Contrastive;
  throw ConfigError("unknown training mode '" + s + "' (expected plain or contrastive)");
}

/// Either model family behind one interface.
class AnyModel {
 public:
  AnyModel() = default;
  AnyModel(CateModel m) : model_(std::move(m)) {}
  AnyModel(LinearCateModel m) : model_(std::move(m)) {}

  Family family() const { return std::holds_alternative<CateModel>(model_) ? Family::Network : Family::Linear; }

  Eigen::VectorXd predict_batch(const Tensor2& x, const Tensor2& t) const {
    return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict_batch(x, t); }, model_);
  }
  double predict(const Eigen::VectorXd& x, const Eigen::VectorXd& t) const {
    return std::visit([&](const auto& m) { return m.predict(x, t); }, model_);
  }
  Tensor2 treatment_representation_batch(const Tensor2& t) const {
    return std::visit([&](const auto& m) -> Tensor2 { return m.treatment_representation_batch(t); }, model_);
  }
  std::size_t dim_x() const {
    return std::visit([](const auto& m) { return m.dim_x(); }, model_);
  }
  std::size_t dim_t() const {
    return std::visit([](const auto& m) { return m.dim_t(); }, model_);
  }

  std::variant<CateModel, LinearCateModel>& get() { return model_; }
  const std::variant<CateModel, LinearCateModel>& get() const { return model_; }

 private:
  std::variant<CateModel, LinearCateModel> model_;
};

template <typename M>
TrainResult<AnyModel> erase(TrainResult<M>&& r) {
  TrainResult<AnyModel> out;
  out.model = AnyModel(std::move(r.model));
  out.log = std::move(r.log);
  out.status = r.status;
  out.message = std::move(r.message);
  out.mining = std::move(r.mining);
  return out;
}

inline TrainResult<AnyModel> train_family(const scm::Dataset& ds, const TrainConfig& config, Family family) {
  if (family == Family::Linear) return erase(train_linear(ds, config));
  return erase(train(ds, config));
}

}  // namespace contracate::model
