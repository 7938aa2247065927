#include <json.hpp>

#include "cadrepair/errors.h"
#include "cadrepair/neural.h"

namespace cadrepair {

namespace {

using ojson = nlohmann::ordered_json;
constexpr int kFormatVersion = 1;

ojson parse_model(const std::string& text) {
  try {
    ojson j = ojson::parse(text);
    if (!j.is_object()) throw Error(Errc::MalformedRecord, "model file must hold a JSON object");
    if (j.value("format_version", 0) != kFormatVersion) {
      throw Error(Errc::MalformedRecord, "unsupported model format_version");
    }
    return j;
  } catch (const ojson::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("model file: ") + e.what());
  }
}

}  // namespace

std::string mlp_to_json(const Mlp& m, const std::string& kind) {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["kind"] = kind;
  j["layer_dims"] = m.dims();
  ojson acts = ojson::array();
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    if (l + 1 < m.layers.size()) {
      acts.push_back("relu");
    } else {
      acts.push_back(m.output == OutputActivation::Sigmoid ? "sigmoid" : "identity");
    }
  }
  j["activations"] = std::move(acts);
  ojson weights = ojson::array();
  ojson biases = ojson::array();
  for (const DenseLayer& l : m.layers) {
    weights.push_back(l.weight);
    biases.push_back(l.bias);
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j.dump() + "\n";
}

Mlp mlp_from_json(const std::string& text) {
  const ojson j = parse_model(text);
  try {
    const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
      throw Error(Errc::MalformedRecord, "layer_dims and activations disagree");
    }
    const std::string& last = acts.back();
    if (last != "sigmoid" && last != "identity") throw Error(Errc::MalformedRecord, "unknown output activation " + last);
    Mlp m = Mlp::zeros(dims, last == "sigmoid" ? OutputActivation::Sigmoid : OutputActivation::Identity);
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.layers.size() || biases.size() != m.layers.size()) {
      throw Error(Errc::MalformedRecord, "layer count mismatch");
    }
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      auto w = weights[l].get<std::vector<double>>();
      auto b = biases[l].get<std::vector<double>>();
      if (w.size() != m.layers[l].weight.size() || b.size() != m.layers[l].bias.size()) {
        throw Error(Errc::MalformedRecord, "parameter shape mismatch in layer " + std::to_string(l));
      }
      m.layers[l].weight = std::move(w);
      m.layers[l].bias = std::move(b);
    }
    return m;
  } catch (const ojson::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("model file: ") + e.what());
  }
}

std::string regressor_to_json(const LinearRegressor& r, const std::string& kind) {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["kind"] = kind;
  j["in_dim"] = r.in_dim;
  j["out_dim"] = r.out_dim;
  j["W"] = r.weight;
  j["b"] = r.bias;
  return j.dump() + "\n";
}

LinearRegressor regressor_from_json(const std::string& text) {
  const ojson j = parse_model(text);
  try {
    LinearRegressor r;
    r.in_dim = j.at("in_dim").get<std::size_t>();
    r.out_dim = j.at("out_dim").get<std::size_t>();
    r.weight = j.at("W").get<std::vector<double>>();
    r.bias = j.at("b").get<std::vector<double>>();
    if (r.weight.size() != r.in_dim * r.out_dim || r.bias.size() != r.out_dim) {
      throw Error(Errc::MalformedRecord, "regressor shape mismatch");
    }
    return r;
  } catch (const ojson::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("regressor file: ") + e.what());
  }
}

}  // namespace cadrepair
