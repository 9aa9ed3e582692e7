#include "delta/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace delta::ckpt {

using nlohmann::json;

namespace {

constexpr const char* kSchema = "delta-model/1";

json stats_to_json(const norm::Stats& s) {
  return json{{"mu", s.mu}, {"sigma", s.sigma}};
}

norm::Stats stats_from_json(const json& j) {
  norm::Stats s;
  s.mu = j.at("mu").get<std::vector<double>>();
  s.sigma = j.at("sigma").get<std::vector<double>>();
  check_input(s.mu.size() == s.sigma.size(), "checkpoint statistics width mismatch");
  return s;
}

}  // namespace

std::string to_json(const net::ModelState& state) {
  net::validate_model(state);

  json j;
  j["schema"] = kSchema;
  j["spec"] = {{"input_dim", state.spec.input_dim}, {"hidden", state.spec.hidden},
               {"classes", state.spec.classes},     {"alpha", state.spec.alpha},
               {"eps", state.spec.eps}};

  j["dense"] = json::array();
  for (const auto& d : state.dense)
    j["dense"].push_back(json{{"rows", d.w.rows}, {"cols", d.w.cols}, {"w", d.w.data}, {"b", d.b}});

  j["norms"] = json::array();
  for (const auto& n : state.norms) {
    json layer{{"gamma", n.gamma},
               {"beta", n.beta},
               {"source", stats_to_json(n.source)},
               {"alpha", n.alpha},
               {"eps", n.eps},
               {"ema_ready", n.ema_ready}};
    if (n.ema_ready) layer["ema"] = stats_to_json(n.ema);
    j["norms"].push_back(std::move(layer));
  }
  return j.dump(1);
}

net::ModelState from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    check_input(j.at("schema").get<std::string>() == kSchema,
                "unsupported checkpoint schema '" + j.at("schema").get<std::string>() + "'");

    net::ModelState st;
    const json& spec = j.at("spec");
    st.spec.input_dim = spec.at("input_dim").get<std::size_t>();
    st.spec.hidden = spec.at("hidden").get<std::vector<std::size_t>>();
    st.spec.classes = spec.at("classes").get<std::size_t>();
    st.spec.alpha = spec.at("alpha").get<double>();
    st.spec.eps = spec.at("eps").get<double>();

    for (const json& dj : j.at("dense")) {
      net::DenseLayer d;
      d.w = Matrix(dj.at("rows").get<std::size_t>(), dj.at("cols").get<std::size_t>());
      auto w = dj.at("w").get<std::vector<double>>();
      check_input(w.size() == d.w.data.size(), "checkpoint weight size mismatch");
      d.w.data = std::move(w);
      d.b = dj.at("b").get<std::vector<double>>();
      check_input(d.b.size() == d.w.cols, "checkpoint bias size mismatch");
      st.dense.push_back(std::move(d));
    }

    for (const json& nj : j.at("norms")) {
      auto gamma = nj.at("gamma").get<std::vector<double>>();
      norm::LayerState n = norm::make_layer(gamma.size(), nj.at("alpha").get<double>(),
                                            nj.at("eps").get<double>());
      n.gamma = std::move(gamma);
      n.beta = nj.at("beta").get<std::vector<double>>();
      check_input(n.beta.size() == n.gamma.size(), "checkpoint beta size mismatch");
      n.source = stats_from_json(nj.at("source"));
      check_input(n.source.mu.size() == n.channels(), "checkpoint source statistics mismatch");
      n.ema_ready = nj.at("ema_ready").get<bool>();
      if (n.ema_ready) {
        n.ema = stats_from_json(nj.at("ema"));
        check_input(n.ema.mu.size() == n.channels(), "checkpoint running statistics mismatch");
      }
      st.norms.push_back(std::move(n));
    }

    net::validate_model(st);
    return st;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    // Missing keys, wrong types, inconsistent shapes, failed validation:
    // all are one story to the caller — the file cannot be loaded.
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save(const net::ModelState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_json(state) << '\n';
  if (!out) throw IoError("failed writing checkpoint to '" + path + "'");
}

net::ModelState load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace delta::ckpt
