#include "pullback/model_io.hpp"

#include "pullback/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pullback {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

template <class It>
std::string number_array(It begin, It end) {
  std::string out = "[";
  for (It it = begin; it != end; ++it) {
    if (it != begin) out += ",";
    out += fmt17(*it);
  }
  return out + "]";
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  const Flow& flow = model.flow;
  const FlowConfig& cfg = flow.config();
  std::ostringstream os;
  os << "{\n";
  os << "  \"schema\": " << json_string(kModelSchema) << ",\n";
  os << "  \"variant\": " << json_string(model.variant) << ",\n";
  os << "  \"dataset\": " << json_string(model.dataset) << ",\n";
  os << "  \"dim\": " << cfg.dim << ",\n";
  os << "  \"layers\": " << cfg.layers << ",\n";
  os << "  \"hidden\": " << cfg.hidden << ",\n";
  os << "  \"blocks\": " << cfg.blocks << ",\n";
  os << "  \"s_max\": " << fmt17(cfg.s_max) << ",\n";
  const Vector& lam = model.potential.variances();
  os << "  \"variances\": " << number_array(lam.data(), lam.data() + lam.size()) << ",\n";
  os << "  \"masks\": [";
  for (std::size_t l = 0; l < flow.layers().size(); ++l) {
    os << (l ? ", " : "") << "[";
    const auto& mask = flow.layers()[l].mask;
    for (std::size_t i = 0; i < mask.size(); ++i) os << (i ? "," : "") << (mask[i] ? "true" : "false");
    os << "]";
  }
  os << "],\n";
  os << "  \"parameters\": [\n";
  const auto& params = flow.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    os << "    {\"name\": " << json_string(p.name) << ", \"shape\": [" << p.value.rows() << ","
       << p.value.cols() << "], \"data\": "
       << number_array(p.value.data().begin(), p.value.data().end()) << "}"
       << (i + 1 < params.size() ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot open '" + path + "' for writing");
  out << model_to_json(model);
  require(bool(out), ErrorKind::io, "failed writing '" + path + "'");
}

TrainedModel model_from_json(const std::string& text, std::optional<std::size_t> expected_dim) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("model file is not valid JSON: ") + e.what());
  }

  try {
    require(doc.is_object() && doc.contains("schema"), ErrorKind::schema, "model file has no schema id");
    const auto schema = doc.at("schema").get<std::string>();
    require(schema == kModelSchema, ErrorKind::schema,
            "unsupported model schema '" + schema + "', expected '" + kModelSchema + "'");

    FlowConfig cfg;
    cfg.dim = doc.at("dim").get<std::size_t>();
    cfg.layers = doc.at("layers").get<std::size_t>();
    cfg.hidden = doc.at("hidden").get<std::size_t>();
    cfg.blocks = doc.at("blocks").get<std::size_t>();
    cfg.s_max = doc.at("s_max").get<double>();
    if (expected_dim && *expected_dim != cfg.dim)
      fail(ErrorKind::dimension_mismatch, "model has dimension " + std::to_string(cfg.dim) +
                                              " but data has dimension " +
                                              std::to_string(*expected_dim));

    const auto masks = doc.at("masks").get<std::vector<std::vector<bool>>>();
    std::vector<std::pair<std::string, ad::Tensor>> params;
    for (const auto& entry : doc.at("parameters")) {
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      require(shape.size() == 2, ErrorKind::schema, "parameter shape must have two extents");
      auto data = entry.at("data").get<std::vector<double>>();
      params.emplace_back(entry.at("name").get<std::string>(),
                          ad::Tensor({shape[0], shape[1]}, std::move(data)));
    }
    const auto lam = doc.at("variances").get<std::vector<double>>();
    require(lam.size() == cfg.dim, ErrorKind::schema, "variance count does not match dimension");

    Vector variances(Eigen::Index(lam.size()));
    for (std::size_t i = 0; i < lam.size(); ++i) variances[Eigen::Index(i)] = lam[i];

    TrainedModel model{FlowBuilder::build(cfg, masks, params), DiagonalQuadratic(variances),
                       doc.value("variant", std::string("ours")), doc.value("dataset", std::string())};
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::dimension_mismatch) throw;
    fail(ErrorKind::schema, std::string("malformed model file: ") + e.what());
  }
}

TrainedModel load_model(const std::string& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str(), expected_dim);
}

}  // namespace pullback
