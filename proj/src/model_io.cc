#include "uplift/model_io.h"

#include <fstream>
#include <sstream>

#include "uplift/errors.h"

namespace uplift {
namespace {

using nlohmann::json;

json net_to_json(const DenseNet& net) {
  json layers = json::array();
  for (const Layer& layer : net.layers()) {
    layers.push_back({
        {"in", layer.weight.rows()},
        {"out", layer.weight.cols()},
        {"activation", std::string(to_string(layer.activation))},
        {"weight", std::vector<double>(layer.weight.data(),
                                       layer.weight.data() + layer.weight.size())},
        {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())},
    });
  }
  return layers;
}

DenseNet net_from_json(const json& j) {
  std::vector<Layer> layers;
  for (const json& l : j) {
    const auto in = l.at("in").get<Eigen::Index>();
    const auto out = l.at("out").get<Eigen::Index>();
    const auto w = l.at("weight").get<std::vector<double>>();
    const auto b = l.at("bias").get<std::vector<double>>();
    if (Eigen::Index(w.size()) != in * out || Eigen::Index(b.size()) != out) {
      throw ParseError("model layer arrays do not match their declared shape");
    }
    Layer layer;
    layer.weight = Eigen::Map<const Matrix>(w.data(), in, out);
    layer.bias = Eigen::Map<const Matrix>(b.data(), 1, out);
    layer.activation = parse_activation(l.at("activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

template <typename T>
void read_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

json spec_to_json(const ModelSpec& spec) {
  return {
      {"backbone", std::string(to_string(spec.backbone))},
      {"head", std::string(to_string(spec.head))},
      {"disc", std::string(to_string(spec.disc))},
      {"pairing", std::string(to_string(spec.pairing))},
      {"lambda1", spec.weights.lambda1},
      {"lambda2", spec.weights.lambda2},
      {"rep_hidden", spec.rep_hidden},
      {"rep_out", spec.rep_out},
      {"head_hidden", spec.head_hidden},
      {"ofa_degree", spec.ofa_degree},
      {"activation", std::string(to_string(spec.activation))},
      {"seed", spec.seed},
  };
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  try {
    if (j.contains("backbone")) spec.backbone = parse_backbone(j.at("backbone").get<std::string>());
    if (j.contains("head")) spec.head = parse_head_kind(j.at("head").get<std::string>());
    if (j.contains("disc")) spec.disc = parse_disc_kind(j.at("disc").get<std::string>());
    if (j.contains("pairing")) spec.pairing = parse_pairing(j.at("pairing").get<std::string>());
    if (j.contains("activation")) {
      spec.activation = parse_activation(j.at("activation").get<std::string>());
    }
    read_if(j, "lambda1", spec.weights.lambda1);
    read_if(j, "lambda2", spec.weights.lambda2);
    read_if(j, "rep_hidden", spec.rep_hidden);
    read_if(j, "rep_out", spec.rep_out);
    read_if(j, "head_hidden", spec.head_hidden);
    read_if(j, "ofa_degree", spec.ofa_degree);
    read_if(j, "seed", spec.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
  return spec;
}

json scenario_to_json(const ScenarioSpec& spec) {
  const DgpConstants& c = spec.constants;
  return {
      {"kind", std::string(to_string(spec.kind))},
      {"with_iv", spec.with_iv},
      {"n_train", spec.n_train},
      {"n_test", spec.n_test},
      {"dim", spec.dim},
      {"arms", spec.arms},
      {"noise_rate", spec.noise_rate},
      {"seed", spec.seed},
      {"constants",
       {{"slope_base", c.slope_base},
        {"slope_scale", c.slope_scale},
        {"monotone_offset", c.monotone_offset},
        {"nm_quadratic", c.nm_quadratic},
        {"nm_offset", c.nm_offset},
        {"propensity_gamma", c.propensity_gamma},
        {"dirichlet_concentration", c.dirichlet_concentration}}},
  };
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec spec;
  try {
    if (j.contains("name")) spec = parse_scenario_name(j.at("name").get<std::string>());
    if (j.contains("kind")) spec.kind = parse_scenario_kind(j.at("kind").get<std::string>());
    read_if(j, "with_iv", spec.with_iv);
    read_if(j, "n_train", spec.n_train);
    read_if(j, "n_test", spec.n_test);
    read_if(j, "dim", spec.dim);
    read_if(j, "arms", spec.arms);
    read_if(j, "noise_rate", spec.noise_rate);
    read_if(j, "seed", spec.seed);
    if (j.contains("constants")) {
      const json& c = j.at("constants");
      DgpConstants& k = spec.constants;
      read_if(c, "slope_base", k.slope_base);
      read_if(c, "slope_scale", k.slope_scale);
      read_if(c, "monotone_offset", k.monotone_offset);
      read_if(c, "nm_quadratic", k.nm_quadratic);
      read_if(c, "nm_offset", k.nm_offset);
      read_if(c, "propensity_gamma", k.propensity_gamma);
      read_if(c, "dirichlet_concentration", k.dirichlet_concentration);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

json model_to_json(const UpliftModel& model) {
  json head;
  head["kind"] = std::string(to_string(model.head().kind()));
  json nets = json::array();
  switch (model.head().kind()) {
    case HeadKind::kFa:
      nets.push_back(net_to_json(static_cast<const FeatureAdaptationHead&>(model.head()).net()));
      break;
    case HeadKind::kSa:
      for (const DenseNet& b :
           static_cast<const StructureAdaptationHead&>(model.head()).branches()) {
        nets.push_back(net_to_json(b));
      }
      break;
    case HeadKind::kOfa: {
      const auto& ofa = static_cast<const OrthogonalFunctionHead&>(model.head());
      head["degree"] = ofa.degree();
      nets.push_back(net_to_json(ofa.net()));
      break;
    }
  }
  head["nets"] = std::move(nets);
  return {
      {"format", "uplift-model"},
      {"version", kModelFormatVersion},
      {"dim", model.dim()},
      {"arms", model.arms()},
      {"param_count", model.param_count()},
      {"spec", spec_to_json(model.spec())},
      {"representation", net_to_json(model.representation())},
      {"head", head},
  };
}

UpliftModel model_from_json(const json& j) {
  try {
    if (j.value("format", "") != "uplift-model") throw ParseError("not an uplift model artifact");
    if (j.value("version", 0) != kModelFormatVersion) {
      throw ParseError("unsupported model format version " +
                       std::to_string(j.value("version", 0)));
    }
    const ModelSpec spec = spec_from_json(j.at("spec"));
    const auto dim = j.at("dim").get<std::size_t>();
    const auto arms = j.at("arms").get<std::size_t>();
    DenseNet rep = net_from_json(j.at("representation"));
    const json& head = j.at("head");
    const HeadKind kind = parse_head_kind(head.at("kind").get<std::string>());
    const json& nets = head.at("nets");
    std::unique_ptr<TreatmentHead> h;
    const std::size_t head_in =
        spec.backbone == Backbone::kSlearner
            ? dim
            : (spec.backbone == Backbone::kDrcfr ? 2 * (spec.rep_out / 3) : spec.rep_out);
    switch (kind) {
      case HeadKind::kFa:
        h = std::make_unique<FeatureAdaptationHead>(head_in, arms, net_from_json(nets.at(0)));
        break;
      case HeadKind::kSa: {
        std::vector<DenseNet> branches;
        for (const json& n : nets) branches.push_back(net_from_json(n));
        h = std::make_unique<StructureAdaptationHead>(head_in, std::move(branches));
        break;
      }
      case HeadKind::kOfa:
        h = std::make_unique<OrthogonalFunctionHead>(head_in, arms, head.at("degree").get<int>(),
                                                     net_from_json(nets.at(0)));
        break;
    }
    return UpliftModel(spec, dim, arms, std::move(rep), std::move(h));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model artifact: ") + e.what());
  }
}

void save_model(const UpliftModel& model, const std::filesystem::path& path) {
  write_json_file(model_to_json(model), path);
}

UpliftModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace uplift
