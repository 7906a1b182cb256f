#include "spem/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace spem {

using json = nlohmann::json;

namespace {

constexpr const char* kFormat = "spem-checkpoint";
constexpr int kVersion = 1;

json saits_json(const SaitsConfig& c) {
  return {{"seq_len", c.seq_len},
          {"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"d_ff", c.d_ff},
          {"n_dmsa_blocks", c.n_dmsa_blocks},
          {"dropout", c.dropout},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"input_fill", c.input_fill == InputFill::Pchip ? "pchip" : "zero"},
          {"artificial_mask_rate", c.artificial_mask_rate},
          {"w_reconstruction", c.w_reconstruction},
          {"w_imputation", c.w_imputation},
          {"factor", c.factor}};
}

SaitsConfig saits_from(const json& j, SaitsConfig c = {}) {
  c.seq_len = j.value("seq_len", c.seq_len);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.n_dmsa_blocks = j.value("n_dmsa_blocks", c.n_dmsa_blocks);
  c.dropout = j.value("dropout", c.dropout);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  if (j.contains("input_fill")) {
    const auto f = j.at("input_fill").get<std::string>();
    if (f != "pchip" && f != "zero") throw Error("saits config: input_fill must be zero or pchip");
    c.input_fill = f == "pchip" ? InputFill::Pchip : InputFill::Zero;
  }
  c.artificial_mask_rate = j.value("artificial_mask_rate", c.artificial_mask_rate);
  c.w_reconstruction = j.value("w_reconstruction", c.w_reconstruction);
  c.w_imputation = j.value("w_imputation", c.w_imputation);
  c.factor = j.value("factor", c.factor);
  c.validate();
  return c;
}

json rae_json(const RaeConfig& c) {
  return {{"filters", c.filters},
          {"kernel", c.kernel},
          {"stride", c.stride},
          {"padding", c.padding},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"plateau_factor", c.plateau_factor},
          {"plateau_patience", c.plateau_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"max_epochs", c.max_epochs},
          {"folds", c.folds},
          {"batch", c.batch},
          {"crop_len", c.crop_len},
          {"crops_per_sequence", c.crops_per_sequence},
          {"factor", c.factor},
          {"identity_degradation", c.identity_degradation}};
}

RaeConfig rae_from(const json& j, RaeConfig c = {}) {
  c.filters = j.value("filters", c.filters);
  c.kernel = j.value("kernel", c.kernel);
  c.stride = j.value("stride", c.stride);
  c.padding = j.value("padding", c.padding);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.folds = j.value("folds", c.folds);
  c.batch = j.value("batch", c.batch);
  c.crop_len = j.value("crop_len", c.crop_len);
  c.crops_per_sequence = j.value("crops_per_sequence", c.crops_per_sequence);
  c.factor = j.value("factor", c.factor);
  c.identity_degradation = j.value("identity_degradation", c.identity_degradation);
  c.validate();
  return c;
}

template <class Params>
json tensors(const Params& ps) {
  json out = json::object();
  for (const auto* p : ps) {
    json data = json::array();
    // Column-major, matching Eigen's storage.
    for (Eigen::Index i = 0; i < p->value.size(); ++i) data.push_back(p->value.data()[i]);
    out[p->name] = {{"shape", {p->value.rows(), p->value.cols()}}, {"data", std::move(data)}};
  }
  return out;
}

template <class Params>
void load_tensors(const json& j, Params ps, const std::filesystem::path& file) {
  for (auto* p : ps) {
    if (!j.contains(p->name))
      throw Error("checkpoint " + file.string() + ": missing tensor '" + p->name + "'");
    const auto& t = j.at(p->name);
    const auto shape = t.at("shape").template get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols())
      throw Error("checkpoint " + file.string() + ": tensor '" + p->name + "' has the wrong shape");
    const auto data = t.at("data").template get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != p->value.size())
      throw Error("checkpoint " + file.string() + ": tensor '" + p->name + "' has the wrong size");
    std::copy(data.begin(), data.end(), p->value.data());
    if (!p->value.allFinite())
      throw Error("checkpoint " + file.string() + ": tensor '" + p->name + "' is not finite");
  }
}

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open checkpoint " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("checkpoint " + file.string() + ": " + e.what());
  }
  if (j.value("format", "") != kFormat) throw Error(file.string() + " is not a spem checkpoint");
  if (j.value("version", 0) != kVersion)
    throw Error("checkpoint " + file.string() + ": unsupported version");
  return j;
}

void write_json(const std::filesystem::path& file, const json& j) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write checkpoint " + file.string());
  out << j.dump() << '\n';
}

json expect_kind(const std::filesystem::path& file, const std::string& kind) {
  json j = read_json(file);
  if (j.value("kind", "") != kind)
    throw Error("checkpoint " + file.string() + " holds a '" + j.value("kind", "") +
                "' model, expected '" + kind + "'");
  return j;
}

}  // namespace

std::string saits_config_to_json(const SaitsConfig& c) { return saits_json(c).dump(2); }
SaitsConfig saits_config_from_json(const std::string& text) {
  return saits_from(json::parse(text));
}
std::string rae_config_to_json(const RaeConfig& c) { return rae_json(c).dump(2); }
RaeConfig rae_config_from_json(const std::string& text) { return rae_from(json::parse(text)); }

std::string checkpoint_kind(const std::filesystem::path& file) {
  return read_json(file).value("kind", "");
}

void save_checkpoint(const std::filesystem::path& file, const SaitsModel& m) {
  write_json(file, {{"format", kFormat},
                    {"version", kVersion},
                    {"kind", "saits"},
                    {"config", saits_json(m.config)},
                    {"tensors", tensors(m.parameters())}});
}

void save_checkpoint(const std::filesystem::path& file, const RaeModel& m) {
  write_json(file, {{"format", kFormat},
                    {"version", kVersion},
                    {"kind", "rae"},
                    {"config", rae_json(m.config)},
                    {"tensors", tensors(m.parameters())}});
}

SaitsModel load_saits(const std::filesystem::path& file) {
  const json j = expect_kind(file, "saits");
  SaitsModel m = SaitsModel::init(saits_from(j.at("config")), 0);
  load_tensors(j.at("tensors"), m.parameters(), file);
  return m;
}

RaeModel load_rae(const std::filesystem::path& file) {
  const json j = expect_kind(file, "rae");
  RaeModel m = RaeModel::init(rae_from(j.at("config")), 0);
  load_tensors(j.at("tensors"), m.parameters(), file);
  return m;
}

}  // namespace spem
