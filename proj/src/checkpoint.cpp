#include "ahrl/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ahrl/errors.hpp"

namespace ahrl {

namespace {

using Json = nlohmann::ordered_json;

Json matrix_json(const Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data().begin(), m.data().end());
  return j;
}

Matrix matrix_from(const Json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.size()) throw ShapeError("checkpoint: matrix data does not match its shape");
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

Json config_json(const TrainConfig& c) {
  Json j;
  j["actor_lr"] = c.actor_lr;
  j["critic_lr"] = c.critic_lr;
  j["tau"] = c.tau;
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["batch_size"] = c.batch_size;
  j["episodes"] = c.episodes;
  j["updates_per_episode"] = c.updates_per_episode;
  j["eval_interval"] = c.eval_interval;
  j["replay_capacity"] = c.replay_capacity;
  j["noise_scale"] = c.noise_scale;
  j["noise_floor"] = c.noise_floor;
  j["actor_hidden"] = c.actor_hidden;
  j["critic_core_hidden"] = c.critic_core_hidden;
  j["critic_hidden"] = c.critic_hidden;
  j["update_rule"] = c.update_rule == UpdateRule::adam ? "adam" : "plain";
  j["seed"] = c.seed;
  return j;
}

TrainConfig config_from(const Json& j) {
  TrainConfig c;
  c.actor_lr = j.at("actor_lr").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.tau = j.at("tau").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.episodes = j.at("episodes").get<std::size_t>();
  c.updates_per_episode = j.at("updates_per_episode").get<std::size_t>();
  c.eval_interval = j.value("eval_interval", std::size_t{0});
  c.replay_capacity = j.at("replay_capacity").get<std::size_t>();
  c.noise_scale = j.at("noise_scale").get<double>();
  c.noise_floor = j.at("noise_floor").get<double>();
  c.actor_hidden = j.at("actor_hidden").get<std::size_t>();
  c.critic_core_hidden = j.at("critic_core_hidden").get<std::size_t>();
  c.critic_hidden = j.at("critic_hidden").get<std::size_t>();
  const auto rule = j.at("update_rule").get<std::string>();
  if (rule != "adam" && rule != "plain") throw ContractError("checkpoint: unknown update rule '" + rule + "'");
  c.update_rule = rule == "adam" ? UpdateRule::adam : UpdateRule::plain;
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& c) {
  Json j;
  j["format"] = "ahrl-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = c.kind;
  j["label"] = c.label;
  j["prior"] = c.prior.weights();
  j["behavior"] = c.behavior;
  j["train_config"] = config_json(c.config);
  Json core;
  core["input_weights"] = matrix_json(c.actor.core().input_weights);
  core["recurrent_weights"] = matrix_json(c.actor.core().recurrent_weights);
  core["bias"] = c.actor.core().bias;
  Json head;
  head["weights"] = matrix_json(c.actor.head().weights);
  head["bias"] = c.actor.head().bias;
  head["activation"] = to_string(c.actor.head().activation);
  j["actor"] = {{"core", core}, {"head", head}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    if (j.at("format").get<std::string>() != "ahrl-checkpoint") throw ContractError("not a checkpoint file");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) throw ContractError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    c.label = j.at("label").get<std::string>();
    c.prior = AffinityPrior(j.at("prior").get<std::array<double, 5>>());
    c.behavior = j.at("behavior").get<Vector>();
    c.config = config_from(j.at("train_config"));
    const Json& core = j.at("actor").at("core");
    const Json& head = j.at("actor").at("head");
    RnnCell cell;
    cell.input_weights = matrix_from(core.at("input_weights"));
    cell.recurrent_weights = matrix_from(core.at("recurrent_weights"));
    cell.bias = core.at("bias").get<Vector>();
    if (cell.recurrent_weights.cols() != cell.hidden_size() || cell.input_weights.rows() != cell.hidden_size() ||
        cell.bias.size() != cell.hidden_size()) {
      throw ShapeError("checkpoint: inconsistent recurrent core shapes");
    }
    DenseLayer out;
    out.weights = matrix_from(head.at("weights"));
    out.bias = head.at("bias").get<Vector>();
    out.activation = activation_from_string(head.at("activation").get<std::string>());
    if (out.bias.size() != out.out_size()) throw ShapeError("checkpoint: inconsistent head shapes");
    c.actor = ActorNetwork(std::move(cell), std::move(out));
    if (!all_finite(c.actor.core().input_weights.data()) || !all_finite(c.actor.head().weights.data())) {
      throw NumericError("checkpoint: non-finite parameters");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_string(c);
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return checkpoint_from_string(ss.str());
  } catch (const ContractError& e) {
    throw ContractError(path + ": " + e.what());
  }
}

}  // namespace ahrl
