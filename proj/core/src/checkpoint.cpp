#include "vrff/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace vrff {

namespace {

using nlohmann::json;

constexpr char kSidecarMagic[8] = {'V', 'R', 'F', 'F', 'B', 'I', 'N', '1'};

[[noreturn]] void fail(const std::string& message) {
  throw std::runtime_error("checkpoint: " + message);
}

json tensor_entry(const std::string& name, const Tensor& t) {
  json entry;
  entry["name"] = name;
  entry["shape"] = t.shape();
  entry["data"] = t.raw();
  return entry;
}

void check_entry(const json& entry, size_t index, const std::string& section,
                 const std::string& expected_name, const Tensor& target) {
  std::string name = entry.at("name").get<std::string>();
  if (name != expected_name) {
    std::ostringstream msg;
    msg << section << "[" << index << "] name mismatch: file has '" << name
        << "', model expects '" << expected_name << "'";
    fail(msg.str());
  }
  std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
  if (shape != target.shape()) {
    std::ostringstream msg;
    msg << section << " '" << name << "' shape mismatch: file has ";
    for (size_t i = 0; i < shape.size(); ++i) msg << (i ? "x" : "") << shape[i];
    msg << ", model expects " << target.shape_str();
    fail(msg.str());
  }
}

void assign_from_json(const json& entry, Tensor& target) {
  std::vector<double> data = entry.at("data").get<std::vector<double>>();
  if (static_cast<int64_t>(data.size()) != target.size()) {
    fail("entry '" + entry.at("name").get<std::string>() + "' has " +
         std::to_string(data.size()) + " values, expected " +
         std::to_string(target.size()));
  }
  target.raw() = std::move(data);
}

}  // namespace

std::string checkpoint_sidecar_path(const std::string& json_path) {
  auto dot = json_path.rfind('.');
  auto slash = json_path.find_last_of("/\\");
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return json_path + ".bin";
  }
  return json_path.substr(0, dot) + ".bin";
}

void save_checkpoint(const std::string& json_path, Trainer& trainer,
                     const RunConfig& config) {
  ParamRegistry registry = registry_of(trainer.model());
  const AdamState& adam = trainer.optimizer();
  const auto& first = adam.first_moments();
  const auto& second = adam.second_moments();
  if (first.size() != registry.entries.size() || second.size() != registry.entries.size()) {
    fail("optimizer moment count does not match the parameter registry");
  }

  json root;
  root["format_version"] = kCheckpointFormatVersion;
  root["config_hash"] = config.config_hash();
  root["config"] = json::parse(config.echo_json());
  root["iteration"] = trainer.iteration();
  root["episode_counter"] = trainer.episode_counter();
  root["adam_step_count"] = adam.step_count();

  json params = json::array();
  json adam_first = json::array();
  json adam_second = json::array();
  std::vector<double> payload;
  payload.reserve(static_cast<size_t>(registry.total_size()) * 3);
  for (size_t i = 0; i < registry.entries.size(); ++i) {
    const auto& [name, tensor] = registry.entries[i];
    params.push_back(tensor_entry(name, *tensor));
    payload.insert(payload.end(), tensor->raw().begin(), tensor->raw().end());
  }
  for (size_t i = 0; i < registry.entries.size(); ++i) {
    adam_first.push_back(tensor_entry(registry.entries[i].first, first[i]));
    payload.insert(payload.end(), first[i].raw().begin(), first[i].raw().end());
  }
  for (size_t i = 0; i < registry.entries.size(); ++i) {
    adam_second.push_back(tensor_entry(registry.entries[i].first, second[i]));
    payload.insert(payload.end(), second[i].raw().begin(), second[i].raw().end());
  }
  root["parameters"] = std::move(params);
  root["adam_first"] = std::move(adam_first);
  root["adam_second"] = std::move(adam_second);

  // Recurrent state resets at iteration boundaries, where checkpoints are
  // taken; stored explicitly so the format says so rather than implying it.
  int64_t hidden = trainer.config().mode == RecurrentMode::no_lstm
                       ? 0
                       : trainer.config().hidden_width;
  root["recurrent_state"] = {
      {"hidden", std::vector<double>(static_cast<size_t>(hidden), 0.0)},
      {"cell", std::vector<double>(static_cast<size_t>(hidden), 0.0)},
  };

  {
    std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write '" + json_path + "'");
    out << root.dump(1) << "\n";
    if (!out) fail("short write on '" + json_path + "'");
  }
  {
    std::string side = checkpoint_sidecar_path(json_path);
    std::ofstream out(side, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write '" + side + "'");
    out.write(kSidecarMagic, sizeof(kSidecarMagic));
    uint64_t count = payload.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) fail("short write on '" + side + "'");
  }
}

void load_checkpoint(const std::string& json_path, Trainer& trainer,
                     const std::string& expected_config_hash) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) fail("cannot open '" + json_path + "'");
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& err) {
    fail("'" + json_path + "' is not valid JSON: " + err.what());
  }

  int version = root.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    fail("format version " + std::to_string(version) + " unsupported (expected " +
         std::to_string(kCheckpointFormatVersion) + ")");
  }
  std::string file_hash = root.at("config_hash").get<std::string>();
  if (!expected_config_hash.empty() && file_hash != expected_config_hash) {
    fail("config hash mismatch: file has " + file_hash + ", current config hashes to " +
         expected_config_hash);
  }

  ParamRegistry registry = registry_of(trainer.model());
  const json& params = root.at("parameters");
  const json& adam_first = root.at("adam_first");
  const json& adam_second = root.at("adam_second");
  if (params.size() != registry.entries.size()) {
    std::ostringstream msg;
    msg << "file has " << params.size() << " parameter arrays, model expects "
        << registry.entries.size() << " (mode " << to_string(trainer.config().mode) << ")";
    fail(msg.str());
  }
  if (adam_first.size() != registry.entries.size() ||
      adam_second.size() != registry.entries.size()) {
    fail("optimizer moment counts do not match the parameter count");
  }

  for (size_t i = 0; i < registry.entries.size(); ++i) {
    check_entry(params.at(i), i, "parameters", registry.entries[i].first,
                *registry.entries[i].second);
    check_entry(adam_first.at(i), i, "adam_first", registry.entries[i].first,
                *registry.entries[i].second);
    check_entry(adam_second.at(i), i, "adam_second", registry.entries[i].first,
                *registry.entries[i].second);
  }

  std::vector<Tensor> first(registry.entries.size());
  std::vector<Tensor> second(registry.entries.size());

  std::string side = checkpoint_sidecar_path(json_path);
  std::ifstream bin(side, std::ios::binary);
  if (bin) {
    char magic[8];
    bin.read(magic, sizeof(magic));
    if (!bin || std::memcmp(magic, kSidecarMagic, sizeof(magic)) != 0) {
      fail("sidecar '" + side + "' has the wrong magic");
    }
    uint64_t count = 0;
    bin.read(reinterpret_cast<char*>(&count), sizeof(count));
    uint64_t expected = static_cast<uint64_t>(registry.total_size()) * 3;
    if (!bin || count != expected) {
      fail("sidecar '" + side + "' holds " + std::to_string(count) +
           " values, expected " + std::to_string(expected));
    }
    std::vector<double> payload(count);
    bin.read(reinterpret_cast<char*>(payload.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!bin) fail("sidecar '" + side + "' truncated");
    size_t cursor = 0;
    auto take = [&](Tensor& target, const std::vector<int64_t>& shape) {
      Tensor t(shape);
      std::copy(payload.begin() + static_cast<std::ptrdiff_t>(cursor),
                payload.begin() + static_cast<std::ptrdiff_t>(cursor + t.raw().size()),
                t.raw().begin());
      cursor += t.raw().size();
      target = std::move(t);
    };
    for (size_t i = 0; i < registry.entries.size(); ++i) {
      take(*registry.entries[i].second, registry.entries[i].second->shape());
    }
    for (size_t i = 0; i < registry.entries.size(); ++i) {
      take(first[i], registry.entries[i].second->shape());
    }
    for (size_t i = 0; i < registry.entries.size(); ++i) {
      take(second[i], registry.entries[i].second->shape());
    }
  } else {
    for (size_t i = 0; i < registry.entries.size(); ++i) {
      assign_from_json(params.at(i), *registry.entries[i].second);
      first[i] = Tensor(registry.entries[i].second->shape());
      assign_from_json(adam_first.at(i), first[i]);
      second[i] = Tensor(registry.entries[i].second->shape());
      assign_from_json(adam_second.at(i), second[i]);
    }
  }

  trainer.optimizer().restore(std::move(first), std::move(second),
                              root.at("adam_step_count").get<int64_t>());
  trainer.restore_counters(root.at("iteration").get<int64_t>(),
                           root.at("episode_counter").get<uint64_t>());
}

}  // namespace vrff
