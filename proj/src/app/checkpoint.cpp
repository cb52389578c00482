#include "ngd/app/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ngd/core/error.hpp"

namespace ngd::app {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in native little-endian order");

const nn::Tensor& Checkpoint::get(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw FormatError("checkpoint has no tensor '" + std::string(name) + "'");
}

std::string config_digest(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_name(config.dump())));
  return buf;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header{{"format", kCheckpointFormat},
                        {"version", kCheckpointVersion},
                        {"kind", ckpt.kind},
                        {"config_digest", ckpt.config_digest},
                        {"meta", ckpt.meta}};
  auto& list = header["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors)
    list.push_back({{"name", t.name}, {"shape", t.tensor.shape()}});

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << header.dump() << '\n';
  for (const auto& t : ckpt.tensors)
    out.write(reinterpret_cast<const char*>(t.tensor.data()),
              static_cast<std::streamsize>(t.tensor.size() * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::string_view> expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw FormatError("checkpoint: header is not JSON");
  }
  Checkpoint ckpt;
  try {
    if (header.at("format") != kCheckpointFormat)
      throw FormatError("checkpoint: bad format tag");
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config_digest = header.at("config_digest").get<std::string>();
    ckpt.meta = header.at("meta");
    if (expected_kind && ckpt.kind != *expected_kind)
      throw KindMismatch("checkpoint holds a " + ckpt.kind + " model, expected " +
                         std::string(*expected_kind));
    for (const auto& t : header.at("tensors")) {
      NamedTensor nt{t.at("name").get<std::string>(),
                     nn::Tensor(t.at("shape").get<nn::Shape>())};
      in.read(reinterpret_cast<char*>(nt.tensor.data()),
              static_cast<std::streamsize>(nt.tensor.size() * sizeof(double)));
      if (in.gcount() !=
          static_cast<std::streamsize>(nt.tensor.size() * sizeof(double)))
        throw FormatError("checkpoint: truncated payload at '" + nt.name + "'");
      ckpt.tensors.push_back(std::move(nt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("checkpoint: trailing bytes after payload");
  return ckpt;
}

namespace {

template <class Params>
void store(Checkpoint& ckpt, const Params& params) {
  for (const auto* p : params) ckpt.tensors.push_back({p->name, p->value});
}

void restore(const Checkpoint& ckpt, const std::vector<nn::Param*>& params) {
  if (params.size() != ckpt.tensors.size())
    throw FormatError("checkpoint: expected " + std::to_string(params.size()) +
                      " tensors, found " + std::to_string(ckpt.tensors.size()));
  for (auto* p : params) {
    const nn::Tensor& t = ckpt.get(p->name);
    if (t.shape() != p->value.shape())
      throw FormatError("checkpoint: tensor '" + p->name + "' has shape " +
                        nn::shape_string(t.shape()) + ", expected " +
                        nn::shape_string(p->value.shape()));
    p->value = t;
  }
}

}  // namespace

Checkpoint detector_checkpoint(const detector::DetectorModel& model,
                               const nlohmann::json& config) {
  Checkpoint ckpt;
  ckpt.kind = "detector";
  ckpt.config_digest = config_digest(config);
  const auto& tokens = model.vocab().tokens();
  ckpt.meta = {{"model_version", model.version},
               {"vocab", std::vector<std::string>(tokens.begin() + 2, tokens.end())},
               {"config", config}};
  store(ckpt, const_cast<detector::DetectorModel&>(model).params());
  return ckpt;
}

detector::DetectorModel detector_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "detector")
    throw KindMismatch("checkpoint holds a " + ckpt.kind + " model, expected detector");
  std::vector<std::string> vocab;
  try {
    vocab = ckpt.meta.at("vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("detector checkpoint: missing vocabulary");
  }
  detector::DetectorModel model{lang::Vocabulary(vocab)};
  restore(ckpt, model.params());
  return model;
}

Checkpoint policy_checkpoint(const policy::QNetwork& net, const nlohmann::json& config) {
  Checkpoint ckpt;
  ckpt.kind = "policy";
  ckpt.config_digest = config_digest(config);
  ckpt.meta = {{"variant", policy::variant_name(net.variant())}, {"config", config}};
  store(ckpt, net.params());
  return ckpt;
}

policy::QNetwork policy_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "policy")
    throw KindMismatch("checkpoint holds a " + ckpt.kind + " model, expected policy");
  std::string variant;
  try {
    variant = ckpt.meta.at("variant").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError("policy checkpoint: missing variant");
  }
  policy::QNetwork net(policy::variant_from_name(variant));
  restore(ckpt, net.params());
  return net;
}

}  // namespace ngd::app
