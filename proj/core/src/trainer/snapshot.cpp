#include "slmgac/trainer/snapshot.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "slmgac/errors.hpp"
#include "slmgac/trainer/model.hpp"

namespace slmgac::trainer {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'M', 'G', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
  return h;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_blob(std::string& out, const std::string& blob) {
  put_u64(out, blob.size());
  out += blob;
}

struct Reader {
  const std::string& s;
  std::size_t pos = 0;

  std::uint64_t u64() {
    if (pos + 8 > s.size()) throw DataError("snapshot: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string blob() {
    const auto n = u64();
    if (pos + n > s.size()) throw DataError("snapshot: truncated file");
    std::string b = s.substr(pos, n);
    pos += n;
    return b;
  }
};

ModelConfig parse_config(const std::string& json_text) {
  try {
    return nlohmann::json::parse(json_text).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("snapshot: bad model config: ") + e.what());
  }
}

}  // namespace

std::uint64_t PolicySnapshot::compute_digest() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = mix(h, version);
  h = mix(h, config_digest);
  h = mix(h, encoder.digest());
  h = mix(h, actor.digest());
  return h;
}

PolicySnapshot make_snapshot(Model& model, std::uint64_t version) {
  PolicySnapshot s;
  s.version = version;
  s.encoder = diffcore::ParamSet::capture(model.encoder_params());
  s.actor = diffcore::ParamSet::capture(model.actor_params());
  s.model_config = nlohmann::json(model.config()).dump();
  s.config_digest = config_digest(model.config());
  s.payload_digest = s.compute_digest();
  return s;
}

void save_snapshot(const PolicySnapshot& snapshot, const std::string& path) {
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, kFormatVersion);
  put_u64(out, snapshot.version);
  put_u64(out, snapshot.config_digest);
  put_u64(out, snapshot.payload_digest);
  put_blob(out, snapshot.model_config);
  put_blob(out, snapshot.encoder.to_bytes());
  put_blob(out, snapshot.actor.to_bytes());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("snapshot: cannot open " + path + " for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("snapshot: write failed for " + path);
}

PolicySnapshot load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("snapshot: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string data = buf.str();
  if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("snapshot: " + path + " is not a policy snapshot");
  }
  Reader r{data, sizeof(kMagic)};
  if (r.u64() != kFormatVersion) throw DataError("snapshot: unsupported format version");
  PolicySnapshot s;
  s.version = r.u64();
  s.config_digest = r.u64();
  s.payload_digest = r.u64();
  s.model_config = r.blob();
  s.encoder = diffcore::ParamSet::from_bytes(r.blob());
  s.actor = diffcore::ParamSet::from_bytes(r.blob());
  if (!s.consistent()) throw DataError("snapshot: digest mismatch in " + path);
  if (config_digest(parse_config(s.model_config)) != s.config_digest) {
    throw DataError("snapshot: config digest mismatch in " + path);
  }
  return s;
}

std::shared_ptr<const PolicySnapshot> SnapshotChannel::publish(PolicySnapshot snapshot) {
  std::lock_guard lock(mutex_);
  snapshot.version = next_version_++;
  snapshot.payload_digest = snapshot.compute_digest();
  current_ = std::make_shared<const PolicySnapshot>(std::move(snapshot));
  return current_;
}

std::shared_ptr<const PolicySnapshot> SnapshotChannel::latest() const {
  std::lock_guard lock(mutex_);
  return current_;
}

std::uint64_t SnapshotChannel::version() const {
  std::lock_guard lock(mutex_);
  return current_ ? current_->version : 0;
}

SnapshotPolicy::SnapshotPolicy(const PolicySnapshot& snapshot)
    : config_(parse_config(snapshot.model_config)) {
  config_.validate();
  Rng rng = make_rng(0);
  encoder_ = encoder::Encoder(config_.encoder, rng);
  actor_ = actor::Actor(static_cast<std::size_t>(config_.K), config_.encoder.output_dim(),
                        config_.towers.actor, config_.layer_norm, rng);
  version_ = 0;
  if (!refresh(snapshot)) throw ContractError("snapshot policy: version 0 cannot be loaded");
}

bool SnapshotPolicy::refresh(const PolicySnapshot& snapshot) {
  if (snapshot.version <= version_ && version_ != 0) return false;
  if (snapshot.version == 0) return false;
  if (snapshot.config_digest != config_digest(config_)) {
    throw ContractError("snapshot policy: snapshot belongs to a different architecture");
  }
  diffcore::ParamRefs enc, act;
  encoder_.collect("encoder", enc);
  actor_.collect("actor", act);
  snapshot.encoder.restore(enc);
  snapshot.actor.restore(act);
  version_ = snapshot.version;
  return true;
}

std::vector<double> SnapshotPolicy::inject_probabilities(const encoder::StateBatch& states,
                                                         const std::vector<int>& groups) const {
  return trainer::inject_probabilities(encoder_, actor_, states, groups);
}

actor::PolicyOutput SnapshotPolicy::act(const encoder::StateFeatures& state, int group,
                                        double epsilon, Rng& rng) const {
  const auto h = encoder_.encode(state, encoder::GradMode::actor_path).h_prime_s;
  return actor::select_action(actor_.policy_forward(h, group), epsilon, rng);
}

}  // namespace slmgac::trainer
