#include "msfin/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "msfin/errors.hpp"

namespace msfin {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'F', 'N'};
constexpr std::uint8_t kDtypeF64 = 2;
constexpr std::uint32_t kMaxRank = 8;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<Scalar> values;
};

struct StoredCheckpoint {
  nlohmann::json header;
  std::vector<StoredTensor> tensors;
};

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  fail(ErrorKind::CheckpointCorrupt, "checkpoint " + path.string() + ": " + what);
}

StoredCheckpoint read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) corrupt(path, "bad magic");
  std::uint32_t version = 0;
  if (!binio::get(in, version)) corrupt(path, "truncated header");
  if (version != kCheckpointVersion) {
    fail(ErrorKind::CheckpointVersion, "checkpoint " + path.string() + " has version " +
                                           std::to_string(version) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  }
  StoredCheckpoint ck;
  std::uint32_t json_len = 0;
  std::string text;
  if (!binio::get(in, json_len) || !binio::get_bytes(in, text, json_len)) {
    corrupt(path, "truncated config header");
  }
  try {
    ck.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    corrupt(path, "config header is not valid JSON");
  }
  std::uint32_t count = 0;
  if (!binio::get(in, count)) corrupt(path, "truncated tensor table");
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    std::uint32_t name_len = 0, rank = 0;
    std::uint8_t dtype = 0;
    if (!binio::get(in, name_len) || name_len > 4096 || !binio::get_bytes(in, t.name, name_len) ||
        !binio::get(in, dtype) || !binio::get(in, rank)) {
      corrupt(path, "truncated tensor header");
    }
    if (dtype != kDtypeF64) corrupt(path, "unsupported dtype tag for tensor " + t.name);
    if (rank == 0 || rank > kMaxRank) corrupt(path, "invalid rank for tensor " + t.name);
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint64_t e = 0;
      if (!binio::get(in, e) || e == 0 || e > (1ULL << 32)) corrupt(path, "invalid extents for tensor " + t.name);
      t.shape.push_back(static_cast<std::size_t>(e));
    }
    t.values.resize(shape_numel(t.shape));
    for (auto& v : t.values) {
      if (!binio::get_f64(in, v)) corrupt(path, "truncated values for tensor " + t.name);
    }
    ck.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) corrupt(path, "trailing bytes after tensor table");
  return ck;
}

void copy_into(model::MsFIN& net, const StoredCheckpoint& ck, const std::filesystem::path& path) {
  auto& entries = net.params().entries();
  if (entries.size() != ck.tensors.size()) {
    fail(ErrorKind::CheckpointDimension,
         "checkpoint " + path.string() + " holds " + std::to_string(ck.tensors.size()) +
             " tensors, model has " + std::to_string(entries.size()));
  }
  // Validate everything before touching the model.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& stored = ck.tensors[i];
    if (stored.name != entries[i].name) {
      fail(ErrorKind::CheckpointDimension, "checkpoint tensor #" + std::to_string(i) + " is '" +
                                               stored.name + "', model expects '" + entries[i].name + "'");
    }
    if (stored.shape != entries[i].tensor.shape()) {
      fail(ErrorKind::CheckpointDimension, "tensor '" + stored.name + "' has shape " +
                                               shape_str(stored.shape) + " in checkpoint, model expects " +
                                               shape_str(entries[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto dst = entries[i].tensor.mutable_data();
    std::copy(ck.tensors[i].values.begin(), ck.tensors[i].values.end(), dst.begin());
  }
}

}  // namespace

void save_checkpoint(const model::MsFIN& net, const std::filesystem::path& path,
                     const nlohmann::json& meta) {
  std::ostringstream buf(std::ios::binary);
  buf.write(kMagic, 4);
  binio::put(buf, kCheckpointVersion);
  const std::string header = nlohmann::json{{"model", model::to_json(net.config())}, {"meta", meta}}.dump();
  binio::put(buf, static_cast<std::uint32_t>(header.size()));
  binio::put_bytes(buf, header);
  const auto& entries = net.params().entries();
  binio::put(buf, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    binio::put(buf, static_cast<std::uint32_t>(e.name.size()));
    binio::put_bytes(buf, e.name);
    binio::put(buf, kDtypeF64);
    binio::put(buf, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto extent : e.tensor.shape()) binio::put(buf, static_cast<std::uint64_t>(extent));
    for (auto v : e.tensor.data()) binio::put_f64(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
  const std::string bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for checkpoint " + path.string());
}

model::MsFIN load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  const StoredCheckpoint ck = read_all(path);
  if (!ck.header.is_object() || !ck.header.contains("model")) corrupt(path, "header lacks model config");
  model::MsFIN net(model::config_from_json(ck.header.at("model")));
  copy_into(net, ck, path);
  if (meta) *meta = ck.header.value("meta", nlohmann::json::object());
  return net;
}

void load_checkpoint_into(model::MsFIN& net, const std::filesystem::path& path) {
  copy_into(net, read_all(path), path);
}

}  // namespace msfin
