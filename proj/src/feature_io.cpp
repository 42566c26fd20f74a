#include "msfin/feature_io.hpp"

#include <cstring>
#include <sstream>

#include "binary_io.hpp"
#include "msfin/errors.hpp"

namespace msfin::io {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'F', 'D'};
constexpr std::uint64_t kPreambleBytes = 12;
constexpr std::uint64_t kTrailerBytes = 16;

std::string encode_header(const SequenceRecord& r) {
  nlohmann::json h = {{"id", r.id},
                      {"T", r.frames},
                      {"N", r.objects},
                      {"d_in", r.feature_dim},
                      {"label", r.label},
                      {"t_ao", r.t_ao ? nlohmann::json(*r.t_ao) : nlohmann::json(nullptr)},
                      {"fps", r.fps},
                      {"split", r.split}};
  return h.dump();
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& what) {
  fail(ErrorKind::ShapeInconsistency, "dataset " + path.string() + ": " + what);
}

}  // namespace

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& e : m.records) {
    recs.push_back({{"id", e.id}, {"offset", e.offset}, {"length", e.length}, {"split", e.split}});
  }
  return {{"format_version", m.format_version}, {"records", recs}};
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) fail(ErrorKind::Io, "cannot write dataset " + path.string());
  out_.write(kMagic, 4);
  binio::put(out_, kDatasetVersion);
  binio::put(out_, std::uint32_t{0});
  position_ = kPreambleBytes;
}

DatasetWriter::~DatasetWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void DatasetWriter::append(const SequenceRecord& r) {
  if (finished_) fail(ErrorKind::Contract, "dataset writer already finished");
  r.validate();
  const std::string header = encode_header(r);
  binio::put(out_, static_cast<std::uint32_t>(header.size()));
  binio::put_bytes(out_, header);
  for (float v : r.frame_features) binio::put_f32(out_, v);
  for (float v : r.object_features) binio::put_f32(out_, v);
  out_.write(reinterpret_cast<const char*>(r.object_mask.data()),
             static_cast<std::streamsize>(r.object_mask.size()));
  if (!out_) fail(ErrorKind::Io, "write failed for dataset " + path_.string());
  const std::uint64_t length = 4 + header.size() + 4 * (r.frame_features.size() + r.object_features.size()) +
                               r.object_mask.size();
  manifest_.records.push_back({r.id, position_, length, r.split});
  position_ += length;
}

DatasetManifest DatasetWriter::finish() {
  if (finished_) return manifest_;
  finished_ = true;
  const std::string footer = to_json(manifest_).dump();
  binio::put_bytes(out_, footer);
  binio::put(out_, position_);
  binio::put(out_, static_cast<std::uint32_t>(footer.size()));
  out_.write(kMagic, 4);
  out_.close();
  if (!out_) fail(ErrorKind::Io, "write failed for dataset " + path_.string());
  return manifest_;
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) fail(ErrorKind::Io, "cannot open dataset " + path.string());
  char magic[4] = {};
  if (!in_.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorKind::BadMagic, "dataset " + path.string() + " does not start with MSFD");
  }
  std::uint32_t version = 0, reserved = 0;
  if (!binio::get(in_, version) || !binio::get(in_, reserved)) malformed(path, "truncated preamble");
  if (version != kDatasetVersion) {
    fail(ErrorKind::FormatVersion, "dataset " + path.string() + " has format version " + std::to_string(version) +
                                       ", expected " + std::to_string(kDatasetVersion));
  }
  in_.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in_.tellg());
  if (file_size < kPreambleBytes + kTrailerBytes) malformed(path, "missing index footer");
  in_.seekg(static_cast<std::streamoff>(file_size - kTrailerBytes));
  std::uint64_t footer_offset = 0;
  std::uint32_t footer_len = 0;
  if (!binio::get(in_, footer_offset) || !binio::get(in_, footer_len) || !in_.read(magic, 4) ||
      std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorKind::BadMagic, "dataset " + path.string() + " lacks the closing MSFD trailer");
  }
  if (footer_offset < kPreambleBytes || footer_offset + footer_len + kTrailerBytes != file_size) {
    malformed(path, "index footer does not match file size");
  }
  in_.seekg(static_cast<std::streamoff>(footer_offset));
  std::string text;
  if (!binio::get_bytes(in_, text, footer_len)) malformed(path, "truncated index footer");
  try {
    const auto j = nlohmann::json::parse(text);
    manifest_.format_version = j.at("format_version").get<std::uint32_t>();
    for (const auto& e : j.at("records")) {
      manifest_.records.push_back({e.at("id").get<std::string>(), e.at("offset").get<std::uint64_t>(),
                                   e.at("length").get<std::uint64_t>(), e.value("split", std::string())});
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(path, std::string("index footer is not valid: ") + e.what());
  }
  if (manifest_.format_version != version) malformed(path, "footer and preamble disagree on version");
  // The index must tile [12, footer_offset) exactly.
  std::uint64_t expect = kPreambleBytes;
  for (const auto& e : manifest_.records) {
    if (e.offset != expect || e.length == 0) malformed(path, "index entry for '" + e.id + "' is not contiguous");
    expect += e.length;
  }
  if (expect != footer_offset) malformed(path, "index does not cover the record area");
}

SequenceRecord DatasetReader::read(std::size_t i) {
  if (i >= manifest_.records.size()) fail(ErrorKind::Index, "record index out of range");
  const IndexEntry& e = manifest_.records[i];
  const std::string who = "dataset " + path_.string() + ", record '" + e.id + "': ";
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(e.offset));
  std::uint32_t header_len = 0;
  std::string text;
  if (!binio::get(in_, header_len) || header_len > e.length || !binio::get_bytes(in_, text, header_len)) {
    fail(ErrorKind::ShapeInconsistency, who + "truncated header");
  }
  SequenceRecord r;
  try {
    const auto h = nlohmann::json::parse(text);
    r.id = h.at("id").get<std::string>();
    r.frames = h.at("T").get<std::size_t>();
    r.objects = h.at("N").get<std::size_t>();
    r.feature_dim = h.at("d_in").get<std::size_t>();
    r.label = h.at("label").get<int>();
    if (!h.at("t_ao").is_null()) r.t_ao = h.at("t_ao").get<int>();
    r.fps = h.at("fps").get<int>();
    r.split = h.value("split", std::string());
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::ShapeInconsistency, who + "malformed header: " + ex.what());
  }
  if (r.id != e.id) fail(ErrorKind::ShapeInconsistency, who + "header id '" + r.id + "' disagrees with index");
  const std::uint64_t payload = 4ULL * (r.frames * r.feature_dim + r.frames * r.objects * r.feature_dim) +
                                r.frames * r.objects;
  if (4 + header_len + payload != e.length) {
    fail(ErrorKind::ShapeInconsistency, who + "declared shape does not match stored length");
  }
  r.frame_features.resize(r.frames * r.feature_dim);
  r.object_features.resize(r.frames * r.objects * r.feature_dim);
  r.object_mask.resize(r.frames * r.objects);
  for (auto& v : r.frame_features) {
    if (!binio::get_f32(in_, v)) fail(ErrorKind::ShapeInconsistency, who + "truncated frame features");
  }
  for (auto& v : r.object_features) {
    if (!binio::get_f32(in_, v)) fail(ErrorKind::ShapeInconsistency, who + "truncated object features");
  }
  if (!in_.read(reinterpret_cast<char*>(r.object_mask.data()), static_cast<std::streamsize>(r.object_mask.size()))) {
    fail(ErrorKind::ShapeInconsistency, who + "truncated object mask");
  }
  for (auto m : r.object_mask) {
    if (m > 1) fail(ErrorKind::ShapeInconsistency, who + "mask byte outside {0, 1}");
  }
  r.validate();
  return r;
}

SequenceRecord DatasetReader::read(const std::string& id) {
  for (std::size_t i = 0; i < manifest_.records.size(); ++i) {
    if (manifest_.records[i].id == id) return read(i);
  }
  fail(ErrorKind::Index, "dataset " + path_.string() + " has no record '" + id + "'");
}

DatasetManifest write_dataset(const std::vector<SequenceRecord>& records, const std::filesystem::path& path) {
  DatasetWriter w(path);
  for (const auto& r : records) w.append(r);
  return w.finish();
}

std::vector<SequenceRecord> read_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  std::vector<SequenceRecord> out;
  out.reserve(reader.size());
  for (std::size_t i = 0; i < reader.size(); ++i) out.push_back(reader.read(i));
  return out;
}

RawLayout RawLayout::named(const std::string& name) {
  if (name == "dad" || name == "dad_100x20x4096") return dad();
  if (name == "dada" || name == "dada_150x16x4096") return dada();
  fail(ErrorKind::Config, "unknown raw layout '" + name + "'");
}

std::vector<SequenceRecord> import_raw_tensor(const std::filesystem::path& blob, const RawLayout& layout,
                                              const std::filesystem::path& labels_sidecar) {
  if (layout.frames == 0 || layout.channels < 2 || layout.feature_dim == 0) {
    fail(ErrorKind::Import, "raw layout needs T >= 1, at least 2 channels and d_in >= 1");
  }
  std::ifstream in(blob, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open raw tensor " + blob.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  const std::uint64_t per_sequence = 4ULL * layout.frames * layout.channels * layout.feature_dim;
  if (size % per_sequence != 0) {
    fail(ErrorKind::Import, "raw tensor " + blob.string() + " holds " + std::to_string(size) +
                                " bytes, not a multiple of " + std::to_string(per_sequence) + " (T x C x d_in x 4)");
  }
  const std::size_t count = size / per_sequence;

  std::ifstream side(labels_sidecar);
  if (!side) fail(ErrorKind::Io, "cannot open labels sidecar " + labels_sidecar.string());
  std::vector<nlohmann::json> labels;
  std::string line;
  while (std::getline(side, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      labels.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::Import, "labels sidecar line " + std::to_string(labels.size() + 1) + " is not JSON");
    }
  }
  if (labels.size() != count) {
    fail(ErrorKind::Import, "labels sidecar has " + std::to_string(labels.size()) + " entries for " +
                                std::to_string(count) + " sequences");
  }

  const std::size_t steps = layout.frames, n = layout.channels - 1, din = layout.feature_dim;
  std::vector<SequenceRecord> out;
  out.reserve(count);
  std::vector<float> row(din);
  for (std::size_t s = 0; s < count; ++s) {
    SequenceRecord r;
    try {
      const auto& j = labels[s];
      r.id = j.at("id").get<std::string>();
      r.label = j.at("label").get<int>();
      if (j.contains("t_ao") && !j.at("t_ao").is_null()) r.t_ao = j.at("t_ao").get<int>();
      r.fps = j.at("fps").get<int>();
      r.split = j.value("split", std::string());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Import, "labels sidecar entry " + std::to_string(s + 1) + ": " + e.what());
    }
    r.frames = steps;
    r.objects = n;
    r.feature_dim = din;
    r.frame_features.resize(steps * din);
    r.object_features.resize(steps * n * din);
    r.object_mask.assign(steps * n, 0);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t ch = 0; ch < layout.channels; ++ch) {
        for (auto& v : row) {
          if (!binio::get_f32(in, v)) fail(ErrorKind::Import, "short read in " + blob.string());
        }
        if (ch == 0) {
          std::copy(row.begin(), row.end(), r.frame_features.begin() + static_cast<std::ptrdiff_t>(t * din));
          continue;
        }
        bool any = false;
        for (float v : row) any = any || v != 0.0f;
        r.object_mask[t * n + (ch - 1)] = any ? 1 : 0;
        // -0.0 rows are padding too; store them as +0 so padding stays zero-filled.
        if (any) {
          std::copy(row.begin(), row.end(),
                    r.object_features.begin() + static_cast<std::ptrdiff_t>((t * n + ch - 1) * din));
        }
      }
    }
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

void export_raw_tensor(const std::vector<SequenceRecord>& records, const std::filesystem::path& blob,
                       const std::filesystem::path& labels_sidecar) {
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  std::ofstream side(labels_sidecar, std::ios::trunc);
  if (!out || !side) fail(ErrorKind::Io, "cannot write raw export " + blob.string());
  for (const auto& r : records) {
    if (!records.empty() && (r.frames != records[0].frames || r.objects != records[0].objects ||
                             r.feature_dim != records[0].feature_dim)) {
      fail(ErrorKind::ShapeInconsistency, "record '" + r.id + "' does not share the blob layout");
    }
    for (std::size_t t = 0; t < r.frames; ++t) {
      for (std::size_t c = 0; c < r.feature_dim; ++c) binio::put_f32(out, r.frame_at(t, c));
      for (std::size_t k = 0; k < r.objects; ++k) {
        for (std::size_t c = 0; c < r.feature_dim; ++c) binio::put_f32(out, r.valid(t, k) ? r.object_at(t, k, c) : 0.0f);
      }
    }
    nlohmann::json j = {{"id", r.id},
                        {"label", r.label},
                        {"t_ao", r.t_ao ? nlohmann::json(*r.t_ao) : nlohmann::json(nullptr)},
                        {"fps", r.fps}};
    if (!r.split.empty()) j["split"] = r.split;
    side << j.dump() << '\n';
  }
  if (!out || !side) fail(ErrorKind::Io, "write failed for raw export " + blob.string());
}

}  // namespace msfin::io
