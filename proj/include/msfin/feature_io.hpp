#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "msfin/record.hpp"

namespace msfin::io {

inline constexpr std::uint32_t kDatasetVersion = 1;

// MSFD container, all integers little-endian:
//
//   "MSFD" | u32 version | u32 reserved (0)
//   record*:  u32 header_len | header JSON {id, T, N, d_in, label, t_ao, fps, split}
//             | f32[T*d_in] frame features | f32[T*N*d_in] object features
//             | u8[T*N] object mask
//   footer JSON {"format_version", "records": [{id, offset, length, split}]}
//   u64 footer_offset | u32 footer_len | "MSFD"
//
// Offsets are absolute; record blocks are contiguous from byte 12 up to the footer.

struct IndexEntry {
  std::string id;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::string split;
};

struct DatasetManifest {
  std::uint32_t format_version = kDatasetVersion;
  std::vector<IndexEntry> records;
};

nlohmann::json to_json(const DatasetManifest& m);

/// Streams records to disk one at a time; memory use is one encoded record.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::filesystem::path& path);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  /// Validates, then appends.
  void append(const SequenceRecord& record);
  /// Writes the footer. Called by the destructor if omitted (errors swallowed there).
  DatasetManifest finish();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  DatasetManifest manifest_;
  std::uint64_t position_ = 0;
  bool finished_ = false;
};

/// Random access over an MSFD file. Holds only the index in memory; each
/// instance owns its own stream, so independent readers may share a file.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.records.size(); }
  /// Decodes and validates record i.
  SequenceRecord read(std::size_t i);
  /// Looks a record up by id; throws Index when absent.
  SequenceRecord read(const std::string& id);

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  DatasetManifest manifest_;
};

DatasetManifest write_dataset(const std::vector<SequenceRecord>& records, const std::filesystem::path& path);
std::vector<SequenceRecord> read_dataset(const std::filesystem::path& path);

/// Raw blob layouts: each sequence is T x C x d_in little-endian f32 where
/// channel 0 is the frame feature and channels 1..C-1 are object slots.
struct RawLayout {
  std::size_t frames;
  std::size_t channels;
  std::size_t feature_dim;

  static RawLayout dad() { return {100, 20, 4096}; }
  static RawLayout dada() { return {150, 16, 4096}; }
  static RawLayout custom(std::size_t t, std::size_t objects, std::size_t d_in) { return {t, objects + 1, d_in}; }
  /// "dad_100x20x4096", "dada_150x16x4096".
  static RawLayout named(const std::string& name);
};

/// Sequences from a raw blob plus a JSONL sidecar with one
/// {"id", "label", "t_ao", "fps"} object per sequence. All-zero object rows are
/// marked as padding.
std::vector<SequenceRecord> import_raw_tensor(const std::filesystem::path& blob, const RawLayout& layout,
                                              const std::filesystem::path& labels_sidecar);

/// Inverse of import_raw_tensor: writes the blob and its JSONL sidecar.
void export_raw_tensor(const std::vector<SequenceRecord>& records, const std::filesystem::path& blob,
                       const std::filesystem::path& labels_sidecar);

}  // namespace msfin::io
