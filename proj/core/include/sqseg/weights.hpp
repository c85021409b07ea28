#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sqseg/network.hpp"
#include "sqseg/tensor.hpp"

namespace sqseg {

enum class WeightsErrorCode {
  BadMagic,
  MalformedManifest,
  ShapeMismatch,
  TruncatedBlob,
  MissingEntry,
  UnexpectedEntry,
  Io,
};

const char* to_string(WeightsErrorCode code);

class WeightsError : public std::runtime_error {
 public:
  WeightsError(WeightsErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  WeightsErrorCode code() const noexcept { return code_; }

 private:
  WeightsErrorCode code_;
};

/// Ordered named parameter store.
class Weights {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add(std::string name, Tensor tensor);
  const Tensor* find(const std::string& name) const;
  /// Throws WeightsError(MissingEntry).
  const Tensor& get(const std::string& name) const;
  Tensor& get_mutable(const std::string& name);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  friend bool operator==(const Weights& a, const Weights& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Throws WeightsError unless `weights` holds exactly the parameters of
/// `spec` with matching shapes.
void validate_weights(const NetworkSpec& spec, const Weights& weights);

inline constexpr const char* kWeightsMagic = "EUNW1";

/// Container layout: the line "EUNW1\n", a single-line UTF-8 JSON manifest
/// {magic, version, spec, entries[{name, shape, offset, bytes}], blob_bytes}
/// terminated by '\n', then the little-endian float32 blob.
void save_weights(const Weights& weights, const NetworkSpec& spec,
                  const std::filesystem::path& path);
std::string serialize_weights(const Weights& weights, const NetworkSpec& spec);

struct LoadedModel {
  NetworkSpec spec;
  Weights weights;
};

/// Parses and validates a container against the spec it echoes.
LoadedModel load_weights(const std::filesystem::path& path);
LoadedModel parse_weights(const std::string& bytes);

}  // namespace sqseg
