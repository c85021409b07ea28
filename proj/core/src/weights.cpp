#include "sqseg/weights.hpp"

#include <set>

#include "sqseg/tensor_io.hpp"

namespace sqseg {

const char* to_string(WeightsErrorCode code) {
  switch (code) {
    case WeightsErrorCode::BadMagic: return "bad_magic";
    case WeightsErrorCode::MalformedManifest: return "malformed_manifest";
    case WeightsErrorCode::ShapeMismatch: return "shape_mismatch";
    case WeightsErrorCode::TruncatedBlob: return "truncated_blob";
    case WeightsErrorCode::MissingEntry: return "missing_entry";
    case WeightsErrorCode::UnexpectedEntry: return "unexpected_entry";
    case WeightsErrorCode::Io: return "io";
  }
  return "?";
}

void Weights::add(std::string name, Tensor tensor) {
  if (index_.count(name))
    throw WeightsError(WeightsErrorCode::MalformedManifest, "duplicate weight entry '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Tensor* Weights::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second].tensor;
}

const Tensor& Weights::get(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw WeightsError(WeightsErrorCode::MissingEntry, "missing weight entry '" + name + "'");
}

Tensor& Weights::get_mutable(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw WeightsError(WeightsErrorCode::MissingEntry, "missing weight entry '" + name + "'");
  return entries_[it->second].tensor;
}

void validate_weights(const NetworkSpec& spec, const Weights& weights) {
  std::set<std::string> expected;
  for (const auto& p : enumerate_parameters(spec)) {
    expected.insert(p.name);
    const Tensor* t = weights.find(p.name);
    if (!t) throw WeightsError(WeightsErrorCode::MissingEntry, "missing weight entry '" + p.name + "'");
    if (t->shape() != p.shape)
      throw WeightsError(WeightsErrorCode::ShapeMismatch, "weight '" + p.name + "' has shape " +
                                                              shape_string(t->shape()) + ", expected " +
                                                              shape_string(p.shape));
  }
  for (const auto& e : weights.entries())
    if (!expected.count(e.name))
      throw WeightsError(WeightsErrorCode::UnexpectedEntry, "unexpected weight entry '" + e.name + "'");
}

std::string serialize_weights(const Weights& weights, const NetworkSpec& spec) {
  validate_weights(spec, weights);
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : weights.entries()) {
    const std::size_t bytes = 4 * e.tensor.size();
    entries.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  const nlohmann::json manifest{{"magic", kWeightsMagic}, {"version", 1},          {"spec", spec},
                                {"entries", entries},     {"blob_bytes", offset}};
  std::string out = std::string(kWeightsMagic) + "\n" + manifest.dump() + "\n";
  out.reserve(out.size() + offset);
  for (const auto& e : weights.entries())
    for (float v : e.tensor.values()) append_f32le(out, v);
  return out;
}

void save_weights(const Weights& weights, const NetworkSpec& spec, const std::filesystem::path& path) {
  const std::string bytes = serialize_weights(weights, spec);
  try {
    write_file_bytes(path, bytes);
  } catch (const std::runtime_error& e) {
    throw WeightsError(WeightsErrorCode::Io, e.what());
  }
}

LoadedModel parse_weights(const std::string& bytes) {
  const std::string magic_line = std::string(kWeightsMagic) + "\n";
  if (bytes.compare(0, magic_line.size(), magic_line) != 0)
    throw WeightsError(WeightsErrorCode::BadMagic, "not a weights container (bad magic)");
  const std::size_t eol = bytes.find('\n', magic_line.size());
  if (eol == std::string::npos)
    throw WeightsError(WeightsErrorCode::MalformedManifest, "manifest line is not terminated");

  LoadedModel model;
  std::vector<std::tuple<std::string, Shape, std::size_t, std::size_t>> decls;
  std::size_t blob_bytes = 0;
  try {
    const auto manifest = nlohmann::json::parse(bytes.begin() + magic_line.size(), bytes.begin() + eol);
    if (manifest.at("magic").get<std::string>() != kWeightsMagic)
      throw WeightsError(WeightsErrorCode::BadMagic, "manifest magic mismatch");
    if (manifest.at("version").get<int>() != 1)
      throw WeightsError(WeightsErrorCode::MalformedManifest, "unsupported container version");
    model.spec = manifest.at("spec").get<NetworkSpec>();
    blob_bytes = manifest.at("blob_bytes").get<std::size_t>();
    for (const auto& e : manifest.at("entries"))
      decls.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<Shape>(),
                         e.at("offset").get<std::size_t>(), e.at("bytes").get<std::size_t>());
  } catch (const WeightsError&) {
    throw;
  } catch (const std::exception& e) {
    throw WeightsError(WeightsErrorCode::MalformedManifest, std::string("malformed manifest: ") + e.what());
  }

  const std::size_t blob_start = eol + 1;
  const std::size_t available = bytes.size() - blob_start;
  if (available < blob_bytes)
    throw WeightsError(WeightsErrorCode::TruncatedBlob, "blob holds " + std::to_string(available) +
                                                            " bytes, manifest declares " +
                                                            std::to_string(blob_bytes));
  if (available > blob_bytes)
    throw WeightsError(WeightsErrorCode::MalformedManifest, "trailing bytes after blob");

  for (auto& [name, shape, offset, nbytes] : decls) {
    if (nbytes != 4 * shape_elements(shape))
      throw WeightsError(WeightsErrorCode::ShapeMismatch,
                         "entry '" + name + "' byte count disagrees with shape " + shape_string(shape));
    if (offset > blob_bytes || nbytes > blob_bytes - offset)
      throw WeightsError(WeightsErrorCode::TruncatedBlob, "entry '" + name + "' runs past the blob");
    std::vector<float> data(nbytes / 4);
    const char* p = bytes.data() + blob_start + offset;
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_f32le(p + 4 * i);
    model.weights.add(name, Tensor(std::move(shape), std::move(data)));
  }
  validate_weights(model.spec, model.weights);
  return model;
}

LoadedModel load_weights(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const std::runtime_error& e) {
    throw WeightsError(WeightsErrorCode::Io, e.what());
  }
  return parse_weights(bytes);
}

}  // namespace sqseg
