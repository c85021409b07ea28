#include "sqseg/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sqseg {

void append_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void append_f32le(std::string& out, float v) { append_u32le(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t read_u32le(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

float read_f32le(const char* p) { return std::bit_cast<float>(read_u32le(p)); }

std::string encode_raw_tensor(const Tensor& t) {
  std::string out = "EUTN";
  out.reserve(8 + 4 * t.rank() + 4 * t.size());
  append_u32le(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) append_u32le(out, static_cast<std::uint32_t>(d));
  for (float v : t.values()) append_f32le(out, v);
  return out;
}

Tensor decode_raw_tensor(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "EUTN") != 0)
    throw TensorFormatError("raw tensor: bad magic (expected EUTN)");
  const std::uint32_t rank = read_u32le(bytes.data() + 4);
  if (rank > 8) throw TensorFormatError("raw tensor: implausible rank " + std::to_string(rank));
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) throw TensorFormatError("raw tensor: truncated header");
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = read_u32le(bytes.data() + 8 + 4 * i);
  const std::size_t n = shape_elements(shape);
  if (bytes.size() < header + 4 * n) throw TensorFormatError("raw tensor: truncated payload");
  if (bytes.size() > header + 4 * n) throw TensorFormatError("raw tensor: trailing bytes");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = read_f32le(bytes.data() + header + 4 * i);
  return Tensor(std::move(shape), std::move(data));
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_raw_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_file_bytes(path, encode_raw_tensor(t));
}

Tensor read_raw_tensor(const std::filesystem::path& path) {
  return decode_raw_tensor(read_file_bytes(path));
}

}  // namespace sqseg
