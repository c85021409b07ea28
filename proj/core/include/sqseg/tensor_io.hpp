#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "sqseg/tensor.hpp"

namespace sqseg {

class TensorFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian helpers shared by the binary containers.
void append_u32le(std::string& out, std::uint32_t v);
void append_f32le(std::string& out, float v);
std::uint32_t read_u32le(const char* p);
float read_f32le(const char* p);

/// Raw interchange format: "EUTN", u32 rank, rank x u32 dims, then the
/// float32 payload, everything little-endian.
std::string encode_raw_tensor(const Tensor& t);
Tensor decode_raw_tensor(const std::string& bytes);

void write_raw_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_raw_tensor(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sqseg
