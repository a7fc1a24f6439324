// CSV serialization of sample sets with a JSON sidecar.
//
// Twin-beam files carry the header `x,cos2theta,psi0,psi1`; GHZ files
// `x1,ct1,po1,pe1,x2,ct2,po2,pe2,x3,ct3,po3,pe3`. Values are written with 17
// significant digits so a round trip is lossless. The sidecar
// `<file>.meta.json` records seed, state, eta, count and the SHA-256 of the CSV.

#ifndef HMT_SAMPLE_IO_HPP
#define HMT_SAMPLE_IO_HPP

#include "hmt/states.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace hmt {

/// The file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The file exists but its contents are malformed or fail the checksum.
class CorruptFileError : public IoError {
 public:
  using IoError::IoError;
};

std::filesystem::path metadata_path(const std::filesystem::path& csv);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

void write_sample_set(const std::filesystem::path& csv, const SampleSet& set);

/// Reads a sample file and its sidecar, verifying count and checksum.
SampleSet read_sample_set(const std::filesystem::path& csv);

}  // namespace hmt

#endif  // HMT_SAMPLE_IO_HPP
