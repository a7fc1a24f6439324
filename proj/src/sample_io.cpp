#include "hmt/sample_io.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include "json.hpp"
#include <array>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <string_view>

namespace hmt {

namespace {

constexpr std::string_view kTwinHeader = "x,cos2theta,psi0,psi1";
constexpr std::string_view kGhzHeader = "x1,ct1,po1,pe1,x2,ct2,po2,pe2,x3,ct3,po3,pe3";
constexpr int kFormatVersion = 1;

void append_record(fmt::memory_buffer& out, const TwoModeRecord& r) {
  fmt::format_to(std::back_inserter(out), "{:.17g},{:.17g},{:.17g},{:.17g}", r.x, r.cos2theta,
                 r.psi0, r.psi1);
}

template <std::size_t N>
std::array<double, N> parse_row(std::string_view line, std::size_t line_number) {
  std::array<double, N> values{};
  const char* p = line.data();
  const char* end = line.data() + line.size();
  for (std::size_t k = 0; k < N; ++k) {
    auto [next, ec] = std::from_chars(p, end, values[k]);
    if (ec != std::errc{}) {
      throw CorruptFileError(fmt::format("line {}: malformed number", line_number));
    }
    p = next;
    if (k + 1 < N) {
      if (p == end || *p != ',') {
        throw CorruptFileError(fmt::format("line {}: expected {} fields", line_number, N));
      }
      ++p;
    }
  }
  if (p != end) throw CorruptFileError(fmt::format("line {}: trailing data", line_number));
  return values;
}

TwoModeRecord record_from(const double* v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace

std::filesystem::path metadata_path(const std::filesystem::path& csv) {
  auto p = csv;
  p += ".meta.json";
  return p;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buffer;
  while (in) {
    in.read(buffer.data(), buffer.size());
    EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &length);
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void write_sample_set(const std::filesystem::path& csv, const SampleSet& set) {
  {
    std::ofstream out(csv, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + csv.string());
    fmt::memory_buffer buffer;
    const bool twin = set.kind() == SampleKind::TwinBeam;
    fmt::format_to(std::back_inserter(buffer), "{}\n", twin ? kTwinHeader : kGhzHeader);
    auto flush = [&] {
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    };
    if (twin) {
      for (const auto& r : set.twin_records()) {
        append_record(buffer, r);
        buffer.push_back('\n');
        if (buffer.size() > (1 << 20)) flush();
      }
    } else {
      for (const auto& e : set.ghz_events()) {
        for (int j = 0; j < 3; ++j) {
          if (j > 0) buffer.push_back(',');
          append_record(buffer, e.beams[j]);
        }
        buffer.push_back('\n');
        if (buffer.size() > (1 << 20)) flush();
      }
    }
    flush();
    if (!out) throw IoError("write failed for " + csv.string());
  }

  const auto& d = set.descriptor();
  nlohmann::ordered_json meta;
  meta["format"] = "hmt-samples";
  meta["version"] = kFormatVersion;
  meta["state"] = d.kind == SampleKind::TwinBeam ? "twin_beam" : "ghz";
  if (d.kind == SampleKind::TwinBeam) {
    meta["xi_re"] = d.xi.real();
    meta["xi_im"] = d.xi.imag();
    meta["nbar"] = TwinBeamState(d.xi).nbar();
  }
  meta["eta"] = d.eta;
  meta["seed"] = set.seed();
  meta["count"] = set.size();
  meta["sha256"] = sha256_file(csv);
  std::ofstream out(metadata_path(csv), std::ios::trunc);
  if (!out) throw IoError("cannot write " + metadata_path(csv).string());
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + metadata_path(csv).string());
}

SampleSet read_sample_set(const std::filesystem::path& csv) {
  const auto meta_file = metadata_path(csv);
  std::ifstream meta_in(meta_file);
  if (!meta_in) throw IoError("cannot open " + meta_file.string());
  nlohmann::json meta;
  StateDescriptor descriptor;
  std::uint64_t seed = 0;
  std::uint64_t count = 0;
  std::string checksum;
  try {
    meta_in >> meta;
    if (meta.at("format") != "hmt-samples" || meta.at("version") != kFormatVersion) {
      throw CorruptFileError(meta_file.string() + ": unsupported format");
    }
    const auto state = meta.at("state").get<std::string>();
    if (state == "twin_beam") {
      descriptor.kind = SampleKind::TwinBeam;
      descriptor.xi = {meta.at("xi_re").get<double>(), meta.at("xi_im").get<double>()};
    } else if (state == "ghz") {
      descriptor.kind = SampleKind::Ghz;
    } else {
      throw CorruptFileError(meta_file.string() + ": unknown state '" + state + "'");
    }
    descriptor.eta = meta.at("eta").get<double>();
    seed = meta.at("seed").get<std::uint64_t>();
    count = meta.at("count").get<std::uint64_t>();
    checksum = meta.at("sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(meta_file.string() + ": " + e.what());
  }

  if (sha256_file(csv) != checksum) {
    throw CorruptFileError(csv.string() + ": checksum mismatch");
  }

  std::ifstream in(csv, std::ios::binary);
  if (!in) throw IoError("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  const bool twin = descriptor.kind == SampleKind::TwinBeam;
  if (line != (twin ? kTwinHeader : kGhzHeader)) {
    throw CorruptFileError(csv.string() + ": unexpected header");
  }
  std::vector<TwoModeRecord> records;
  std::vector<GhzEvent> events;
  if (twin) {
    records.reserve(count);
  } else {
    events.reserve(count);
  }
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    if (twin) {
      const auto v = parse_row<4>(line, line_number);
      records.push_back(record_from(v.data()));
    } else {
      const auto v = parse_row<12>(line, line_number);
      events.push_back({{record_from(v.data()), record_from(v.data() + 4),
                         record_from(v.data() + 8)}});
    }
  }
  const std::size_t rows = twin ? records.size() : events.size();
  if (rows != count) {
    throw CorruptFileError(fmt::format("{}: {} rows, metadata says {}", csv.string(), rows, count));
  }
  return twin ? SampleSet(descriptor, seed, std::move(records))
              : SampleSet(descriptor, seed, std::move(events));
}

}  // namespace hmt
