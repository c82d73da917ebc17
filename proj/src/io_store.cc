#include "scov/io_store.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>
#include <png.h>

#include "scov/errors.h"

namespace scov {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::size_t kMrcHeader = 1024;
constexpr char kBlockMagic[8] = {'F', 'B', 'C', 'O', 'V', 'B', 'L', 'K'};

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}
void put_f32(std::vector<std::uint8_t>& b, float v) { put_u32(b, std::bit_cast<std::uint32_t>(v)); }

void set_u32(std::vector<std::uint8_t>& b, std::size_t word, std::uint32_t v) {
  for (int s = 0; s < 4; ++s) b[word * 4 + s] = static_cast<std::uint8_t>(v >> (8 * s));
}
void set_f32(std::vector<std::uint8_t>& b, std::size_t word, float v) {
  set_u32(b, word, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(get_u32(p)) | static_cast<std::uint64_t>(get_u32(p + 4)) << 32;
}
float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
std::int32_t get_i32(const std::uint8_t* p) { return static_cast<std::int32_t>(get_u32(p)); }

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    throw SchemaError("bad basis hash '" + s + "'");
  }
}

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object() || !obj.contains(name))
    throw SchemaError(where + ": missing field '" + name + "'");
  return obj.at(name);
}

template <typename T>
T value_of(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + ": field '" + name + "' has the wrong type");
  }
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw SchemaError(what + " is not finite");
}

// Infinite values as the string "inf".
json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}
double number_or_inf(const json& v) {
  if (v.is_string()) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    if (v == "-inf") return -std::numeric_limits<double>::infinity();
    throw SchemaError("bad number '" + v.get<std::string>() + "'");
  }
  return v.get<double>();
}

json coeffs_to_json(const CoeffVec& v, const std::string& what) {
  json re = json::array(), im = json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    require_finite(v[j].real(), what);
    require_finite(v[j].imag(), what);
    re.push_back(v[j].real());
    im.push_back(v[j].imag());
  }
  return {{"re", re}, {"im", im}};
}

CoeffVec coeffs_from_json(const json& j, const std::string& where) {
  const auto re = value_of<std::vector<double>>(j, "re", where);
  const auto im = value_of<std::vector<double>>(j, "im", where);
  if (re.size() != im.size()) throw SchemaError(where + ": re and im lengths differ");
  CoeffVec v(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) v[static_cast<Eigen::Index>(i)] = {re[i], im[i]};
  return v;
}

const char* model_name(CtfModel m) { return m == CtfModel::kNone ? "none" : "weak_phase"; }
CtfModel model_from(const std::string& s) {
  if (s == "none") return CtfModel::kNone;
  if (s == "weak_phase") return CtfModel::kWeakPhase;
  throw SchemaError("unknown CTF model '" + s + "'");
}

json ctf_to_json(const CtfParams& p) {
  return {{"defocus_um", p.defocus_um},     {"voltage_kv", p.voltage_kv},
          {"cs_mm", p.cs_mm},               {"amplitude_contrast", p.amplitude_contrast},
          {"pixel_size_a", p.pixel_size_a}, {"b_factor_a2", p.b_factor_a2},
          {"model", model_name(p.model)}};
}

CtfParams ctf_from_json(const json& j) {
  const std::string w = "ctf";
  CtfParams p;
  p.defocus_um = value_of<double>(j, "defocus_um", w);
  p.voltage_kv = value_of<double>(j, "voltage_kv", w);
  p.cs_mm = value_of<double>(j, "cs_mm", w);
  p.amplitude_contrast = value_of<double>(j, "amplitude_contrast", w);
  p.pixel_size_a = value_of<double>(j, "pixel_size_a", w);
  p.b_factor_a2 = value_of<double>(j, "b_factor_a2", w);
  // Optional; older sidecars only carry weak-phase CTFs.
  if (j.contains("model")) p.model = model_from(j.at("model").get<std::string>());
  p.validate();
  return p;
}

json noise_to_json(const NoiseModel& n) {
  return {{"kind", n.kind == NoiseKind::kWhite ? "white" : "colored"},
          {"sigma2", n.sigma2},
          {"psd", n.kind == NoiseKind::kWhite ? "1" : "1/(r*L/20+1)"}};
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel n;
  const auto kind = value_of<std::string>(j, "kind", "noise");
  if (kind == "white") n.kind = NoiseKind::kWhite;
  else if (kind == "colored") n.kind = NoiseKind::kColored;
  else throw SchemaError("unknown noise kind '" + kind + "'");
  n.sigma2 = value_of<double>(j, "sigma2", "noise");
  return n;
}

}  // namespace

MrcStack MrcStack::from_images(std::span<const Image> images) {
  MrcStack s;
  if (images.empty()) throw std::invalid_argument("empty image stack");
  s.nx = static_cast<int>(images[0].data.rows());
  s.ny = static_cast<int>(images[0].data.cols());
  s.nz = static_cast<int>(images.size());
  s.pixel_size = static_cast<float>(images[0].pixel_size);
  s.data.reserve(static_cast<std::size_t>(s.nx) * s.ny * s.nz);
  for (const auto& img : images) {
    if (img.data.rows() != s.nx || img.data.cols() != s.ny) throw ShapeError("images differ in size");
    for (Eigen::Index k = 0; k < img.data.size(); ++k) s.data.push_back(static_cast<float>(img.data.data()[k]));
  }
  return s;
}

std::vector<Image> MrcStack::to_images() const {
  if (nx != ny) throw ShapeError("images are not square");
  std::vector<Image> out;
  const std::size_t plane = static_cast<std::size_t>(nx) * ny;
  for (int z = 0; z < nz; ++z) {
    Image img(nx, pixel_size);
    for (std::size_t k = 0; k < plane; ++k) img.data.data()[k] = data[z * plane + k];
    out.push_back(std::move(img));
  }
  return out;
}

void write_mrc(const MrcStack& s, const fs::path& path) {
  const std::size_t count = static_cast<std::size_t>(s.nx) * s.ny * s.nz;
  if (s.nx <= 0 || s.ny <= 0 || s.nz <= 0 || s.data.size() != count)
    throw ShapeError("stack dimensions do not match its data");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0, sq = 0.0;
  for (float v : s.data) {
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(count);
  for (float v : s.data) sq += (v - mean) * (v - mean);

  std::vector<std::uint8_t> b(kMrcHeader, 0);
  set_u32(b, 0, static_cast<std::uint32_t>(s.nx));
  set_u32(b, 1, static_cast<std::uint32_t>(s.ny));
  set_u32(b, 2, static_cast<std::uint32_t>(s.nz));
  set_u32(b, 3, 2);  // mode: float32
  set_u32(b, 7, static_cast<std::uint32_t>(s.nx));
  set_u32(b, 8, static_cast<std::uint32_t>(s.ny));
  set_u32(b, 9, static_cast<std::uint32_t>(s.nz));
  set_f32(b, 10, s.pixel_size * static_cast<float>(s.nx));
  set_f32(b, 11, s.pixel_size * static_cast<float>(s.ny));
  set_f32(b, 12, s.pixel_size * static_cast<float>(s.nz));
  for (std::size_t w = 13; w < 16; ++w) set_f32(b, w, 90.0f);
  set_u32(b, 16, 1);
  set_u32(b, 17, 2);
  set_u32(b, 18, 3);
  set_f32(b, 19, static_cast<float>(lo));
  set_f32(b, 20, static_cast<float>(hi));
  set_f32(b, 21, static_cast<float>(mean));
  set_u32(b, 22, 0);  // ispg 0: image stack
  set_u32(b, 23, 0);  // no extended header
  set_u32(b, 27, 20140);
  std::memcpy(&b[208], "MAP ", 4);
  b[212] = 0x44;
  b[213] = 0x44;
  set_f32(b, 54, static_cast<float>(std::sqrt(sq / static_cast<double>(count))));
  set_u32(b, 55, 1);
  const char label[] = "scov float32 image stack";
  std::memcpy(&b[224], label, sizeof(label) - 1);
  b.reserve(kMrcHeader + 4 * count);
  for (float v : s.data) put_f32(b, v);
  write_bytes(b, path);
}

MrcStack read_mrc(const fs::path& path) {
  const auto b = read_bytes(path);
  if (b.size() < kMrcHeader) throw TruncatedFileError(path.string() + ": header shorter than 1024 bytes");
  const std::uint8_t* p = b.data();
  if (p[212] == 0x11) throw FormatError(path.string() + ": big-endian MRC files are not supported");
  const std::int32_t mode = get_i32(p + 12);
  if (mode != 2) throw UnsupportedModeError(path.string() + ": unsupported MRC mode " + std::to_string(mode));
  MrcStack s;
  s.nx = get_i32(p);
  s.ny = get_i32(p + 4);
  s.nz = get_i32(p + 8);
  if (s.nx <= 0 || s.ny <= 0 || s.nz <= 0) throw ShapeError(path.string() + ": non-positive dimensions");
  if (s.nx != s.ny)
    throw ShapeError(path.string() + ": nx=" + std::to_string(s.nx) + " differs from ny=" + std::to_string(s.ny));
  const std::int32_t mx = get_i32(p + 28);
  const float cella = get_f32(p + 40);
  s.pixel_size = mx > 0 && cella > 0.0f ? cella / static_cast<float>(mx) : 1.0f;
  const std::uint32_t ext = get_u32(p + 92);
  const std::size_t offset = kMrcHeader + ext;
  const std::size_t count = static_cast<std::size_t>(s.nx) * s.ny * s.nz;
  if (b.size() < offset + 4 * count)
    throw TruncatedFileError(path.string() + ": expected " + std::to_string(offset + 4 * count) +
                             " bytes, found " + std::to_string(b.size()));
  s.data.resize(count);
  for (std::size_t k = 0; k < count; ++k) s.data[k] = get_f32(p + offset + 4 * k);
  return s;
}

void save_report(const EstimationReport& r, const fs::path& path) {
  require_finite(r.sigma2, "sigma2");
  json j;
  j["format"] = "scov-report";
  j["version"] = kReportVersion;
  j["basis_hash"] = hex64(r.basis_hash);
  j["sigma2"] = r.sigma2;
  j["shrinkage"] = r.shrinkage;
  require_finite(r.delta, "delta");
  j["delta"] = r.delta;
  for (double c : r.block_condition) require_finite(c, "block condition");
  j["block_condition"] = r.block_condition;
  json timings = json::object();
  for (const auto& [k, v] : r.timings) {
    require_finite(v, "timing " + k);
    timings[k] = v;
  }
  j["timings"] = timings;
  j["warnings"] = r.warnings;
  j["config"] = r.config;
  j["mean"] = coeffs_to_json(r.mean, "mean");
  json blocks = json::array();
  for (int n = 0; n < r.covariance.num_blocks(); ++n) {
    const auto& B = r.covariance.blocks[n];
    json re = json::array(), im = json::array();
    for (Eigen::Index a = 0; a < B.rows(); ++a)
      for (Eigen::Index c = 0; c < B.cols(); ++c) {
        require_finite(B(a, c).real(), "covariance");
        require_finite(B(a, c).imag(), "covariance");
        re.push_back(B(a, c).real());
        im.push_back(B(a, c).imag());
      }
    blocks.push_back({{"n", n}, {"k_max", B.rows()}, {"re", re}, {"im", im}});
  }
  j["covariance"] = {{"basis_hash", hex64(r.covariance.basis_hash)}, {"blocks", blocks}};
  write_text(j.dump(1) + "\n", path);
}

EstimationReport load_report(const fs::path& path, const BasisSpec* basis) {
  const json j = read_json(path);
  const std::string w = "report";
  if (value_of<std::string>(j, "format", w) != "scov-report") throw SchemaError("not a report file");
  const int version = value_of<int>(j, "version", w);
  if (version != kReportVersion)
    throw VersionError("report version " + std::to_string(version) + ", expected " +
                       std::to_string(kReportVersion));
  EstimationReport r;
  r.basis_hash = parse_hex64(value_of<std::string>(j, "basis_hash", w));
  if (basis && basis->hash() != r.basis_hash)
    throw BasisMismatchError("report basis " + hex64(r.basis_hash) + " does not match " + hex64(basis->hash()));
  r.sigma2 = value_of<double>(j, "sigma2", w);
  r.shrinkage = value_of<bool>(j, "shrinkage", w);
  r.delta = value_of<double>(j, "delta", w);
  r.block_condition = value_of<std::vector<double>>(j, "block_condition", w);
  r.timings = value_of<std::map<std::string, double>>(j, "timings", w);
  r.warnings = value_of<std::vector<std::string>>(j, "warnings", w);
  r.config = value_of<std::map<std::string, std::string>>(j, "config", w);
  r.mean = coeffs_from_json(field(j, "mean", w), "report.mean");
  const json& cov = field(j, "covariance", w);
  r.covariance.basis_hash = parse_hex64(value_of<std::string>(cov, "basis_hash", "report.covariance"));
  for (const json& blk : field(cov, "blocks", "report.covariance")) {
    const std::string bw = "report.covariance.blocks";
    const int n = value_of<int>(blk, "n", bw);
    const int k = value_of<int>(blk, "k_max", bw);
    const auto re = value_of<std::vector<double>>(blk, "re", bw);
    const auto im = value_of<std::vector<double>>(blk, "im", bw);
    if (n != r.covariance.num_blocks() || k < 0 ||
        re.size() != static_cast<std::size_t>(k) * k || im.size() != re.size())
      throw SchemaError("report: malformed covariance block " + std::to_string(n));
    Eigen::MatrixXcd B(k, k);
    for (int a = 0; a < k; ++a)
      for (int c = 0; c < k; ++c) B(a, c) = {re[a * k + c], im[a * k + c]};
    r.covariance.blocks.push_back(std::move(B));
  }
  if (basis) {
    if (r.covariance.num_blocks() != basis->max_order() + 1 ||
        static_cast<std::size_t>(r.mean.size()) != basis->size())
      throw BasisMismatchError("report shape does not match the basis");
    for (int n = 0; n <= basis->max_order(); ++n)
      if (r.covariance.blocks[n].rows() != basis->block_size(n))
        throw BasisMismatchError("report block " + std::to_string(n) + " does not match the basis");
  }
  return r;
}

void write_blocks(const BlockDiagHermitian& C, const fs::path& path) {
  std::vector<std::uint8_t> b(kBlockMagic, kBlockMagic + 8);
  put_u32(b, kBlockFileVersion);
  put_u64(b, C.basis_hash);
  put_u32(b, static_cast<std::uint32_t>(C.blocks.size()));
  for (int n = 0; n < C.num_blocks(); ++n) {
    const auto& B = C.blocks[n];
    put_u32(b, static_cast<std::uint32_t>(n));
    put_u32(b, static_cast<std::uint32_t>(B.rows()));
    for (Eigen::Index r = 0; r < B.rows(); ++r)
      for (Eigen::Index c = 0; c < B.cols(); ++c) {
        put_f32(b, static_cast<float>(B(r, c).real()));
        put_f32(b, static_cast<float>(B(r, c).imag()));
      }
  }
  write_bytes(b, path);
}

BlockDiagHermitian read_blocks(const fs::path& path, const BasisSpec& basis) {
  const auto b = read_bytes(path);
  const std::string name = path.string();
  if (b.size() < 24) throw TruncatedFileError(name + ": block file header truncated");
  if (std::memcmp(b.data(), kBlockMagic, 8) != 0) throw FormatError(name + ": not a block matrix file");
  const std::uint32_t version = get_u32(&b[8]);
  if (version != kBlockFileVersion) throw VersionError(name + ": block file version " + std::to_string(version));
  BlockDiagHermitian C;
  C.basis_hash = get_u64(&b[12]);
  if (C.basis_hash != basis.hash())
    throw BasisMismatchError(name + ": basis hash " + hex64(C.basis_hash) + " does not match " + hex64(basis.hash()));
  const std::uint32_t count = get_u32(&b[20]);
  if (static_cast<int>(count) != basis.max_order() + 1) throw BasisMismatchError(name + ": block count differs from basis");
  std::size_t pos = 24;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (b.size() < pos + 8) throw TruncatedFileError(name + ": truncated block header");
    const std::int32_t n = get_i32(&b[pos]);
    const std::uint32_t k = get_u32(&b[pos + 4]);
    pos += 8;
    if (n != static_cast<std::int32_t>(i) || static_cast<int>(k) != basis.block_size(n))
      throw BasisMismatchError(name + ": block " + std::to_string(i) + " does not match the basis");
    const std::size_t bytes = static_cast<std::size_t>(k) * k * 8;
    if (b.size() < pos + bytes) throw TruncatedFileError(name + ": truncated block " + std::to_string(n));
    Eigen::MatrixXcd B(k, k);
    for (std::uint32_t r = 0; r < k; ++r)
      for (std::uint32_t c = 0; c < k; ++c, pos += 8) B(r, c) = {get_f32(&b[pos]), get_f32(&b[pos + 4])};
    C.blocks.push_back(std::move(B));
  }
  return C;
}

void write_metrics_csv(std::span<const MetricRow> rows, const fs::path& path) {
  std::ostringstream os;
  os << std::setprecision(17) << "metric,index,value,count\n";
  for (const auto& r : rows) os << r.metric << ',' << r.index << ',' << r.value << ',' << r.count << '\n';
  write_text(os.str(), path);
}

void write_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
               const fs::path& path) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
  write_text(os.str(), path);
}

namespace {

void write_png(int width, int height, int color_type, int channels, std::span<const std::uint8_t> pixels,
               const fs::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw FormatError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw FormatError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

void write_png_preview(const Image& image, const fs::path& path) {
  const int L = image.size();
  const double lo = image.data.minCoeff(), hi = image.data.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(L) * L);
  // Row y of the PNG is the grid row j = L - 1 - y so +y points up.
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x)
      px[static_cast<std::size_t>(y) * L + x] =
          static_cast<std::uint8_t>(std::lround((image(x, L - 1 - y) - lo) * scale));
  write_png(L, L, PNG_COLOR_TYPE_GRAY, 1, px, path);
}

void write_png_rgb(int width, int height, std::span<const std::uint8_t> rgb, const fs::path& path) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw std::invalid_argument("RGB buffer size mismatch");
  write_png(width, height, PNG_COLOR_TYPE_RGB, 3, rgb, path);
}

void write_ctf_params(std::span<const CtfParams> ctfs, const fs::path& path) {
  json arr = json::array();
  for (std::size_t g = 0; g < ctfs.size(); ++g) {
    json rec = ctf_to_json(ctfs[g]);
    rec["group"] = g;
    arr.push_back(rec);
  }
  write_text(arr.dump(1) + "\n", path);
}

std::vector<CtfParams> read_ctf_params(const fs::path& path) {
  const json arr = read_json(path);
  if (!arr.is_array()) throw SchemaError(path.string() + ": expected a JSON array of CTF records");
  std::vector<std::optional<CtfParams>> slots(arr.size());
  for (const json& rec : arr) {
    const int g = value_of<int>(rec, "group", "ctf");
    if (g < 0 || g >= static_cast<int>(arr.size()) || slots[g])
      throw SchemaError(path.string() + ": group ids must be dense and unique");
    slots[g] = ctf_from_json(rec);
  }
  std::vector<CtfParams> out;
  for (auto& s : slots) out.push_back(*s);
  return out;
}

void save_dataset(const Dataset& d, const fs::path& dir, const std::map<std::string, std::string>& config) {
  d.validate();
  fs::create_directories(dir);
  write_mrc(MrcStack::from_images(d.images), dir / "images.mrc");
  if (!d.clean_images.empty()) write_mrc(MrcStack::from_images(d.clean_images), dir / "clean.mrc");
  json j;
  j["format"] = "scov-dataset";
  j["version"] = 1;
  j["grid_size"] = d.grid_size;
  j["pixel_size"] = d.pixel_size;
  j["num_images"] = d.size();
  j["seed"] = d.seed;
  j["snr"] = number_or_inf(d.snr);
  j["measured_snr"] = number_or_inf(d.measured_snr);
  j["noise"] = noise_to_json(d.noise);
  j["whitened_from"] = d.whitened_from ? noise_to_json(*d.whitened_from) : json(nullptr);
  j["group_of"] = d.group_of;
  json ctfs = json::array();
  for (const auto& p : d.ctfs) ctfs.push_back(ctf_to_json(p));
  j["ctfs"] = ctfs;
  j["images"] = "images.mrc";
  j["clean_images"] = d.clean_images.empty() ? json(nullptr) : json("clean.mrc");
  j["config"] = config;
  write_text(j.dump(1) + "\n", dir / "dataset.json");
}

Dataset load_dataset(const fs::path& dir) {
  const json j = read_json(dir / "dataset.json");
  const std::string w = "dataset";
  if (value_of<std::string>(j, "format", w) != "scov-dataset") throw SchemaError("not a dataset sidecar");
  if (value_of<int>(j, "version", w) != 1) throw VersionError("unsupported dataset version");
  Dataset d;
  d.grid_size = value_of<int>(j, "grid_size", w);
  d.pixel_size = value_of<double>(j, "pixel_size", w);
  d.seed = value_of<std::uint64_t>(j, "seed", w);
  d.snr = number_or_inf(field(j, "snr", w));
  d.measured_snr = number_or_inf(field(j, "measured_snr", w));
  d.noise = noise_from_json(field(j, "noise", w));
  const json& wf = field(j, "whitened_from", w);
  if (!wf.is_null()) d.whitened_from = noise_from_json(wf);
  d.group_of = value_of<std::vector<int>>(j, "group_of", w);
  for (const json& c : field(j, "ctfs", w)) d.ctfs.push_back(ctf_from_json(c));
  d.images = read_mrc(dir / value_of<std::string>(j, "images", w)).to_images();
  const json& clean = field(j, "clean_images", w);
  if (!clean.is_null()) d.clean_images = read_mrc(dir / clean.get<std::string>()).to_images();
  if (!d.images.empty() && d.images[0].size() != d.grid_size) throw ShapeError("image size differs from grid_size");
  for (auto& img : d.images) img.pixel_size = d.pixel_size;
  for (auto& img : d.clean_images) img.pixel_size = d.pixel_size;
  d.validate();
  return d;
}

std::map<std::string, std::string> load_dataset_config(const fs::path& dir) {
  const json j = read_json(dir / "dataset.json");
  return value_of<std::map<std::string, std::string>>(j, "config", "dataset");
}

}  // namespace scov
