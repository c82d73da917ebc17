#include "commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "scov/ctf.h"
#include "scov/denoise.h"
#include "scov/errors.h"
#include "scov/fb_basis.h"
#include "scov/io_store.h"
#include "scov/metrics.h"
#include "scov/oracles/reference_oracles.h"
#include "scov/parallel.h"
#include "scov/simulate.h"

namespace scov::cli {
namespace fs = std::filesystem;
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Coefficients and weights in the whitened domain (unit white noise), or
// as stored when the data are noiseless.
struct Prepared {
  std::vector<CoeffVec> G;
  ImageWeights H;
  double sigma2 = 0.0;
  bool whitened = false;
};

void whiten_in_place(Prepared& p, const NoiseModel& noise, const BasisSpec& basis) {
  if (!(noise.sigma2 > 0.0)) return;
  const RadialWeightVec w = whitening_weights(noise, basis);
  for (auto& g : p.G) g = radial_convolve(g, w);
  for (auto& h : p.H.groups) h = (h.array() * w.array()).matrix();
  p.sigma2 = 1.0;
  p.whitened = true;
}

std::map<std::string, std::string> with(std::map<std::string, std::string> m,
                                        const std::map<std::string, std::string>& extra) {
  for (const auto& [k, v] : extra) m[k] = v;
  return m;
}

double config_double(const EstimationReport& r, const std::string& key, double fallback) {
  auto it = r.config.find(key);
  return it == r.config.end() ? fallback : std::stod(it->second);
}

int config_int(const EstimationReport& r, const std::string& key) {
  auto it = r.config.find(key);
  if (it == r.config.end()) throw SchemaError("report: config has no '" + key + "'");
  return std::stoi(it->second);
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext) {
  std::ostringstream os;
  os << stem << std::setw(2) << std::setfill('0') << i << ext;
  return os.str();
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (size < 8 || size % 2 != 0) fail("--size must be even and at least 8");
  if (num_images < 1) fail("--num-images must be positive");
  if (num_groups < 1 || num_groups > num_images) fail("--num-groups must be in [1, num-images]");
  if (!(snr > 0.0)) fail("--snr must be positive (inf for noiseless data)");
  if (!(band_ratio > 0.0 && band_ratio <= 1.0)) fail("--band-ratio must be in (0, 1]");
  if (threads < 0) fail("--threads must be non-negative");
  if (top < 1) fail("--top must be positive");
  if (repeat < 1) fail("--repeat must be positive");
  if (cg_size < 8 || cg_size % 2 != 0) fail("--cg-size must be even and at least 8");
  if (cg_images < 1) fail("--cg-images must be positive");
  for (int m : bench_groups)
    if (m < 1 || m > num_images) fail("--bench-groups entries must be in [1, num-images]");
  if (bench_groups.empty()) fail("--bench-groups is empty");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["subcommand"] = subcommand;
  m["size"] = std::to_string(size);
  m["num_images"] = std::to_string(num_images);
  m["num_groups"] = std::to_string(num_groups);
  m["snr"] = std::isinf(snr) ? "inf" : format_double(snr);
  m["band_ratio"] = format_double(band_ratio);
  m["seed"] = std::to_string(seed);
  m["shrink"] = shrink ? (*shrink ? "on" : "off") : "auto";
  m["threads"] = std::to_string(threads);
  m["noise"] = white_noise ? "white" : "colored";
  m["random_steer"] = random_steer ? "true" : "false";
  std::string groups;
  for (std::size_t i = 0; i < bench_groups.size(); ++i) groups += (i ? "," : "") + std::to_string(bench_groups[i]);
  m["bench_groups"] = groups;
  return m;
}

std::vector<std::size_t> parse_selection(const std::string& spec, std::size_t count) {
  std::vector<std::size_t> out;
  auto number = [&](const std::string& s) -> std::size_t {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
    }
    if (v < 0 || used != s.size()) throw std::invalid_argument("bad selection '" + spec + "'");
    return static_cast<std::size_t>(v);
  };
  if (spec == "all") {
    for (std::size_t i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 2 && parts.size() != 3) throw std::invalid_argument("bad selection '" + spec + "'");
    const std::size_t a = number(parts[0]);
    const std::size_t stride = parts.size() == 3 ? number(parts[1]) : 1;
    const std::size_t b = number(parts.back());
    if (stride == 0 || b < a) throw std::invalid_argument("bad selection '" + spec + "'");
    for (std::size_t i = a; i <= b; i += stride) out.push_back(i);
  } else {
    std::stringstream ss(spec);
    for (std::string part; std::getline(ss, part, ',');) out.push_back(number(part));
  }
  if (out.empty()) throw std::invalid_argument("empty selection");
  for (std::size_t i : out)
    if (i >= count)
      throw std::invalid_argument("selection id " + std::to_string(i) + " exceeds the dataset (" +
                                  std::to_string(count) + " images)");
  return out;
}

SimulateOutput cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.out;
  if (fs::exists(dir / "dataset.json") && !cfg.force)
    throw std::runtime_error(dir.string() + " already holds a dataset; use --force to overwrite");
  const int threads = resolve_threads(cfg.threads);
  const BasisSpec basis = build_basis(cfg.size, cfg.band_ratio);
  const Volume v = make_phantom(cfg.size, cfg.seed);
  SimulationOptions o;
  o.num_images = cfg.num_images;
  o.num_groups = cfg.num_groups;
  o.snr = cfg.snr;
  o.noise = cfg.white_noise ? NoiseKind::kWhite : NoiseKind::kColored;
  o.seed = cfg.seed;
  o.random_steer = cfg.random_steer;
  o.threads = threads;
  const Dataset d = make_dataset(v, basis, o);
  save_dataset(d, dir, cfg.to_map());
  return {dir, d.measured_snr};
}

EstimateOutput cmd_estimate(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.dataset.empty()) throw std::invalid_argument("--dataset is required");
  const int threads = resolve_threads(cfg.threads);
  const Dataset d = load_dataset(cfg.dataset);
  const BasisSpec basis = build_basis(d.grid_size, cfg.band_ratio);

  EstimationReport best;
  double best_total = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < cfg.repeat; ++rep) {
    auto t = Clock::now();
    Prepared p;
    p.G = expand_batch(d.images, basis, threads);
    const double t_ffb = seconds_since(t);

    t = Clock::now();
    p.H = image_weights(d, basis);
    p.sigma2 = d.noise.sigma2;
    whiten_in_place(p, d.noise, basis);
    const Wellposedness wp = check_wellposedness(p.H.groups, basis, p.H.multiplicity());
    if (!(wp.delta > 0.0))
      throw NumericalError("identifiability margin delta is zero: some frequency pair is never observed");
    const double t_ctf = seconds_since(t);

    EstimateOptions eo;
    eo.sigma2 = p.sigma2;
    eo.shrink = cfg.shrink.value_or(p.sigma2 > 0.0) ? Shrinkage::kOn : Shrinkage::kOff;
    eo.threads = threads;
    eo.check_identifiability = false;
    t = Clock::now();
    EstimationReport r = estimate_covariance(p.G, p.H, basis, eo);
    const double t_cov = seconds_since(t);

    r.delta = wp.delta;
    if (wp.warning) r.warnings.push_back("identifiability margin delta=" + format_double(wp.delta) + " is near zero");
    r.timings["T_ffb"] = t_ffb;
    r.timings["T_ctf"] = t_ctf;
    r.timings["T_cov"] = t_cov;
    r.config = with(cfg.to_map(), {{"subcommand", "estimate"},
                                   {"size", std::to_string(d.grid_size)},
                                   {"num_images", std::to_string(d.size())},
                                   {"num_groups", std::to_string(d.num_groups())},
                                   {"whitened", p.whitened ? "true" : "false"},
                                   {"dataset", cfg.dataset.string()},
                                   {"repeat", std::to_string(cfg.repeat)}});
    const double total = t_ffb + t_ctf + t_cov;
    if (total < best_total) {
      best_total = total;
      best = std::move(r);
    }
  }
  fs::create_directories(cfg.out);
  EstimateOutput out{cfg.out / "report.json", cfg.out / "covariance.fbcov", best};
  save_report(best, out.report_path);
  write_blocks(best.covariance, out.blocks_path);
  return out;
}

namespace {

struct LoadedReport {
  EstimationReport report;
  BasisSpec basis;
};

LoadedReport load_report_and_basis(const fs::path& path) {
  EstimationReport r = load_report(path);
  const int L = config_int(r, "size");
  BasisSpec basis = build_basis(L, config_double(r, "band_ratio", 1.0));
  if (basis.hash() != r.basis_hash) throw BasisMismatchError("report does not match its recorded basis");
  r = load_report(path, &basis);
  return {std::move(r), basis};
}

}  // namespace

std::vector<fs::path> cmd_denoise(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.dataset.empty() || cfg.report.empty()) throw std::invalid_argument("--dataset and --report are required");
  const int threads = resolve_threads(cfg.threads);
  const auto [report, basis] = load_report_and_basis(cfg.report);
  const Dataset raw = load_dataset(cfg.dataset);
  if (raw.grid_size != basis.grid_size()) throw ShapeError("dataset and report grid sizes differ");
  const auto it = report.config.find("whitened");
  const bool whitened = it != report.config.end() && it->second == "true";
  const Dataset d = whitened ? whiten(raw, basis) : raw;
  const auto selection = parse_selection(cfg.select, d.size());

  WienerContext ctx(basis, report.mean, report.covariance, report.sigma2);
  const auto t = Clock::now();
  const std::vector<Image> denoised = denoise_batch(d, ctx, selection, threads);
  const double t_denoise = seconds_since(t);

  fs::create_directories(cfg.out);
  std::vector<fs::path> files;
  files.push_back(cfg.out / "denoised.mrc");
  write_mrc(MrcStack::from_images(denoised), files.back());
  if (cfg.png)
    for (std::size_t s = 0; s < selection.size(); ++s) {
      std::ostringstream name;
      name << "denoised_" << std::setw(6) << std::setfill('0') << selection[s] << ".png";
      files.push_back(cfg.out / name.str());
      write_png_preview(denoised[s], files.back());
    }
  if (!raw.clean_images.empty()) {
    std::vector<Image> clean, noisy;
    for (std::size_t i : selection) {
      clean.push_back(raw.clean_images[i]);
      noisy.push_back(raw.images[i]);
    }
    auto rows = to_rows("frc_denoised", frc_batch(denoised, clean, threads));
    const auto noisy_rows = to_rows("frc_noisy", frc_batch(noisy, clean, threads));
    rows.insert(rows.end(), noisy_rows.begin(), noisy_rows.end());
    files.push_back(cfg.out / "frc.csv");
    write_metrics_csv(rows, files.back());
  }
  nlohmann::json side;
  side["config"] = with(cfg.to_map(), {{"subcommand", "denoise"}});
  side["selection"] = selection;
  side["cache_hits"] = ctx.cache_hits();
  side["cache_misses"] = ctx.cache_misses();
  side["clipped_eigenvalues"] = ctx.clipped_eigenvalues();
  side["warnings"] = ctx.warnings();
  side["timings"] = {{"T_denoise", t_denoise}};
  files.push_back(cfg.out / "denoise.json");
  write_json(side, files.back());
  return files;
}

std::vector<fs::path> cmd_eigenimages(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.report.empty()) throw std::invalid_argument("--report is required");
  const auto [report, basis] = load_report_and_basis(cfg.report);
  const auto eig = eigenimages(report.covariance, basis, cfg.top);
  fs::create_directories(cfg.out);
  std::vector<fs::path> files;
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < eig.size(); ++r) {
    files.push_back(cfg.out / numbered("eigenimage_", r + 1, ".mrc"));
    write_mrc(MrcStack::from_images(std::span<const Image>(&eig[r].image, 1)), files.back());
    if (cfg.png) {
      files.push_back(cfg.out / numbered("eigenimage_", r + 1, ".png"));
      write_png_preview(eig[r].image, files.back());
    }
    rows.push_back({static_cast<double>(r + 1), eig[r].eigenvalue, static_cast<double>(eig[r].n)});
  }
  files.push_back(cfg.out / "eigenimages.csv");
  write_csv({"rank", "eigenvalue", "n"}, rows, files.back());
  return files;
}

std::vector<BenchRow> cmd_bench(const RunConfig& cfg) {
  cfg.validate();
  const int threads = resolve_threads(cfg.threads);
  const BasisSpec basis = build_basis(cfg.size, cfg.band_ratio);
  const BasisSpec cg_basis = build_basis(cfg.cg_size, cfg.band_ratio);
  const Volume v = make_phantom(cfg.size, cfg.seed);
  const Volume cg_volume = make_phantom(cfg.cg_size, cfg.seed);
  std::vector<BenchRow> rows;
  for (int M : cfg.bench_groups) {
    BenchRow row;
    row.groups = M;
    SimulationOptions o;
    o.num_images = cfg.num_images;
    o.num_groups = M;
    o.snr = cfg.snr;
    o.seed = cfg.seed;
    o.threads = threads;
    const Dataset d = make_dataset(v, basis, o);
    Prepared p;
    p.G = expand_batch(d.images, basis, threads);
    p.H = image_weights(d, basis);
    p.sigma2 = d.noise.sigma2;
    whiten_in_place(p, d.noise, basis);
    const Shrinkage shrink = cfg.shrink.value_or(p.sigma2 > 0.0) ? Shrinkage::kOn : Shrinkage::kOff;
    row.t_fast = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < cfg.repeat; ++rep) {
      const auto t = Clock::now();
      const CoeffVec mu = estimate_mean(p.G, p.H, basis);
      const auto acc = accumulate(p.G, p.H, mu, basis, threads);
      const auto C = solve_covariance(acc, p.sigma2, shrink, nullptr, threads);
      row.t_fast = std::min(row.t_fast, seconds_since(t));
    }

    SimulationOptions co = o;
    co.num_images = cfg.cg_images;
    co.num_groups = std::min(M, cfg.cg_images);
    const Dataset cd = make_dataset(cg_volume, cg_basis, co);
    Prepared cp;
    cp.G = expand_batch(cd.images, cg_basis, threads);
    cp.H = image_weights(cd, cg_basis);
    cp.sigma2 = cd.noise.sigma2;
    whiten_in_place(cp, cd.noise, cg_basis);
    oracle::OracleInstance inst{cp.G, cp.H.groups, cp.H.group_of, cp.sigma2, cg_basis, std::nullopt};
    const CoeffVec cmu = oracle::lstsq_mean(inst);
    row.t_cg = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < cfg.repeat; ++rep) {
      const auto t = Clock::now();
      const auto result = oracle::lstsq_cg(inst, cmu);
      row.t_cg = std::min(row.t_cg, seconds_since(t));
    }
    rows.push_back(row);
  }
  fs::create_directories(cfg.out);
  std::vector<std::vector<double>> table;
  for (const auto& r : rows) table.push_back({static_cast<double>(r.groups), r.t_fast, r.t_cg});
  write_csv({"M", "t_fast", "t_cg"}, table, cfg.out / "bench.csv");
  plot_bench(rows, cfg.out / "bench.png");
  nlohmann::json side;
  side["config"] = with(cfg.to_map(), {{"subcommand", "bench"}});
  write_json(side, cfg.out / "bench.json");
  return rows;
}

void plot_bench(const std::vector<BenchRow>& rows, const fs::path& path) {
  constexpr int W = 640, Hgt = 400, left = 60, right = 20, top = 20, bottom = 40;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(W) * Hgt * 3, 255);
  auto put = [&](int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= W || y >= Hgt) return;
    const std::size_t o = (static_cast<std::size_t>(y) * W + x) * 3;
    rgb[o] = c[0];
    rgb[o + 1] = c[1];
    rgb[o + 2] = c[2];
  };
  auto line = [&](int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      put(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  };
  double xmin = 0.0, xmax = 1.0, ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& r : rows) {
    xmax = std::max(xmax, std::log10(static_cast<double>(r.groups)));
    for (double t : {r.t_fast, r.t_cg})
      if (t > 0.0) {
        ymin = std::min(ymin, std::log10(t));
        ymax = std::max(ymax, std::log10(t));
      }
  }
  if (!std::isfinite(ymin)) ymin = -6.0, ymax = 0.0;
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1.0);
  xmax = std::max(std::ceil(xmax), 1.0);
  auto px = [&](double lx) { return left + static_cast<int>(std::lround((lx - xmin) / (xmax - xmin) * (W - left - right))); };
  auto py = [&](double ly) { return Hgt - bottom - static_cast<int>(std::lround((ly - ymin) / (ymax - ymin) * (Hgt - top - bottom))); };
  const std::array<std::uint8_t, 3> black{0, 0, 0}, grey{210, 210, 210};
  for (double d = xmin; d <= xmax; d += 1.0) line(px(d), py(ymin), px(d), py(ymax), grey);
  for (double d = ymin; d <= ymax; d += 1.0) line(px(xmin), py(d), px(xmax), py(d), grey);
  line(px(xmin), py(ymin), px(xmax), py(ymin), black);
  line(px(xmin), py(ymin), px(xmin), py(ymax), black);
  auto series = [&](auto get, std::array<std::uint8_t, 3> c) {
    int lastx = -1, lasty = -1;
    for (const auto& r : rows) {
      const double t = get(r);
      if (!(t > 0.0)) continue;
      const int x = px(std::log10(static_cast<double>(r.groups))), y = py(std::log10(t));
      for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b) put(x + a, y + b, c);
      if (lastx >= 0) line(lastx, lasty, x, y, c);
      lastx = x;
      lasty = y;
    }
  };
  series([](const BenchRow& r) { return r.t_fast; }, {31, 119, 180});
  series([](const BenchRow& r) { return r.t_cg; }, {214, 39, 40});
  write_png_rgb(W, Hgt, rgb, path);
}

}  // namespace scov::cli
