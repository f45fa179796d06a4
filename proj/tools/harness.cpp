#include "harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "nrsle/chordal_approx.hpp"
#include "nrsle/circle_config.hpp"
#include "nrsle/dyson_sde.hpp"
#include "nrsle/errors.hpp"
#include "nrsle/executor.hpp"
#include "nrsle/lattice.hpp"
#include "nrsle/normalization.hpp"
#include "nrsle/radial_loewner.hpp"
#include "nrsle/rng.hpp"

#ifndef NRSLE_VERSION
#define NRSLE_VERSION "dev"
#endif

namespace nrsle::harness {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty())
    throw ValidationError(key, "expected a number, got \"" + text + "\"");
  return v;
}

std::string join_numbers(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + number_text(values[i]);
  return out;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& section, const std::string& origin) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config", origin + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  Config config;
  for (const auto& [name, child] : tree) {
    if (child.empty()) throw ValidationError(name, "keys must sit in a [" + section + "] section");
    if (name != section) throw ValidationError(name, "unknown section; this experiment reads [" + section + "]");
    for (const auto& [key, value] : child) config.raw_[key] = value.data();
  }
  return config;
}

Config Config::from_file(const fs::path& path, const std::string& section) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot read " + path.string());
  return parse(in, section, path.string());
}

Config Config::from_string(const std::string& text, const std::string& section) {
  std::istringstream in(text);
  return parse(in, section, "<string>");
}

double Config::number(const std::string& key, double fallback) {
  const auto it = raw_.find(key);
  const double v = it == raw_.end() ? fallback : parse_number(key, it->second);
  if (!std::isfinite(v)) throw ValidationError(key, "must be finite");
  echo_[key] = number_text(v);
  return v;
}

int Config::integer(const std::string& key, int fallback) {
  const double v = number(key, fallback);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw ValidationError(key, "must be an integer");
  echo_[key] = std::to_string(static_cast<long long>(v));
  return static_cast<int>(v);
}

std::string Config::text(const std::string& key, const std::string& fallback) {
  const auto it = raw_.find(key);
  const std::string v = it == raw_.end() ? fallback : trim(it->second);
  echo_[key] = v;
  return v;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) {
  const auto it = raw_.find(key);
  std::vector<double> out;
  if (it == raw_.end()) {
    out = fallback;
  } else {
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
    if (out.empty()) throw ValidationError(key, "expected a comma-separated list of numbers");
  }
  echo_[key] = join_numbers(out);
  return out;
}

void Config::finish() const {
  for (const auto& [key, value] : raw_)
    if (!echo_.count(key)) throw ValidationError(key, "unknown key for this experiment");
}

// ---------------------------------------------------------------------------
// Output

std::string number_text(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return ec == std::errc() ? std::string(buffer, end) : std::string("nan");
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (const char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header) : path_(path) {
  file_ = std::fopen(path.string().c_str(), "wb");
  if (!file_) throw std::runtime_error("cannot write " + path.string());
  row(header);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(file_);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv_field(fields[i]);
  line += "\r\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size())
    throw std::runtime_error("write failed for " + path_.string());
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

namespace {

void write_json(const fs::path& path, const Json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string str(double v) { return number_text(v); }

// ---------------------------------------------------------------------------
// Experiments

struct Context {
  std::uint64_t seed = 1;
  Executor* executor = nullptr;
  fs::path dir;
  std::vector<std::string> outputs;
  Json summary = Json::object();
  std::uint64_t steps = 0;
  bool accepted = true;

  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return dir / name;
  }
};

// Parsed and validated parameters; run() needs nothing else.
struct Experiment {
  virtual ~Experiment() = default;
  virtual void execute(Context& ctx) = 0;
};

double kappa_to_a(Config& cfg, bool bessel) {
  const double kappa = cfg.number("kappa", 4.0);
  if (!(kappa > 0.0)) throw ValidationError("kappa", "must be positive");
  if (bessel && !(kappa < 8.0)) throw ValidationError("kappa", "Bessel-law drivers need κ < 8");
  return 2.0 / kappa;
}

AngleConfig start_config(int n, double offset) { return AngleConfig::equally_spaced(n, offset); }

int checked_n(Config& cfg, int fallback, int lo, int hi) {
  const int n = cfg.integer("n", fallback);
  if (n < lo || n > hi) throw ValidationError("n", "must be between " + std::to_string(lo) + " and " + std::to_string(hi));
  return n;
}

double positive(Config& cfg, const std::string& key, double fallback) {
  const double v = cfg.number(key, fallback);
  if (!(v > 0.0)) throw ValidationError(key, "must be positive");
  return v;
}

Scheme parse_scheme(Config& cfg) {
  const std::string s = cfg.text("scheme", "heun");
  if (s == "heun") return Scheme::heun;
  if (s == "euler") return Scheme::euler;
  throw ValidationError("scheme", "must be heun or euler");
}

// identities --------------------------------------------------------------

struct Identities final : Experiment {
  int n_min, n_max, configs;
  std::vector<double> alphas;
  double min_gap;

  explicit Identities(Config& cfg) {
    n_min = cfg.integer("n_min", 2);
    n_max = cfg.integer("n_max", 6);
    if (n_min < 2 || n_max > kMaxAngles || n_min > n_max) throw ValidationError("n_min", "need 2 <= n_min <= n_max <= 16");
    configs = cfg.integer("configs", 1000);
    if (configs < 1) throw ValidationError("configs", "must be positive");
    alphas = cfg.numbers("alphas", {0.5, 1.0, 2.0});
    for (double a : alphas)
      if (!(a > 0.0)) throw ValidationError("alphas", "every alpha must be positive");
    min_gap = positive(cfg, "min_gap", 0.1);
    if (min_gap * n_max >= std::numbers::pi) throw ValidationError("min_gap", "too large for n_max angles");
  }

  static AngleConfig random_config(int n, RandomStream& rng, double gap) {
    for (;;) {
      AngleVector a(n);
      for (int j = 0; j < n; ++j) a(j) = std::numbers::pi * rng.uniform();
      std::sort(a.data(), a.data() + n);
      if (cyclic_gaps(a).minCoeff() >= gap) return AngleConfig::from_ordered(a);
    }
  }

  void execute(Context& ctx) override {
    CsvWriter csv(ctx.file("identities.v1.csv"), {"check", "n", "alpha", "configs", "max_error", "tolerance", "pass"});
    int failed = 0, rows = 0;
    std::uint64_t stream = 0;
    for (int n = n_min; n <= n_max; ++n) {
      RandomStream rng(ctx.seed, stream++);
      double worst = 0.0;
      for (int k = 0; k < configs; ++k)
        worst = std::max(worst, check_cot_identity(random_config(n, rng, 1e-6)).relative_discrepancy());
      const bool ok = worst < 1e-9;
      failed += !ok;
      ++rows;
      csv.row({"cot_identity", std::to_string(n), "", std::to_string(configs), str(worst), "1e-09", ok ? "1" : "0"});
      for (double alpha : alphas) {
        RandomStream r2(ctx.seed, stream++);
        double grad_err = 0.0, lap_err = 0.0;
        for (int k = 0; k < configs; ++k) {
          const AngleConfig cfg = random_config(n, r2, min_gap);
          const AngleVector& th = cfg.angles();
          const double f0 = product_F(th, alpha);
          const AngleVector grad = f0 * drift(cfg, alpha);
          const double hg = 1e-5, hl = 1e-3;
          double lap = 0.0;
          for (int j = 0; j < n; ++j) {
            AngleVector p = th, m = th;
            p(j) += hg;
            m(j) -= hg;
            const double fd = (product_F(p, alpha) - product_F(m, alpha)) / (2 * hg);
            grad_err = std::max(grad_err, std::abs(fd - grad(j)) / std::max(std::abs(grad(j)), f0));
            const auto at = [&](double s) {
              AngleVector q = th;
              q(j) += s;
              return product_F(q, alpha);
            };
            // Fourth-order stencil.
            lap += (-at(2 * hl) + 16 * at(hl) - 30 * f0 + 16 * at(-hl) - at(-2 * hl)) / (12 * hl * hl);
          }
          const double ratio = laplacian_ratio(cfg, alpha);
          lap_err = std::max(lap_err, std::abs(lap / f0 - ratio) / std::max(1.0, std::abs(ratio)));
        }
        for (const auto& [name, err] : {std::pair{"gradient", grad_err}, std::pair{"laplacian", lap_err}}) {
          const bool good = err < 1e-4;
          failed += !good;
          ++rows;
          csv.row({name, std::to_string(n), str(alpha), std::to_string(configs), str(err), "0.0001", good ? "1" : "0"});
        }
      }
    }
    ctx.summary["checks"] = rows;
    ctx.summary["failed"] = failed;
    ctx.steps = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(configs);
    ctx.accepted = failed == 0;
  }
};

// dyson -------------------------------------------------------------------

struct Dyson final : Experiment {
  int n;
  double alpha, t_end, offset;
  std::string task;
  SimOptions sim;
  int record_every;

  explicit Dyson(Config& cfg) {
    n = checked_n(cfg, 2, 1, kMaxAngles);
    alpha = positive(cfg, "alpha", 0.5);
    t_end = positive(cfg, "t_end", 1.0);
    offset = cfg.number("start_offset", 0.1);
    task = cfg.text("task", "path");
    if (task != "path" && task != "martingale" && task != "feynman-kac")
      throw ValidationError("task", "must be path, martingale or feynman-kac");
    sim.dt = positive(cfg, "dt", 1e-3);
    sim.scheme = parse_scheme(cfg);
    sim.gap_floor = cfg.number("gap_floor", 0.1);
    const int paths = cfg.integer("paths", task == "path" ? 1 : 10000);
    if (paths < 1) throw ValidationError("paths", "must be positive");
    sim.n_paths = static_cast<std::size_t>(paths);
    record_every = cfg.integer("record_every", 10);
    if (record_every < 1) throw ValidationError("record_every", "must be positive");
    if (task != "path" && n < 2) throw ValidationError("n", "estimators need n >= 2");
    sim.validate();
  }

  void execute(Context& ctx) override {
    sim.seed = ctx.seed;
    const AngleConfig cfg0 = start_config(n, offset);
    if (task == "path") {
      CsvWriter csv(ctx.file("dyson_path.v1.csv"), {"path", "t", "j", "theta"});
      std::uint64_t rejections = 0;
      for (std::size_t p = 0; p < sim.n_paths; ++p) {
        const SdePath path = simulate(cfg0, alpha, t_end, sim, p);
        rejections += path.diagnostics.rejections;
        ctx.steps += path.times.size() - 1;
        for (std::size_t k = 0; k < path.times.size(); k += static_cast<std::size_t>(record_every))
          for (int j = 0; j < n; ++j)
            csv.row({std::to_string(p), str(path.times[k]), std::to_string(j), str(path.lifted[k](j))});
      }
      ctx.summary["rejections"] = rejections;
      return;
    }
    const auto steps_per_path = static_cast<std::uint64_t>(std::ceil(t_end / sim.dt - 1e-9));
    if (task == "martingale") {
      const Estimate e = check_martingale_N(cfg0, alpha, t_end, sim, *ctx.executor);
      CsvWriter csv(ctx.file("martingale.v1.csv"), {"t", "mean", "std_error", "n_samples"});
      csv.row({str(t_end), str(e.mean), str(e.std_error), std::to_string(e.n_samples)});
      ctx.summary["mean"] = e.mean;
      ctx.summary["std_error"] = e.std_error;
      ctx.summary["z"] = std::abs(e.mean - 1.0) / e.std_error;
      ctx.steps = steps_per_path * sim.n_paths;
      return;
    }
    CsvWriter csv(ctx.file("feynman_kac.v1.csv"), {"method", "t", "mean", "std_error", "n_samples"});
    SimOptions o = sim;
    const Estimate direct = estimate_feynman_kac(cfg0, alpha, t_end, o, FeynmanKacMethod::direct, *ctx.executor);
    o.stream_offset = sim.n_paths;
    const Estimate tilted = estimate_feynman_kac(cfg0, alpha, t_end, o, FeynmanKacMethod::tilted, *ctx.executor);
    csv.row({"direct", str(t_end), str(direct.mean), str(direct.std_error), std::to_string(direct.n_samples)});
    csv.row({"tilted", str(t_end), str(tilted.mean), str(tilted.std_error), std::to_string(tilted.n_samples)});
    ctx.summary["z"] = Estimate::z_score(direct, tilted);
    ctx.steps = 2 * steps_per_path * sim.n_paths;
  }
};

// trace -------------------------------------------------------------------

struct Trace final : Experiment {
  int n;
  double a, t_end, offset;
  DriverLaw law;
  SimOptions sim;
  TraceOptions trace;

  explicit Trace(Config& cfg) {
    n = checked_n(cfg, 2, 1, kMaxAngles);
    law = [&] {
      try {
        return driver_law_from_string(cfg.text("law", "n-radial"));
      } catch (const std::exception&) {
        throw ValidationError("law", "must be independent, locally-independent or n-radial");
      }
    }();
    a = kappa_to_a(cfg, law != DriverLaw::independent);
    if (law == DriverLaw::independent && n != 2) throw ValidationError("n", "the independent law needs n = 2");
    t_end = positive(cfg, "t_end", 0.5);
    offset = cfg.number("start_offset", 0.0);
    sim.dt = positive(cfg, "dt", 1e-3);
    sim.scheme = parse_scheme(cfg);
    const int stride = cfg.integer("stride", 10);
    if (stride < 1) throw ValidationError("stride", "must be positive");
    trace.stride = static_cast<std::size_t>(stride);
    trace.tol = positive(cfg, "tol", 1e-9);
    sim.validate();
  }

  void execute(Context& ctx) override {
    sim.seed = ctx.seed;
    const DrivingPaths d = generate_driver(law, start_config(n, offset), a, t_end, sim);
    const TraceSet set = trace_curves(d, trace, *ctx.executor);
    CsvWriter csv(ctx.file("trace.v1.csv"), {"curve_index", "t", "re", "im", "accuracy_flag"});
    std::size_t flagged = 0;
    for (std::size_t j = 0; j < set.curves.size(); ++j)
      for (const TracePoint& p : set.curves[j]) {
        csv.row({std::to_string(j), str(p.t), str(p.z.real()), str(p.z.imag()), p.accuracy_flag ? "1" : "0"});
        flagged += p.accuracy_flag;
      }
    ctx.summary["a"] = a;
    ctx.summary["terminated"] = d.terminated;
    if (d.terminated) ctx.summary["termination_reason"] = d.termination_reason;
    ctx.summary["flagged_points"] = flagged;
    ctx.steps = d.times.empty() ? 0 : d.times.size() - 1;
  }
};

// decay -------------------------------------------------------------------

struct Decay final : Experiment {
  int n;
  double alpha, offset;
  std::vector<double> times;
  FeynmanKacMethod method;
  SimOptions sim;

  explicit Decay(Config& cfg) {
    n = checked_n(cfg, 2, 2, kMaxAngles);
    alpha = positive(cfg, "alpha", 0.5);
    offset = cfg.number("start_offset", 0.0);
    times = cfg.numbers("times", {1.0, 1.5, 2.0, 2.5, 3.0});
    if (times.size() < 3) throw ValidationError("times", "need at least three times");
    for (std::size_t i = 0; i < times.size(); ++i)
      if (!(times[i] > 0.0) || (i && times[i] <= times[i - 1])) throw ValidationError("times", "must be positive and increasing");
    const std::string m = cfg.text("method", "tilted");
    if (m != "tilted" && m != "direct") throw ValidationError("method", "must be tilted or direct");
    method = m == "tilted" ? FeynmanKacMethod::tilted : FeynmanKacMethod::direct;
    sim.dt = positive(cfg, "dt", 1e-3);
    sim.scheme = parse_scheme(cfg);
    const int paths = cfg.integer("paths", 10000);
    if (paths < 2) throw ValidationError("paths", "need at least two paths");
    sim.n_paths = static_cast<std::size_t>(paths);
    sim.validate();
  }

  void execute(Context& ctx) override {
    sim.seed = ctx.seed;
    const AngleConfig cfg0 = start_config(n, offset);
    const auto curve = feynman_kac_curve(cfg0, alpha, times, sim, method, *ctx.executor);
    CsvWriter csv(ctx.file("decay.v1.csv"), {"t", "mean", "std_error"});
    for (const auto& p : curve) csv.row({str(p.t), str(p.estimate.mean), str(p.estimate.std_error)});
    const DecayFit fit = fit_decay_rate(curve);
    ctx.summary["slope"] = fit.slope;
    ctx.summary["slope_stderr"] = fit.slope_stderr;
    ctx.summary["expected_slope"] = -ModelParams{n, alpha}.decay_rate();
    ctx.summary["intercept"] = fit.intercept;
    const Estimate i3 = normalization_integral(n, 3 * alpha), i4 = normalization_integral(n, 4 * alpha);
    ctx.summary["expected_intercept"] = std::log(product_F(cfg0, alpha) * i3.mean / i4.mean);
    for (double t : times) ctx.steps += static_cast<std::uint64_t>(std::ceil(t / sim.dt - 1e-9)) * sim.n_paths;
  }
};

// approx ------------------------------------------------------------------

struct Approx final : Experiment {
  ConvergenceSetup setup;
  ChordalOptions options;

  explicit Approx(Config& cfg) {
    setup.a = kappa_to_a(cfg, true);
    setup.u = positive(cfg, "u", 1.0);
    const double x1 = cfg.number("x1", -1.0), x2 = cfg.number("x2", 1.0);
    if (!(x1 < x2)) throw ValidationError("x1", "must be below x2");
    setup.start = {x1, x2};
    const int lo = cfg.integer("h_min_exp", 4), hi = cfg.integer("h_max_exp", 9);
    const int fine = cfg.integer("dt_exp", 12);
    if (lo < 0 || hi < lo + 1 || fine < hi) throw ValidationError("h_max_exp", "need 0 <= h_min_exp < h_max_exp <= dt_exp");
    if (fine > 16) throw ValidationError("dt_exp", "at most 16");
    for (int e = lo; e <= hi; ++e) setup.h_list.push_back(std::ldexp(1.0, -e));
    options.dt = std::ldexp(1.0, -fine);
    const int runs = cfg.integer("runs", 50);
    if (runs < 1) throw ValidationError("runs", "must be positive");
    setup.n_runs = static_cast<std::size_t>(runs);
    options.gap_floor = positive(cfg, "gap_floor", 1e-3);
    const std::string noise = cfg.text("noise", "brownian");
    if (noise != "brownian" && noise != "zero") throw ValidationError("noise", "must be brownian or zero");
    setup.zero_noise = noise == "zero";
  }

  void execute(Context& ctx) override {
    options.seed = ctx.seed;
    const ConvergenceStudy study = convergence_study(setup, options, *ctx.executor);
    CsvWriter csv(ctx.file("approx.v1.csv"), {"h", "run_id", "K", "truncated_flag"});
    for (std::size_t i = 0; i < setup.h_list.size(); ++i)
      for (std::size_t r = 0; r < setup.n_runs; ++r)
        csv.row({str(setup.h_list[i]), std::to_string(r), str(study.K[i][r]), study.truncated[r] ? "1" : "0"});
    Json rows = Json::array();
    for (const auto& row : study.rows) rows.push_back({{"h", row.h}, {"median_K", row.median_K}, {"runs_used", row.runs_used}});
    ctx.summary["medians"] = rows;
    ctx.summary["order"] = study.order;
    ctx.summary["order_ci95"] = {study.order - 1.96 * study.order_stderr, study.order + 1.96 * study.order_stderr};
    ctx.summary["monotone"] = study.monotone;
    ctx.summary["order_at_least_0.3"] = study.order_ok;
    ctx.steps = static_cast<std::uint64_t>(std::llround(1.0 / (setup.u * options.dt))) * setup.n_runs;
    ctx.accepted = study.order_ok && study.monotone;
  }
};

// lattice -----------------------------------------------------------------

Site parse_site(const std::string& key, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ValidationError(key, "sites are written x,y");
  const double x = parse_number(key, text.substr(0, comma)), y = parse_number(key, text.substr(comma + 1));
  if (x != std::floor(x) || y != std::floor(y)) throw ValidationError(key, "site coordinates must be integers");
  return {static_cast<int>(x), static_cast<int>(y)};
}

LatticeDomain parse_domain(const std::string& text) {
  if (trim(text).rfind("rect", 0) == 0) return LatticeDomain::parse(text);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error&) {
    throw ValidationError("domain", "expected \"rect WxH\" or a JSON list of [x, y] pairs");
  }
  std::vector<Site> sites;
  if (!j.is_array()) throw ValidationError("domain", "JSON domain must be a list");
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
      throw ValidationError("domain", "each site must be an [x, y] integer pair");
    sites.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  return LatticeDomain(std::move(sites));
}

struct Lattice final : Experiment {
  std::unique_ptr<LatticeDomain> domain;
  Site target;
  std::vector<Site> starts;
  std::vector<double> cs, betas;
  SawOptions saw;

  explicit Lattice(Config& cfg) {
    domain = std::make_unique<LatticeDomain>(parse_domain(cfg.text("domain", "rect 4x4")));
    target = parse_site("target", cfg.text("target", "1,1"));
    if (!domain->contains(target)) throw ValidationError("target", "must lie in the domain");
    std::stringstream ss(cfg.text("starts", "4,1;1,4"));
    std::string item;
    while (std::getline(ss, item, ';')) starts.push_back(parse_site("starts", item));
    if (starts.empty() || starts.size() > 4) throw ValidationError("starts", "need 1 to 4 start sites");
    if (domain->size() > 64) throw ValidationError("domain", "exhaustive sums need at most 64 sites");
    cs = cfg.numbers("c", {0.0, -2.0});
    betas = cfg.numbers("beta", {1.0});
    const int budget = cfg.integer("budget", 50000000);
    if (budget < 1) throw ValidationError("budget", "must be positive");
    saw.budget = static_cast<std::size_t>(budget);
  }

  void execute(Context& ctx) override {
    CsvWriter csv(ctx.file("lattice.v1.csv"), {"beta", "c", "n", "partition_sum"});
    Json walks = Json::array();
    for (double beta : betas)
      for (double c : cs)
        for (std::size_t n = 1; n <= starts.size(); ++n) {
          const std::vector<Site> first(starts.begin(), starts.begin() + static_cast<std::ptrdiff_t>(n));
          const PartitionResult z = partition_sum(*domain, first, target, c, beta, saw, *ctx.executor);
          csv.row({str(beta), str(c), std::to_string(n), str(z.sum)});
          ctx.steps += z.disjoint_tuples;
          if (walks.empty() && n == starts.size())
            for (std::size_t w : z.walks_per_start) walks.push_back(w);
        }
    ctx.summary["sites"] = domain->size();
    ctx.summary["walks_per_start"] = walks;
    ctx.summary["log_F_two_site"] = loop_mass(LatticeDomain({{0, 0}, {1, 0}}), {{0, 0}});
  }
};

std::unique_ptr<Experiment> make_experiment(const std::string& kind, Config& cfg) {
  if (kind == "identities") return std::make_unique<Identities>(cfg);
  if (kind == "dyson") return std::make_unique<Dyson>(cfg);
  if (kind == "trace") return std::make_unique<Trace>(cfg);
  if (kind == "decay") return std::make_unique<Decay>(cfg);
  if (kind == "approx") return std::make_unique<Approx>(cfg);
  if (kind == "lattice") return std::make_unique<Lattice>(cfg);
  throw ValidationError("kind", "unknown experiment \"" + kind + "\"");
}

fs::path base_directory(const RunRequest& request) {
  if (request.out_dir) return *request.out_dir;
  if (const char* env = std::getenv("NRSLE_OUT_DIR"); env && *env) return env;
  return "runs";
}

}  // namespace

const std::vector<std::string>& kinds() {
  static const std::vector<std::string> k = {"identities", "dyson", "trace", "decay", "approx", "lattice"};
  return k;
}

RunResult run(const RunRequest& request) {
  RunResult result;
  std::unique_ptr<Experiment> experiment;
  Json manifest = Json::object();
  try {
    Config cfg = request.config ? Config::from_file(*request.config, request.kind) : Config();
    experiment = make_experiment(request.kind, cfg);
    cfg.finish();
    if (request.threads < 1) throw ValidationError("threads", "must be at least 1");

    std::string canonical = "kind=" + request.kind + "\nversion=" NRSLE_VERSION "\nseed=" + std::to_string(request.seed) + "\n";
    for (const auto& [k, v] : cfg.echo()) canonical += k + "=" + v + "\n";
    const std::string hash = sha256_hex(canonical);
    manifest["kind"] = request.kind;
    manifest["version"] = NRSLE_VERSION;
    manifest["seed"] = request.seed;
    manifest["parameters"] = cfg.echo();
    manifest["hash"] = hash;
    result.directory = base_directory(request) / (request.kind + "-" + hash.substr(0, 12));
  } catch (const ValidationError& e) {
    result.exit_code = kValidation;
    result.message = std::string("validation error: ") + e.what();
    return result;
  }

  try {
    fs::create_directories(result.directory);
    std::unique_ptr<Executor> pool;
    if (request.threads > 1) pool = std::make_unique<ThreadPoolExecutor>(request.threads);
    Context ctx;
    ctx.seed = request.seed;
    ctx.executor = pool ? pool.get() : &serial_executor();
    ctx.dir = result.directory;
    const auto start = std::chrono::steady_clock::now();
    experiment->execute(ctx);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ctx.summary["manifest_hash"] = manifest["hash"];
    ctx.summary["accepted"] = ctx.accepted;
    write_json(ctx.file("summary.json"), ctx.summary);
    {
      std::ofstream ini(ctx.file("resolved.ini"), std::ios::binary);
      ini << '[' << request.kind << "]\n";
      for (const auto& [k, v] : manifest["parameters"].items()) ini << k << " = " << v.get<std::string>() << '\n';
    }
    manifest["threads"] = request.threads;
    manifest["outputs"] = ctx.outputs;
    manifest["wall_clock_seconds"] = seconds;
    manifest["steps"] = ctx.steps;
    write_json(result.directory / "manifest.json", manifest);
    if (!ctx.accepted) {
      result.exit_code = kAcceptance;
      result.message = "acceptance check failed; see " + (result.directory / "summary.json").string();
    }
  } catch (const ValidationError& e) {
    result.exit_code = kValidation;
    result.message = std::string("validation error: ") + e.what();
  } catch (const std::exception& e) {
    result.exit_code = kRuntime;
    result.message = std::string("runtime error: ") + e.what();
  }
  return result;
}

}  // namespace nrsle::harness
