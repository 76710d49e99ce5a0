#include "sfpe/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sfpe {

// ---- SHA-256 (FIPS 180-4) ----------------------------------------------

namespace {

constexpr std::array<std::uint32_t, 64> kSha256K = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
    0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
    0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
    0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
    0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
    0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
    0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2};

struct Sha256 {
  std::array<std::uint32_t, 8> h = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                                    0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  std::array<std::uint8_t, 64> block{};
  std::size_t block_len = 0;
  std::uint64_t total = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void compress() {
    std::array<std::uint32_t, 64> w{};
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(block[4 * i]) << 24) | (std::uint32_t(block[4 * i + 1]) << 16) |
             (std::uint32_t(block[4 * i + 2]) << 8) | std::uint32_t(block[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    auto [a, b, c, d, e, f, g, hh] = h;
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = hh + s1 + ch + kSha256K[i] + w[i];
      const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = s0 + maj;
      hh = g;
      g = f;
      f = e;
      e = d + t1;
      d = c;
      c = b;
      b = a;
      a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
  }

  void update(const std::uint8_t* data, std::size_t len) {
    total += len;
    while (len > 0) {
      const std::size_t take = std::min(len, block.size() - block_len);
      std::memcpy(block.data() + block_len, data, take);
      block_len += take;
      data += take;
      len -= take;
      if (block_len == block.size()) {
        compress();
        block_len = 0;
      }
    }
  }

  std::string finish() {
    const std::uint64_t bits = total * 8;
    const std::uint8_t one = 0x80;
    update(&one, 1);
    const std::uint8_t zero = 0;
    while (block_len != 56) update(&zero, 1);
    std::array<std::uint8_t, 8> len_bytes;
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(len_bytes.data(), 8);
    std::ostringstream out;
    for (std::uint32_t v : h)
      for (int i = 3; i >= 0; --i) {
        static const char* hex = "0123456789abcdef";
        out << hex[(v >> (8 * i + 4)) & 0xf] << hex[(v >> (8 * i)) & 0xf];
      }
    return out.str();
  }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
  Sha256 ctx;
  ctx.update(static_cast<const std::uint8_t*>(data), len);
  return ctx.finish();
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Sha256 ctx;
  std::array<char, 65536> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    ctx.update(reinterpret_cast<const std::uint8_t*>(buf.data()),
               static_cast<std::size_t>(in.gcount()));
  }
  return ctx.finish();
}

// ---- pools file ---------------------------------------------------------

namespace {

void write_le_doubles(std::ostream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], 8);
      bits = __builtin_bswap64(bits);
      out.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
}

void read_le_doubles(std::istream& in, double* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
  if (static_cast<std::size_t>(in.gcount()) != count * 8)
    throw std::runtime_error("pools file truncated");
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], 8);
      bits = __builtin_bswap64(bits);
      std::memcpy(&data[i], &bits, 8);
    }
  }
}

}  // namespace

void write_pools(const std::filesystem::path& path, const std::vector<SamplePool>& pools) {
  if (pools.empty()) throw std::domain_error("write_pools: no pools");
  const int d = pools[0].dim();
  const auto n = pools[0].size();
  for (const auto& p : pools)
    if (p.dim() != d || p.size() != n)
      throw std::domain_error("write_pools: pools must share shape");
  nlohmann::json header = {{"format", "sfpe-pools"}, {"version", 1},
                           {"m", pools.size()},      {"d", d},
                           {"n", n},                 {"generation", pools[0].generation},
                           {"seed", pools[0].seed}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header.dump() << '\n';
  for (const auto& p : pools)
    write_le_doubles(out, p.values.data(), static_cast<std::size_t>(p.values.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<SamplePool> read_pools(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header = parse_json_text(line, path.string());
  if (header.value("format", "") != "sfpe-pools")
    throw std::runtime_error(path.string() + ": not a pools file");
  const int m = header.at("m").get<int>();
  const int d = header.at("d").get<int>();
  const auto n = header.at("n").get<std::int64_t>();
  std::vector<SamplePool> pools(static_cast<std::size_t>(m));
  for (auto& p : pools) {
    p.values.resize(d, n);
    p.generation = header.value("generation", 0);
    p.seed = header.value("seed", std::uint64_t{0});
    read_le_doubles(in, p.values.data(), static_cast<std::size_t>(p.values.size()));
  }
  return pools;
}

// ---- CSV ----------------------------------------------------------------

namespace {

void write_double(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_density_csv(const std::filesystem::path& path, const DensityGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (grid.dim() == 1) {
    out << "x,value\n";
    for (int i = 0; i < grid.axes[0].n; ++i) {
      write_double(out, grid.axes[0].at(i));
      out << ',';
      write_double(out, grid.values(i));
      out << '\n';
    }
  } else {
    out << "x0,x1,value\n";
    const int n1 = grid.axes[1].n;
    for (int i0 = 0; i0 < grid.axes[0].n; ++i0)
      for (int i1 = 0; i1 < n1; ++i1) {
        write_double(out, grid.axes[0].at(i0));
        out << ',';
        write_double(out, grid.axes[1].at(i1));
        out << ',';
        write_double(out, grid.values(static_cast<Eigen::Index>(i0) * n1 + i1));
        out << '\n';
      }
  }
}

void write_samples_csv(const std::filesystem::path& path, const Eigen::MatrixXd& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index j = 0; j < samples.rows(); ++j) out << (j ? ",x" : "x") << j;
  out << '\n';
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    for (Eigen::Index j = 0; j < samples.rows(); ++j) {
      if (j) out << ',';
      write_double(out, samples(j, i));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty csv");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");
  Eigen::MatrixXd out(rows[0].size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw std::runtime_error(path.string() + ": ragged csv");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[i][j];
  }
  return out;
}

// ---- JSON views -----------------------------------------------------------

nlohmann::json to_json(const ConditionReport& report) {
  nlohmann::json entries;
  for (const auto& [name, e] : report.entries) {
    entries[name] = {{"verdict", to_string(e.verdict)},
                     {"estimate", e.estimate},
                     {"std_error", e.std_error},
                     {"n", e.n},
                     {"note", e.note}};
  }
  return {{"conditions", entries},
          {"a_hat", report.a_hat},
          {"lambda_hat", report.lambda_hat},
          {"nu_hat", report.nu_hat},
          {"a2_r_squared", report.a2_r_squared},
          {"eta_feasible", report.eta_feasible},
          {"n_draws", report.n_draws}};
}

nlohmann::json to_json(const SupportAudit& audit) {
  return {{"verdict", to_string(audit.verdict)},
          {"min_eig_ratio", audit.min_eig_ratio},
          {"n", audit.n},
          {"note", audit.note}};
}

nlohmann::json to_json(const LatticeAudit& audit) {
  std::vector<double> dir;
  for (Eigen::Index i = 0; i < audit.worst_direction.size(); ++i)
    dir.push_back(audit.worst_direction(i));
  return {{"verdict", to_string(audit.verdict)},
          {"worst_abs", audit.worst_abs},
          {"worst_scale", audit.worst_scale},
          {"worst_direction", dir},
          {"note", audit.note}};
}

nlohmann::json to_json(const SolveDiagnostics& diag) {
  nlohmann::json iters = nlohmann::json::array();
  for (std::size_t t = 0; t < diag.distances.size(); ++t) {
    nlohmann::json it;
    it["distances"] = diag.distances[t];
    if (t < diag.noise_floors.size()) it["noise_floors"] = diag.noise_floors[t];
    it["overflow_slots"] = diag.overflow_slots[t];
    nlohmann::json means = nlohmann::json::array();
    nlohmann::json covs = nlohmann::json::array();
    for (std::size_t r = 0; r < diag.means[t].size(); ++r) {
      std::vector<double> mv(diag.means[t][r].data(),
                             diag.means[t][r].data() + diag.means[t][r].size());
      means.push_back(mv);
      std::vector<double> cv(diag.covariances[t][r].data(),
                             diag.covariances[t][r].data() + diag.covariances[t][r].size());
      covs.push_back(cv);
    }
    it["means"] = means;
    it["covariances"] = covs;
    iters.push_back(it);
  }
  return {{"iterations", diag.iterations},
          {"converged", diag.converged},
          {"stop_rule", diag.stop_rule},
          {"per_iteration", iters}};
}

nlohmann::json to_json(const DensityGrid& grid) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& ax : grid.axes)
    axes.push_back({{"min", ax.min}, {"step", ax.step}, {"n", ax.n}});
  nlohmann::json j = {{"axes", axes},
                      {"method", grid.method == DensityMethod::kKde ? "kde" : "fourier"},
                      {"total_mass", grid.total_mass()},
                      {"min_value", grid.values.minCoeff()},
                      {"max_value", grid.values.maxCoeff()}};
  if (grid.method == DensityMethod::kKde) {
    std::vector<double> bw(grid.bandwidth.data(), grid.bandwidth.data() + grid.bandwidth.size());
    j["bandwidth"] = bw;
  } else {
    j["window"] = grid.taper == Taper::kHann ? "hann" : "none";
    j["max_imag_ratio"] = grid.max_imag_ratio;
  }
  return j;
}

nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // translate byte offset into line/column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ": line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path.string());
}

namespace {

SplitVectorLaw split_law_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j == "binary_uniform") return SplitVectorLaw::binary_uniform();
    throw ConfigError("unknown split vector law: " + j.get<std::string>());
  }
  const std::string kind = j.value("kind", "");
  if (kind == "binary_uniform") return SplitVectorLaw::binary_uniform();
  if (kind == "deterministic") return SplitVectorLaw::deterministic(j.at("v").get<std::vector<double>>());
  if (kind == "dirichlet")
    return SplitVectorLaw::dirichlet(j.at("b").get<int>(), j.at("alpha").get<double>());
  throw ConfigError("unknown split vector law kind: " + kind);
}

}  // namespace

ModelConfig model_from_json(const nlohmann::json& j) {
  const std::string name = j.at("model").get<std::string>();
  if (name == "quicksort") return ModelConfig::quicksort();
  if (name == "quicksort2d") return ModelConfig::quicksort2d();
  if (name == "rrt") return ModelConfig::rrt();
  if (name == "urn_det")
    return ModelConfig::urn_det(j.at("a").get<int>(), j.at("b").get<int>(), j.at("c").get<int>(),
                                j.at("d").get<int>());
  if (name == "urn_rand")
    return ModelConfig::urn_rand(j.at("p1").get<double>(), j.at("p2").get<double>());
  if (name == "urn_multi") {
    const auto rows = j.at("replacement").get<std::vector<std::vector<int>>>();
    Eigen::MatrixXi r(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) throw ConfigError("urn_multi: ragged matrix");
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    const auto lam = j.at("lambda").get<std::vector<double>>();
    if (lam.size() != 2) throw ConfigError("urn_multi: lambda must be [re, im]");
    return ModelConfig::urn_multi(std::move(r), {lam[0], lam[1]});
  }
  if (name == "split") {
    return ModelConfig::split(split_law_from_json(
        j.contains("split_vector") ? j.at("split_vector") : nlohmann::json("binary_uniform")));
  }
  if (name == "split2d") {
    auto law = split_law_from_json(
        j.contains("split_vector") ? j.at("split_vector") : nlohmann::json("binary_uniform"));
    std::optional<double> c;
    if (j.contains("c")) c = j.at("c").get<double>();
    return ModelConfig::split2d(std::move(law), c);
  }
  throw ConfigError("unknown model: " + name);
}

namespace {

// custom systems: per-equation finite-support law over (matrices, shift)
// atoms with fixed term targets
EquationSystem custom_system_from_json(const nlohmann::json& j) {
  const int m = j.at("m").get<int>();
  const int d = j.at("d").get<int>();
  const auto& eqs = j.at("equations");
  if (!eqs.is_array() || static_cast<int>(eqs.size()) != m)
    throw ConfigError("custom: need exactly m equations");

  std::vector<EquationSystem::IndexMap> maps;
  std::vector<EquationSystem::Sampler> samplers;
  int max_terms = 1;
  for (const auto& eq : eqs) {
    const auto targets = eq.at("targets").get<std::vector<int>>();
    for (int t : targets)
      if (t < 0 || t >= m) throw ConfigError("custom: target outside [0, m)");
    max_terms = std::max(max_terms, static_cast<int>(targets.size()));

    struct Atom {
      double prob;
      std::vector<Eigen::MatrixXd> matrices;
      Eigen::VectorXd shift;
    };
    std::vector<Atom> atoms;
    double total = 0;
    for (const auto& aj : eq.at("atoms")) {
      Atom atom;
      atom.prob = aj.at("prob").get<double>();
      if (!(atom.prob > 0)) throw ConfigError("custom: atom prob must be positive");
      total += atom.prob;
      const auto mats = aj.at("matrices").get<std::vector<std::vector<std::vector<double>>>>();
      if (mats.size() != targets.size())
        throw ConfigError("custom: one matrix per target required");
      for (const auto& rows : mats) {
        Eigen::MatrixXd mat(d, d);
        if (static_cast<int>(rows.size()) != d) throw ConfigError("custom: matrix must be d x d");
        for (int r = 0; r < d; ++r) {
          if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != d)
            throw ConfigError("custom: matrix must be d x d");
          for (int c = 0; c < d; ++c)
            mat(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        atom.matrices.push_back(std::move(mat));
      }
      const auto shift = aj.at("shift").get<std::vector<double>>();
      if (static_cast<int>(shift.size()) != d) throw ConfigError("custom: shift must have d entries");
      atom.shift = Eigen::Map<const Eigen::VectorXd>(shift.data(), d);
      atoms.push_back(std::move(atom));
    }
    if (atoms.empty()) throw ConfigError("custom: equation needs at least one atom");
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("custom: atom probs must sum to 1");

    maps.push_back([targets](int pos) { return targets[static_cast<std::size_t>(pos)]; });
    samplers.push_back([atoms](SplitRng& rng) {
      double u = rng.uniform();
      std::size_t pick = atoms.size() - 1;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (u < atoms[i].prob) {
          pick = i;
          break;
        }
        u -= atoms[i].prob;
      }
      RawDraw draw;
      draw.matrices = atoms[pick].matrices;
      draw.shift = atoms[pick].shift;
      return draw;
    });
  }
  EquationSystem sys(m, d, std::move(maps), std::move(samplers), SumGuard::kFiniteTerms,
                     std::max(64, max_terms));
  if (j.contains("mean_constraint")) {
    const auto rows = j.at("mean_constraint").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd mc(d, m);
    if (static_cast<int>(rows.size()) != d) throw ConfigError("custom: mean_constraint must be d x m");
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != m)
        throw ConfigError("custom: mean_constraint must be d x m");
      for (int c = 0; c < m; ++c)
        mc(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    sys.set_mean_constraint(mc);
  }
  return sys;
}

}  // namespace

EquationSystem system_from_json(const nlohmann::json& j) {
  const std::string name = j.at("model").get<std::string>();
  if (name == "custom") return custom_system_from_json(j);
  return build(model_from_json(j));
}

// ---- run manifest ---------------------------------------------------------

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& [p, digest] : manifest.outputs)
    outputs.push_back({{"path", p}, {"sha256", digest}});
  nlohmann::json j = {{"command", manifest.command}, {"config", manifest.config},
                      {"seed", manifest.seed},       {"threads", manifest.threads},
                      {"version", manifest.version}, {"wall_clock_s", manifest.wall_clock_s},
                      {"outputs", outputs}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  const nlohmann::json j = parse_json_file(path);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.threads = j.value("threads", 1);
  m.version = j.value("version", "");
  m.wall_clock_s = j.value("wall_clock_s", 0.0);
  for (const auto& o : j.at("outputs"))
    m.outputs.emplace_back(o.at("path").get<std::string>(), o.at("sha256").get<std::string>());
  return m;
}

}  // namespace sfpe
