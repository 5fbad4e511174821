#pragma once

// Converged ECB spectra: windowed diagonalization (optionally per parity sector),
// the tail + cutoff-stability convergence test, parity labels and an on-disk cache.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dicke/ecb.hpp"

namespace dicke {

enum class Parity { even, odd, unresolved };

inline std::string_view to_string(Parity p) {
  switch (p) {
    case Parity::even: return "+";
    case Parity::odd: return "-";
    default: return "unresolved";
  }
}

struct SolveOptions {
  bool parity_blocks = false;
  std::optional<double> energy_max;  ///< raw energy E (not E/j); eigenpairs above it are dropped
  double tail_tol = 1e-8;
  int stability_shift = 10;
  double stability_tol = 1e-6;  ///< in units of omega0
  bool check_stability = true;
};

struct SpectrumSector {
  int parity = 0;
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;          ///< in sector coordinates
  Eigen::VectorXd tail;             ///< probability in the top shell N = n_max
  Eigen::VectorXd stability_shift;  ///< |E(n_max) - E(n_max + shift)|, NaN when unavailable
};

struct StateRef {
  int sector;
  Index local;
};

struct Spectrum {
  DickeParams params;
  ECBasisSpec spec;
  SolveOptions options;
  std::vector<SpectrumSector> sectors;
  std::vector<double> energies;  ///< all stored states, ascending
  std::vector<StateRef> order;
  std::vector<char> converged;
  Index converged_count = 0;
  std::vector<Parity> parity;
  std::uint64_t params_hash = 0;

  Index size() const { return static_cast<Index>(energies.size()); }

  SectorBasis sector_basis(int s) const { return SectorBasis::make(spec, sectors[s].parity); }

  /// Eigenvector k in full ECB coordinates.
  Eigen::VectorXd full_vector(Index k) const {
    const StateRef r = order.at(k);
    return sector_basis(r.sector).embed(sectors[r.sector].vectors.col(r.local));
  }
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

template <class T>
std::uint64_t hash_value(const T& v, std::uint64_t h) {
  return fnv1a(&v, sizeof(T), h);
}

}  // namespace detail

/// Content hash of everything that determines a stored spectrum.
inline std::uint64_t spectrum_key(const DickeParams& params, const ECBasisSpec& spec, const SolveOptions& o) {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : {params.omega(), params.omega0(), params.gamma()}) h = detail::hash_value(v, h);
  h = detail::hash_value(params.two_j(), h);
  h = detail::hash_value(spec.two_j, h);
  h = detail::hash_value(spec.n_max, h);
  const std::int32_t blocks = o.parity_blocks ? 1 : 0;
  h = detail::hash_value(blocks, h);
  const double emax = o.energy_max.value_or(std::numeric_limits<double>::infinity());
  h = detail::hash_value(emax, h);
  const std::int32_t check = o.check_stability ? o.stability_shift : -1;
  h = detail::hash_value(check, h);
  return h;
}

/// Index of the largest prefix of converged states.
inline Index converged_prefix(const std::vector<char>& flags) {
  Index k = 0;
  while (k < static_cast<Index>(flags.size()) && flags[k]) ++k;
  return k;
}

/// State k is converged when its top-shell probability is below tail_tol and its energy
/// moves by less than stability_tol * omega0 when the cutoff is raised. With omega0 = 0
/// the basis is exact and every state counts as converged.
inline Index convergence_check(Spectrum& spectrum, double tail_tol) {
  const double w0 = spectrum.params.omega0();
  spectrum.converged.assign(spectrum.energies.size(), 0);
  for (Index k = 0; k < spectrum.size(); ++k) {
    if (w0 == 0.0) {
      spectrum.converged[k] = 1;
      continue;
    }
    const StateRef r = spectrum.order[k];
    const auto& sec = spectrum.sectors[r.sector];
    bool ok = sec.tail[r.local] < tail_tol;
    if (spectrum.options.check_stability) {
      const double shift = sec.stability_shift[r.local];
      ok = ok && std::isfinite(shift) && shift < spectrum.options.stability_tol * w0;
    }
    spectrum.converged[k] = ok ? 1 : 0;
  }
  spectrum.converged_count = converged_prefix(spectrum.converged);
  return spectrum.converged_count;
}

/// <E_k|Pi|E_k> evaluated with the basis involution (N, m) -> (-1)^N (N, -m).
inline double parity_expectation(const Spectrum& spectrum, Index k) {
  const StateRef r = spectrum.order.at(k);
  const int p = spectrum.sectors[r.sector].parity;
  if (p != 0) return p;
  const auto v = spectrum.sectors[r.sector].vectors.col(r.local);
  const ECBasisSpec& s = spectrum.spec;
  double acc = 0.0;
  for (int mi = 0; mi <= s.two_j; ++mi)
    for (int N = 0; N <= s.n_max; ++N)
      acc += ((N % 2 == 0) ? 1.0 : -1.0) * v[s.index(N, mi)] * v[s.index(N, s.two_j - mi)];
  return acc;
}

inline std::vector<Parity> parity_label(const Spectrum& spectrum) {
  std::vector<Parity> out(spectrum.energies.size(), Parity::unresolved);
  for (Index k = 0; k < spectrum.size(); ++k) {
    const double e = parity_expectation(spectrum, k);
    if (e > 0.99)
      out[k] = Parity::even;
    else if (e < -0.99)
      out[k] = Parity::odd;
  }
  return out;
}

namespace detail {

inline void merge_sectors(Spectrum& s) {
  s.energies.clear();
  s.order.clear();
  for (int i = 0; i < static_cast<int>(s.sectors.size()); ++i)
    for (Index k = 0; k < s.sectors[i].energies.size(); ++k) s.order.push_back({i, k});
  std::stable_sort(s.order.begin(), s.order.end(), [&](const StateRef& a, const StateRef& b) {
    return s.sectors[a.sector].energies[a.local] < s.sectors[b.sector].energies[b.local];
  });
  for (const auto& r : s.order) s.energies.push_back(s.sectors[r.sector].energies[r.local]);
}

inline Eigen::VectorXd top_shell_probability(const SectorBasis& basis, const Eigen::MatrixXd& vectors,
                                             int n_max) {
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(vectors.cols());
  for (Index s = 0; s < basis.dimension(); ++s)
    if (basis.shell[s] == n_max) tail += vectors.row(s).transpose().cwiseAbs2();
  return tail;
}

}  // namespace detail

inline Spectrum solve_spectrum(const DickeParams& params, const ECBasisSpec& spec, const SolveOptions& options = {}) {
  if (options.stability_shift < 1) throw std::invalid_argument("solve_spectrum: stability_shift must be >= 1");
  Spectrum out;
  out.params = params;
  out.spec = spec;
  out.options = options;
  out.params_hash = spectrum_key(params, spec, options);
  const std::vector<int> parities = options.parity_blocks ? std::vector<int>{1, -1} : std::vector<int>{0};
  const bool stability = options.check_stability && params.omega0() != 0.0;
  for (int p : parities) {
    SpectrumSector sec;
    sec.parity = p;
    Eigen::VectorXd reference;
    if (stability) {
      // the larger problem goes first so the two matrices never coexist
      const ECBasisSpec bigger{spec.two_j, spec.n_max + options.stability_shift};
      HamiltonianMatrix Hb = build_ecb_sector(params, SectorBasis::make(bigger, p));
      reference = symmetric_eigen(std::move(Hb.entries), options.energy_max, false).values;
    }
    const SectorBasis basis = SectorBasis::make(spec, p);
    {
      HamiltonianMatrix H = build_ecb_sector(params, basis);
      EigenSystem es = symmetric_eigen(std::move(H.entries), options.energy_max, true);
      sec.energies = std::move(es.values);
      sec.vectors = std::move(es.vectors);
    }
    sec.tail = detail::top_shell_probability(basis, sec.vectors, spec.n_max);
    sec.stability_shift = Eigen::VectorXd::Constant(sec.energies.size(), std::numeric_limits<double>::quiet_NaN());
    if (stability) {
      for (Index k = 0; k < sec.energies.size() && k < reference.size(); ++k)
        sec.stability_shift[k] = std::abs(sec.energies[k] - reference[k]);
    } else {
      sec.stability_shift.setZero();
    }
    out.sectors.push_back(std::move(sec));
  }
  detail::merge_sectors(out);
  convergence_check(out, options.tail_tol);
  out.parity = parity_label(out);
  return out;
}

/// Bytes needed for the largest matrix plus stored vectors, for choosing a mode.
inline double estimate_solve_bytes(const ECBasisSpec& spec, bool parity_blocks, Index n_vectors,
                                   int stability_shift = 10) {
  const double D = static_cast<double>(spec.dimension()) / (parity_blocks ? 2.0 : 1.0);
  const double Db = static_cast<double>(spec.spin_states() * (spec.n_max + 1 + stability_shift)) /
                    (parity_blocks ? 2.0 : 1.0);
  const double vecs = static_cast<double>(spec.dimension()) * static_cast<double>(n_vectors);
  return 8.0 * (std::max(D * D, Db * Db) + vecs + 20.0 * Db);
}

// ---------------------------------------------------------------------------------
// cache file: magic, version, key, payload size, payload, payload checksum

inline constexpr char spectrum_cache_magic[8] = {'D', 'K', 'S', 'P', 'E', 'C', '0', '1'};
inline constexpr std::uint32_t spectrum_cache_version = 2;

namespace detail {

struct Writer {
  std::vector<char> buf;
  template <class T>
  void put(const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
  }
  void put_doubles(const double* p, std::size_t n) {
    const char* c = reinterpret_cast<const char*>(p);
    buf.insert(buf.end(), c, c + n * sizeof(double));
  }
};

struct Reader {
  const std::vector<char>& buf;
  std::size_t pos = 0;
  template <class T>
  bool get(T& v) {
    if (pos + sizeof(T) > buf.size()) return false;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return true;
  }
  bool get_doubles(double* p, std::size_t n) {
    if (pos + n * sizeof(double) > buf.size()) return false;
    std::memcpy(p, buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return true;
  }
};

}  // namespace detail

inline void save_spectrum(const Spectrum& s, const std::filesystem::path& file) {
  detail::Writer w;
  w.put(s.params.omega());
  w.put(s.params.omega0());
  w.put(s.params.gamma());
  w.put(static_cast<std::int32_t>(s.params.two_j()));
  w.put(static_cast<std::int32_t>(s.spec.two_j));
  w.put(static_cast<std::int32_t>(s.spec.n_max));
  w.put(static_cast<std::int32_t>(s.options.parity_blocks));
  w.put(s.options.energy_max.value_or(std::numeric_limits<double>::infinity()));
  w.put(s.options.tail_tol);
  w.put(static_cast<std::int32_t>(s.options.stability_shift));
  w.put(s.options.stability_tol);
  w.put(static_cast<std::int32_t>(s.options.check_stability));
  w.put(static_cast<std::int32_t>(s.sectors.size()));
  for (const auto& sec : s.sectors) {
    w.put(static_cast<std::int32_t>(sec.parity));
    w.put(static_cast<std::int64_t>(sec.vectors.rows()));
    w.put(static_cast<std::int64_t>(sec.energies.size()));
    w.put_doubles(sec.energies.data(), sec.energies.size());
    w.put_doubles(sec.tail.data(), sec.tail.size());
    w.put_doubles(sec.stability_shift.data(), sec.stability_shift.size());
    w.put_doubles(sec.vectors.data(), sec.vectors.size());
  }
  std::filesystem::create_directories(file.parent_path().empty() ? "." : file.parent_path());
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_spectrum: cannot open " + tmp);
    os.write(spectrum_cache_magic, sizeof(spectrum_cache_magic));
    os.write(reinterpret_cast<const char*>(&spectrum_cache_version), sizeof(spectrum_cache_version));
    os.write(reinterpret_cast<const char*>(&s.params_hash), sizeof(s.params_hash));
    const std::uint64_t size = w.buf.size();
    os.write(reinterpret_cast<const char*>(&size), sizeof(size));
    os.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    const std::uint64_t sum = detail::fnv1a(w.buf.data(), w.buf.size());
    os.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    if (!os) throw std::runtime_error("save_spectrum: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, file);
}

enum class CacheStatus { hit, missing, version_mismatch, key_mismatch, corrupt };

inline std::string_view to_string(CacheStatus c) {
  switch (c) {
    case CacheStatus::hit: return "hit";
    case CacheStatus::missing: return "missing";
    case CacheStatus::version_mismatch: return "version mismatch";
    case CacheStatus::key_mismatch: return "key mismatch";
    default: return "corrupt";
  }
}

/// Loads a cached spectrum if it was stored for exactly this key; anything else
/// (other version, other key, truncated or altered payload) is reported, never used.
inline std::optional<Spectrum> load_spectrum(const std::filesystem::path& file, std::uint64_t key,
                                             CacheStatus* status = nullptr) {
  auto fail = [&](CacheStatus c) -> std::optional<Spectrum> {
    if (status) *status = c;
    return std::nullopt;
  };
  std::ifstream is(file, std::ios::binary);
  if (!is) return fail(CacheStatus::missing);
  char magic[sizeof(spectrum_cache_magic)];
  std::uint32_t version;
  std::uint64_t stored_key, size, sum;
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, spectrum_cache_magic, sizeof(magic)) != 0)
    return fail(CacheStatus::corrupt);
  if (!is.read(reinterpret_cast<char*>(&version), sizeof(version))) return fail(CacheStatus::corrupt);
  if (version != spectrum_cache_version) return fail(CacheStatus::version_mismatch);
  if (!is.read(reinterpret_cast<char*>(&stored_key), sizeof(stored_key))) return fail(CacheStatus::corrupt);
  if (stored_key != key) return fail(CacheStatus::key_mismatch);
  if (!is.read(reinterpret_cast<char*>(&size), sizeof(size))) return fail(CacheStatus::corrupt);
  const auto here = is.tellg();
  is.seekg(0, std::ios::end);
  const auto total = is.tellg();
  if (here < 0 || total < 0 ||
      static_cast<std::uint64_t>(total - here) != size + sizeof(std::uint64_t))
    return fail(CacheStatus::corrupt);
  is.seekg(here);
  std::vector<char> payload(size);
  if (!is.read(payload.data(), static_cast<std::streamsize>(size)) ||
      !is.read(reinterpret_cast<char*>(&sum), sizeof(sum)))
    return fail(CacheStatus::corrupt);
  if (detail::fnv1a(payload.data(), payload.size()) != sum) return fail(CacheStatus::corrupt);

  detail::Reader r{payload};
  double w, w0, g, emax;
  std::int32_t two_j, spec_two_j, n_max, blocks, shift, check, n_sectors;
  Spectrum s;
  bool ok = r.get(w) && r.get(w0) && r.get(g) && r.get(two_j) && r.get(spec_two_j) && r.get(n_max) &&
            r.get(blocks) && r.get(emax) && r.get(s.options.tail_tol) && r.get(shift) &&
            r.get(s.options.stability_tol) && r.get(check) && r.get(n_sectors);
  if (!ok || n_sectors < 1 || n_sectors > 2) return fail(CacheStatus::corrupt);
  try {
    s.params = DickeParams::make(w, w0, g, 0.5 * two_j);
    s.spec = ECBasisSpec::make(0.5 * spec_two_j, n_max);
  } catch (const std::invalid_argument&) {
    return fail(CacheStatus::corrupt);
  }
  s.options.parity_blocks = blocks != 0;
  if (std::isfinite(emax)) s.options.energy_max = emax;
  s.options.stability_shift = shift;
  s.options.check_stability = check != 0;
  for (int i = 0; i < n_sectors; ++i) {
    SpectrumSector sec;
    std::int32_t parity;
    std::int64_t rows, count;
    if (!r.get(parity) || !r.get(rows) || !r.get(count) || rows < 0 || count < 0 || count > rows)
      return fail(CacheStatus::corrupt);
    sec.parity = parity;
    sec.energies.resize(count);
    sec.tail.resize(count);
    sec.stability_shift.resize(count);
    sec.vectors.resize(rows, count);
    if (!r.get_doubles(sec.energies.data(), count) || !r.get_doubles(sec.tail.data(), count) ||
        !r.get_doubles(sec.stability_shift.data(), count) || !r.get_doubles(sec.vectors.data(), rows * count))
      return fail(CacheStatus::corrupt);
    s.sectors.push_back(std::move(sec));
  }
  if (r.pos != payload.size()) return fail(CacheStatus::corrupt);
  s.params_hash = spectrum_key(s.params, s.spec, s.options);
  if (s.params_hash != key) return fail(CacheStatus::key_mismatch);
  detail::merge_sectors(s);
  convergence_check(s, s.options.tail_tol);
  s.parity = parity_label(s);
  if (status) *status = CacheStatus::hit;
  return s;
}

inline std::filesystem::path spectrum_cache_file(const std::filesystem::path& dir, std::uint64_t key) {
  char name[40];
  std::snprintf(name, sizeof(name), "spectrum-%016llx.bin", static_cast<unsigned long long>(key));
  return dir / name;
}

/// Cached solve: returns the stored spectrum on a hit, otherwise solves and stores it.
inline Spectrum cached_spectrum(const DickeParams& params, const ECBasisSpec& spec, const SolveOptions& options,
                                const std::filesystem::path& cache_dir, CacheStatus* status = nullptr) {
  const std::uint64_t key = spectrum_key(params, spec, options);
  const auto file = spectrum_cache_file(cache_dir, key);
  CacheStatus st;
  if (auto hit = load_spectrum(file, key, &st)) {
    if (status) *status = st;
    return std::move(*hit);
  }
  if (status) *status = st;
  Spectrum s = solve_spectrum(params, spec, options);
  save_spectrum(s, file);
  return s;
}

}  // namespace dicke
