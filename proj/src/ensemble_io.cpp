#include "lobmf/ensemble_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "lobmf/errors.hpp"

namespace lobmf {

namespace {

constexpr char kMagic[8] = {'L', 'O', 'B', 'M', 'F', 'E', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!is) throw DomainError("ensemble file truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_array(std::ostream& os, const std::vector<double>& v) {
  for (double d : v) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(d));
}

std::vector<double> get_array(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& d : v) d = std::bit_cast<double>(get_le<std::uint64_t>(is));
  return v;
}

std::vector<double> jump_times(const CadlagPath& p) {
  std::vector<double> v;
  for (const auto& j : p.jumps()) v.push_back(j.time);
  return v;
}

std::vector<double> jump_sizes(const CadlagPath& p) {
  std::vector<double> v;
  for (const auto& j : p.jumps()) v.push_back(j.size);
  return v;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

void write_ensemble(const std::string& path, const ParticleEnsemble& ens, const std::string& params_json) {
  using nlohmann::json;
  json h;
  h["seed"] = ens.meta.seed;
  h["iterations"] = ens.meta.iterations;
  h["gap_history"] = ens.meta.gap_history;
  h["grid"] = ens.grid.nodes;
  h["params"] = json::parse(params_json);
  h["particles"] = ens.particles();
  h["shared_x"] = ens.x_paths.size() == 1;
  h["law_atoms"] = ens.law_flow.empty() ? 0 : ens.law_flow.front().size();
  json counts = json::array();
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    const auto& x = ens.x_path(i);
    counts.push_back({x.size(), ens.q_paths[i].size(), ens.q_paths[i].jumps().size(), ens.k_paths[i].jumps().size()});
  }
  h["counts"] = counts;
  const std::string header = h.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint64_t>(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (std::size_t i = 0; i < ens.particles(); ++i) {
    const auto& x = ens.x_path(i);
    const auto& q = ens.q_paths[i];
    const auto& k = ens.k_paths[i];
    put_array(os, to_vec(x.grid()));
    put_array(os, to_vec(x.values()));
    put_array(os, to_vec(q.grid()));
    put_array(os, to_vec(q.values()));
    put_array(os, jump_times(q));
    put_array(os, jump_sizes(q));
    put_array(os, to_vec(k.values()));
    put_array(os, jump_times(k));
    put_array(os, jump_sizes(k));
  }
  for (const auto& mu : ens.law_flow) put_array(os, to_vec(mu.atoms()));
  if (!os) throw DomainError("write failed for " + path);
}

LoadedEnsemble read_ensemble(const std::string& path) {
  using nlohmann::json;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DomainError("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DomainError("not an ensemble file: " + path);
  if (get_le<std::uint32_t>(is) != kVersion) throw DomainError("unsupported ensemble format version");
  const auto hlen = get_le<std::uint64_t>(is);
  std::string header(hlen, '\0');
  is.read(header.data(), static_cast<std::streamsize>(hlen));
  const json h = json::parse(header);
  LoadedEnsemble out;
  auto& ens = out.ensemble;
  out.params_json = h["params"].dump();
  ens.meta.seed = h["seed"].get<std::uint64_t>();
  ens.meta.iterations = h["iterations"].get<int>();
  ens.meta.gap_history = h["gap_history"].get<std::vector<double>>();
  if (!ens.meta.gap_history.empty()) ens.meta.gap = ens.meta.gap_history.back();
  ens.grid.nodes = h["grid"].get<std::vector<double>>();
  const auto P = h["particles"].get<std::size_t>();
  const bool shared = h["shared_x"].get<bool>();
  for (std::size_t i = 0; i < P; ++i) {
    const auto c = h["counts"][i];
    const auto nx = c[0].get<std::size_t>(), nq = c[1].get<std::size_t>();
    const auto jq = c[2].get<std::size_t>(), jk = c[3].get<std::size_t>();
    auto xg = get_array(is, nx), xv = get_array(is, nx);
    auto qg = get_array(is, nq), qv = get_array(is, nq);
    auto qjt = get_array(is, jq), qjs = get_array(is, jq);
    auto kv = get_array(is, nq);
    auto kjt = get_array(is, jk), kjs = get_array(is, jk);
    std::vector<Jump> qj, kj;
    for (std::size_t j = 0; j < jq; ++j) qj.push_back({qjt[j], qjs[j]});
    for (std::size_t j = 0; j < jk; ++j) kj.push_back({kjt[j], kjs[j]});
    if (!shared || i == 0) ens.x_paths.emplace_back(std::move(xg), std::move(xv));
    ens.q_paths.emplace_back(qg, std::move(qv), std::move(qj));
    ens.k_paths.emplace_back(std::move(qg), std::move(kv), std::move(kj));
  }
  const auto na = h["law_atoms"].get<std::size_t>();
  if (na > 0)
    for (std::size_t k = 0; k < ens.grid.size(); ++k) ens.law_flow.emplace_back(get_array(is, na));
  return out;
}

void write_law_csv(const std::string& path, const ParticleEnsemble& ens) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os << "t,mean,std,w1_to_initial\n" << std::setprecision(17);
  for (std::size_t k = 0; k < ens.law_flow.size(); ++k) {
    const auto& mu = ens.law_flow[k];
    os << ens.grid.nodes[k] << ',' << mu.mean() << ',' << mu.stddev() << ','
       << wasserstein(1, mu, ens.law_flow.front()) << '\n';
  }
}

}  // namespace lobmf
