#include "ivpricing/discrete_scm.hpp"
#include "ivpricing/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace ivpricing {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kIndependenceTol = 1e-12;
constexpr double kMomentTol = 1e-10;

using Key = std::vector<double>;

const char* latent_name(Latent l) {
  switch (l) {
    case Latent::X: return "x";
    case Latent::U1: return "u1";
    case Latent::U2: return "u2";
    case Latent::G: return "g";
  }
  return "?";
}

Latent latent_from_name(const std::string& s) {
  if (s == "x") return Latent::X;
  if (s == "u1") return Latent::U1;
  if (s == "u2") return Latent::U2;
  if (s == "g") return Latent::G;
  throw ConfigError("discrete scm: unknown latent '" + s + "'");
}

Key table_key(const std::vector<Latent>& keys, const Atom& a) {
  Key k;
  for (auto l : keys) {
    switch (l) {
      case Latent::X:
        for (Eigen::Index i = 0; i < a.x.size(); ++i) k.push_back(a.x(i));
        break;
      case Latent::U1: k.push_back(a.u1); break;
      case Latent::U2: k.push_back(a.u2); break;
      case Latent::G: k.push_back(a.g); break;
    }
  }
  return k;
}

double lookup(const CoefficientTable& table, const std::set<Latent>& allowed, const char* name,
              const Atom& atom) {
  for (auto l : table.keys)
    if (!allowed.contains(l))
      throw ConfigError(std::string("discrete scm: table ") + name + " references " + latent_name(l) +
                        ", which it may not depend on");
  const auto it = table.values.find(table_key(table.keys, atom));
  if (it == table.values.end())
    throw ConfigError(std::string("discrete scm: table ") + name + " has no entry for a support atom");
  return it->second;
}

Key x_key(const ResolvedAtom& a, const std::vector<SupportPoint>& support) {
  const auto& x = support[a.x_index].x;
  return Key(x.data(), x.data() + x.size());
}

// Checks A independent of B given C by comparing P(a,b,c)P(c) with P(a,c)P(b,c) over the
// product of conditional supports.
template <class FA, class FB, class FC>
bool conditionally_independent(const std::vector<ResolvedAtom>& atoms, FA fa, FB fb, FC fc) {
  std::map<Key, double> pc;
  std::map<std::pair<Key, Key>, double> pac, pbc;
  std::map<std::tuple<Key, Key, Key>, double> pabc;
  std::map<Key, std::set<Key>> a_support, b_support;
  for (const auto& at : atoms) {
    const Key a = fa(at), b = fb(at), c = fc(at);
    pc[c] += at.prob;
    pac[{a, c}] += at.prob;
    pbc[{b, c}] += at.prob;
    pabc[{a, b, c}] += at.prob;
    a_support[c].insert(a);
    b_support[c].insert(b);
  }
  for (const auto& [c, mass] : pc) {
    for (const auto& a : a_support[c]) {
      for (const auto& b : b_support[c]) {
        const auto it = pabc.find({a, b, c});
        const double joint = it == pabc.end() ? 0.0 : it->second;
        if (std::abs(joint * mass - pac[{a, c}] * pbc[{b, c}]) > kIndependenceTol) return false;
      }
    }
  }
  return true;
}

// E[value | group] == 0 for every group with positive mass.
template <class FV, class FG>
bool conditional_mean_zero(const std::vector<ResolvedAtom>& atoms, FV fv, FG fg) {
  std::map<Key, std::pair<double, double>> acc;
  double scale = 0.0;
  for (const auto& at : atoms) {
    auto& [m, s] = acc[fg(at)];
    m += at.prob;
    s += at.prob * fv(at);
    scale = std::max(scale, std::abs(fv(at)));
  }
  for (const auto& [_, ms] : acc)
    if (ms.first > 0.0 && std::abs(ms.second / ms.first) > kMomentTol * std::max(1.0, scale)) return false;
  return true;
}

}  // namespace

std::size_t DiscreteSCM::index_of(const Vector& x) const {
  for (std::size_t i = 0; i < support_.size(); ++i)
    if (support_[i].x.size() == x.size() && support_[i].x == x) return i;
  throw ConfigError("discrete scm: covariate value is not a support point");
}

DiscreteSCM build_discrete_scm(const DiscreteSCMSpec& spec) {
  if (spec.atoms.empty()) throw ConfigError("discrete scm: no atoms");
  const auto dim = spec.atoms.front().x.size();
  if (dim == 0) throw ConfigError("discrete scm: covariate dimension must be positive");

  double total = 0.0;
  for (const auto& a : spec.atoms) {
    if (a.x.size() != dim) throw ConfigError("discrete scm: atoms disagree on covariate dimension");
    if (!(a.prob >= 0.0) || !std::isfinite(a.prob)) throw ConfigError("discrete scm: negative probability");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > kMassTol)
    throw ConfigError("discrete scm: probabilities sum to " + format_double(total) + ", not 1");

  using L = Latent;
  DiscreteSCM scm;
  scm.dim_ = static_cast<std::size_t>(dim);
  for (const auto& a : spec.atoms) {
    if (a.prob == 0.0) continue;
    ResolvedAtom r;
    std::size_t xi = scm.support_.size();
    for (std::size_t k = 0; k < scm.support_.size(); ++k)
      if (scm.support_[k].x == a.x) {
        xi = k;
        break;
      }
    if (xi == scm.support_.size()) scm.support_.push_back(SupportPoint{a.x, 0.0, {}});
    r.x_index = xi;
    r.u1 = a.u1;
    r.u2 = a.u2;
    r.g = a.g;
    r.eps_p = a.eps_p;
    r.eps_y = a.eps_y;
    r.prob = a.prob;
    r.beta_p1 = lookup(spec.beta_p1, {L::X, L::U1}, "beta_p1", a);
    r.beta_p2 = lookup(spec.beta_p2, {L::X, L::U1}, "beta_p2", a);
    r.beta_g = lookup(spec.beta_g, {L::X, L::U1, L::G}, "beta_g", a);
    r.beta_ux = lookup(spec.beta_ux, {L::X, L::U1, L::U2}, "beta_ux", a);
    r.alpha_g = lookup(spec.alpha_g, {L::X, L::U2, L::G}, "alpha_g", a);
    r.alpha_ux = lookup(spec.alpha_ux, {L::X, L::U2}, "alpha_ux", a);
    r.p = r.alpha_g + r.alpha_ux + r.eps_p;
    r.y = r.beta_p1 * r.p + r.beta_p2 * r.p * r.p + r.beta_g + r.beta_ux + r.eps_y;
    scm.support_[xi].prob += r.prob;
    scm.support_[xi].atoms.push_back(scm.atoms_.size());
    scm.atoms_.push_back(r);
  }

  const auto& atoms = scm.atoms_;
  const auto& sup = scm.support_;
  auto fx = [&](const ResolvedAtom& a) { return x_key(a, sup); };
  auto fxg = [&](const ResolvedAtom& a) {
    auto k = x_key(a, sup);
    k.push_back(a.g);
    return k;
  };
  auto fxgu2 = [&](const ResolvedAtom& a) {
    auto k = fxg(a);
    k.push_back(a.u2);
    return k;
  };
  auto fg = [](const ResolvedAtom& a) { return Key{a.g}; };
  auto fu = [](const ResolvedAtom& a) { return Key{a.u1, a.u2}; };
  auto fu1 = [](const ResolvedAtom& a) { return Key{a.u1}; };
  auto fu2 = [](const ResolvedAtom& a) { return Key{a.u2}; };
  auto feps = [](const ResolvedAtom& a) { return Key{a.eps_p}; };

  if (!conditionally_independent(atoms, fg, fu, fx))
    throw ConfigError("discrete scm: instrument G is not independent of (U1, U2) given X");
  if (!conditionally_independent(atoms, fu1, fu2, fxg))
    throw ConfigError("discrete scm: U1 is not independent of U2 given (X, G)");
  if (!conditionally_independent(atoms, feps, fu1, fxgu2))
    throw ConfigError("discrete scm: price noise is not independent of U1 given (X, U2, G)");
  if (!conditional_mean_zero(
          atoms, [](const ResolvedAtom& a) { return a.eps_p; },
          [&](const ResolvedAtom& a) {
            auto k = fxgu2(a);
            k.push_back(a.u1);
            return k;
          }))
    throw ConfigError("discrete scm: price noise has non-zero mean given (X, U, G)");
  if (!conditional_mean_zero(
          atoms, [](const ResolvedAtom& a) { return a.eps_y; },
          [&](const ResolvedAtom& a) {
            auto k = fxgu2(a);
            k.push_back(a.u1);
            k.push_back(a.eps_p);
            return k;
          }))
    throw ConfigError("discrete scm: revenue noise has non-zero mean given (X, U, G, P)");

  // Cov(alpha_g + alpha_ux, beta_ux | X, G) must not vary with G.
  for (const auto& point : sup) {
    std::map<double, std::array<double, 4>> by_g;  // mass, E[a], E[b], E[ab]
    double scale = 0.0;
    for (auto idx : point.atoms) {
      const auto& a = atoms[idx];
      const double pa = a.alpha_g + a.alpha_ux;
      auto& acc = by_g[a.g];
      acc[0] += a.prob;
      acc[1] += a.prob * pa;
      acc[2] += a.prob * a.beta_ux;
      acc[3] += a.prob * pa * a.beta_ux;
      scale = std::max(scale, std::abs(pa * a.beta_ux));
    }
    std::vector<double> covs;
    for (const auto& [g, acc] : by_g)
      covs.push_back(acc[3] / acc[0] - (acc[1] / acc[0]) * (acc[2] / acc[0]));
    const auto [lo, hi] = std::minmax_element(covs.begin(), covs.end());
    if (*hi - *lo > kMomentTol * std::max(1.0, scale))
      throw ConfigError(
          "discrete scm: Cov(alpha_g + alpha_ux, beta_ux | X, G) varies with G; the moment identities "
          "need it constant");
  }
  return scm;
}

DiscreteSCMSpec make_product_spec(const std::vector<ProductSupport>& support, const StructuralFunctions& fns) {
  DiscreteSCMSpec spec;
  spec.beta_p1.keys = {Latent::X, Latent::U1};
  spec.beta_p2.keys = {Latent::X, Latent::U1};
  spec.beta_g.keys = {Latent::X, Latent::U1, Latent::G};
  spec.beta_ux.keys = {Latent::X, Latent::U1, Latent::U2};
  spec.alpha_g.keys = {Latent::X, Latent::U2, Latent::G};
  spec.alpha_ux.keys = {Latent::X, Latent::U2};

  auto check = [](const DiscreteMarginal& m) {
    if (m.values.size() != m.probs.size() || m.values.empty())
      throw ConfigError("make_product_spec: marginal values and probabilities disagree");
  };
  for (const auto& s : support) {
    for (const auto* m : {&s.g, &s.u1, &s.u2, &s.eps_p, &s.eps_y}) check(*m);
    Key xk(s.x.data(), s.x.data() + s.x.size());
    auto with = [&](std::initializer_list<double> extra) {
      Key k = xk;
      k.insert(k.end(), extra);
      return k;
    };
    for (std::size_t ig = 0; ig < s.g.values.size(); ++ig)
      for (std::size_t i1 = 0; i1 < s.u1.values.size(); ++i1)
        for (std::size_t i2 = 0; i2 < s.u2.values.size(); ++i2)
          for (std::size_t ip = 0; ip < s.eps_p.values.size(); ++ip)
            for (std::size_t iy = 0; iy < s.eps_y.values.size(); ++iy) {
              const double g = s.g.values[ig], u1 = s.u1.values[i1], u2 = s.u2.values[i2];
              spec.atoms.push_back(Atom{s.x, u1, u2, g, s.eps_p.values[ip], s.eps_y.values[iy],
                                        s.prob * s.g.probs[ig] * s.u1.probs[i1] * s.u2.probs[i2] *
                                            s.eps_p.probs[ip] * s.eps_y.probs[iy]});
              spec.beta_p1.values[with({u1})] = fns.beta_p1(s.x, u1);
              spec.beta_p2.values[with({u1})] = fns.beta_p2(s.x, u1);
              spec.beta_g.values[with({u1, g})] = fns.beta_g(s.x, u1, g);
              spec.beta_ux.values[with({u1, u2})] = fns.beta_ux(s.x, u1, u2);
              spec.alpha_g.values[with({u2, g})] = fns.alpha_g(s.x, u2, g);
              spec.alpha_ux.values[with({u2})] = fns.alpha_ux(s.x, u2);
            }
  }
  return spec;
}

namespace {

const std::array<std::pair<const char*, CoefficientTable DiscreteSCMSpec::*>, 6> kTables = {{
    {"beta_p1", &DiscreteSCMSpec::beta_p1},
    {"beta_p2", &DiscreteSCMSpec::beta_p2},
    {"beta_g", &DiscreteSCMSpec::beta_g},
    {"beta_ux", &DiscreteSCMSpec::beta_ux},
    {"alpha_g", &DiscreteSCMSpec::alpha_g},
    {"alpha_ux", &DiscreteSCMSpec::alpha_ux},
}};

}  // namespace

DiscreteSCMSpec discrete_scm_spec_from_json(const nlohmann::json& j) {
  jsonu::check_keys(j, {"atoms", "coefficients"}, "discrete scm");
  DiscreteSCMSpec spec;
  if (!j.contains("atoms") || !j.at("atoms").is_array()) throw ConfigError("discrete scm: missing atoms");
  for (const auto& a : j.at("atoms")) {
    jsonu::check_keys(a, {"x", "u1", "u2", "g", "eps_p", "eps_y", "prob"}, "discrete scm atom");
    Atom atom;
    atom.x = jsonu::to_vector(a.at("x"), "atom.x");
    atom.u1 = jsonu::number(a.value("u1", nlohmann::json(0.0)), "atom.u1");
    atom.u2 = jsonu::number(a.value("u2", nlohmann::json(0.0)), "atom.u2");
    atom.g = jsonu::number(a.at("g"), "atom.g");
    atom.eps_p = jsonu::number(a.value("eps_p", nlohmann::json(0.0)), "atom.eps_p");
    atom.eps_y = jsonu::number(a.value("eps_y", nlohmann::json(0.0)), "atom.eps_y");
    atom.prob = jsonu::number(a.at("prob"), "atom.prob");
    spec.atoms.push_back(std::move(atom));
  }
  const auto& coef = j.at("coefficients");
  jsonu::check_keys(coef, {"beta_p1", "beta_p2", "beta_g", "beta_ux", "alpha_g", "alpha_ux"},
                    "discrete scm coefficients");
  for (const auto& [name, member] : kTables) {
    if (!coef.contains(name)) throw ConfigError(std::string("discrete scm: missing table ") + name);
    const auto& t = coef.at(name);
    jsonu::check_keys(t, {"keys", "entries"}, name);
    CoefficientTable table;
    for (const auto& k : t.at("keys")) table.keys.push_back(latent_from_name(k.get<std::string>()));
    for (const auto& e : t.at("entries")) {
      Key key;
      for (auto l : table.keys) {
        const char* field = latent_name(l);
        if (!e.contains(field))
          throw ConfigError(std::string("discrete scm: entry of ") + name + " lacks '" + field + "'");
        if (l == Latent::X) {
          const auto x = jsonu::to_vector(e.at(field), "entry.x");
          key.insert(key.end(), x.data(), x.data() + x.size());
        } else {
          key.push_back(jsonu::number(e.at(field), field));
        }
      }
      table.values[key] = jsonu::number(e.at("value"), "entry.value");
    }
    spec.*member = std::move(table);
  }
  return spec;
}

nlohmann::json discrete_scm_spec_to_json(const DiscreteSCMSpec& spec) {
  nlohmann::json j;
  j["atoms"] = nlohmann::json::array();
  for (const auto& a : spec.atoms)
    j["atoms"].push_back({{"x", jsonu::vec(a.x)},
                          {"u1", a.u1},
                          {"u2", a.u2},
                          {"g", a.g},
                          {"eps_p", a.eps_p},
                          {"eps_y", a.eps_y},
                          {"prob", a.prob}});
  const auto dim = spec.atoms.empty() ? 0 : spec.atoms.front().x.size();
  for (const auto& [name, member] : kTables) {
    const auto& table = spec.*member;
    nlohmann::json t;
    t["keys"] = nlohmann::json::array();
    for (auto l : table.keys) t["keys"].push_back(latent_name(l));
    t["entries"] = nlohmann::json::array();
    for (const auto& [key, value] : table.values) {
      nlohmann::json e;
      std::size_t pos = 0;
      for (auto l : table.keys) {
        if (l == Latent::X) {
          e["x"] = std::vector<double>(key.begin() + static_cast<std::ptrdiff_t>(pos),
                                       key.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(dim)));
          pos += static_cast<std::size_t>(dim);
        } else {
          e[latent_name(l)] = key[pos++];
        }
      }
      e["value"] = value;
      t["entries"].push_back(std::move(e));
    }
    j["coefficients"][name] = std::move(t);
  }
  return j;
}

DiscreteSCM load_discrete_scm(const std::string& path) {
  try {
    return build_discrete_scm(discrete_scm_spec_from_json(jsonu::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("discrete scm: ") + e.what());
  }
}

Dataset sample_discrete_dataset(const DiscreteSCM& scm, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample_discrete_dataset: n must be at least 1");
  std::vector<double> weights;
  for (const auto& a : scm.atoms()) weights.push_back(a.prob);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::mt19937_64 rng(seed);
  const auto m = static_cast<Eigen::Index>(n);
  Vector y(m), g(m), p(m);
  Matrix x(m, static_cast<Eigen::Index>(scm.covariate_dim()));
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& a = scm.atoms()[pick(rng)];
    y(i) = a.y;
    g(i) = a.g;
    p(i) = a.p;
    x.row(i) = scm.support()[a.x_index].x.transpose();
  }
  return {std::move(y), std::move(x), std::move(g), std::move(p), seed};
}

}  // namespace ivpricing
