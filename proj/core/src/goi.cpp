#include "hoq/goi.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <ostream>
#include <stdexcept>

namespace hoq {

// ------------------------------------------------------------ encodings ----

BigNat encode_sum(Side side, const BigNat &n) {
  BigNat two_n = n * 2;
  if (side == Side::Right) ++two_n;
  return two_n;
}

std::pair<Side, BigNat> decode_sum(const BigNat &k) {
  if (k % 2 == 0) return {Side::Left, k / 2};
  return {Side::Right, (k - 1) / 2};
}

namespace {
// Indices below this fit the native path: (i+n)(i+n+1)/2+n < 2^61.
constexpr std::uint64_t kPairFastArg = std::uint64_t{1} << 30;
constexpr std::uint64_t kPairFastKey = std::uint64_t{1} << 61;
}  // namespace

BigNat encode_pair(const BigNat &i, const BigNat &n) {
  if (i < kPairFastArg && n < kPairFastArg) {
    std::uint64_t a = i.convert_to<std::uint64_t>();
    std::uint64_t b = n.convert_to<std::uint64_t>();
    std::uint64_t s = a + b;
    return BigNat(s * (s + 1) / 2 + b);
  }
  BigNat s = i + n;
  return s * (s + 1) / 2 + n;
}

std::pair<BigNat, BigNat> decode_pair(const BigNat &k) {
  if (k < kPairFastKey) {
    std::uint64_t kk = k.convert_to<std::uint64_t>();
    unsigned __int128 disc = (unsigned __int128)kk * 8 + 1;
    std::uint64_t r = (std::uint64_t)sqrtl((long double)disc);
    while ((unsigned __int128)r * r > disc) --r;
    while ((unsigned __int128)(r + 1) * (r + 1) <= disc) ++r;
    std::uint64_t s = (r - 1) / 2;
    std::uint64_t n = kk - s * (s + 1) / 2;
    return {BigNat(s - n), BigNat(n)};
  }
  BigNat disc = 8 * k + 1;
  BigNat s = (boost::multiprecision::sqrt(disc) - 1) / 2;
  while (s * (s + 1) / 2 > k) --s;
  while ((s + 1) * (s + 2) / 2 <= k) ++s;
  BigNat n = k - s * (s + 1) / 2;
  return {s - n, n};
}

// ----------------------------------------------------------------- core ----

namespace {
std::ostream *g_trace = nullptr;
}

void set_goi_trace(std::ostream *os) { g_trace = os; }

namespace detail {
RunCtx &run_ctx() {
  thread_local RunCtx ctx;
  return ctx;
}
}  // namespace detail

Arrow make_arrow(std::string name,
                 std::function<std::vector<BranchOutcome>(const Token &)> step,
                 bool pure) {
  auto box = std::make_shared<ArrowBox>();
  box->name = std::move(name);
  box->step = std::move(step);
  box->pure = pure;
  return box;
}

Arrow make_pure_arrow(std::string name,
                      std::function<PureRes(const BigNat &)> pstep) {
  auto box = std::make_shared<ArrowBox>();
  box->name = std::move(name);
  box->pure = true;
  box->pstep = std::move(pstep);
  // The token step is the pure/impure boundary: divergence proven by the
  // index action is booked as exhausted mass here, exactly once per token.
  box->step = [ps = box->pstep](const Token &t) -> std::vector<BranchOutcome> {
    PureRes r = ps(t.index);
    switch (r.kind) {
      case PureRes::kExit:
        return {{std::move(r.out), t.state}};
      case PureRes::kDead:
        return {};
      default:
        detail::run_ctx().exhausted += t.state.trace_real();
        return {};
    }
  };
  return box;
}

Arrow rename_arrow(std::string name, const Arrow &a) {
  auto box = std::make_shared<ArrowBox>();
  box->name = std::move(name);
  box->step = a->step;
  box->pstep = a->pstep;
  box->pure = a->pure;
  return box;
}

std::shared_ptr<ArrowBox> make_slot(std::string name) {
  auto box = std::make_shared<ArrowBox>();
  box->name = name;
  box->step = [name](const Token &) -> std::vector<BranchOutcome> {
    throw std::logic_error("arrow slot '" + name + "' used before assignment");
  };
  return box;
}

std::function<std::vector<BranchOutcome>(const Token &)> guarded_step(
    Arrow target) {
  return [target](const Token &t) -> std::vector<BranchOutcome> {
    auto &ctx = detail::run_ctx();
    if (ctx.self_depth >= ctx.self_cap) {
      ctx.exhausted += t.state.trace_real();
      return {};
    }
    ++ctx.self_depth;
    std::vector<BranchOutcome> out;
    try {
      out = target->step(t);
    } catch (...) {
      --ctx.self_depth;
      throw;
    }
    --ctx.self_depth;
    return out;
  };
}

Arrow identity_arrow() {
  static Arrow a = make_pure_arrow("id", [](const BigNat &n) -> PureRes {
    return {PureRes::kExit, n};
  });
  return a;
}

Arrow zero_arrow() {
  static Arrow a = make_pure_arrow(
      "bot", [](const BigNat &) -> PureRes { return {PureRes::kDead, {}}; });
  return a;
}

Arrow compose(const Arrow &g, const Arrow &f) {
  if (g->pure && f->pure) {
    return make_pure_arrow(
        g->name + "." + f->name,
        [gp = g->pstep, fp = f->pstep](const BigNat &n) -> PureRes {
          PureRes r = fp(n);
          if (r.kind != PureRes::kExit) return r;
          return gp(r.out);
        });
  }
  return make_arrow(g->name + "." + f->name, [g, f](const Token &t) {
    double prune = detail::run_ctx().prune_tol;
    std::vector<BranchOutcome> out;
    for (auto &mid : f->step(t)) {
      if (mid.state.trace_real() < prune) continue;
      auto rest = g->step({mid.index, mid.state});
      out.insert(out.end(), std::make_move_iterator(rest.begin()),
                 std::make_move_iterator(rest.end()));
    }
    return out;
  });
}

Arrow coprod(const Arrow &f, const Arrow &g) {
  if (f->pure && g->pure) {
    return make_pure_arrow(
        "[" + f->name + "+" + g->name + "]",
        [fp = f->pstep, gp = g->pstep](const BigNat &n) -> PureRes {
          auto [side, payload] = decode_sum(n);
          PureRes r = side == Side::Left ? fp(payload) : gp(payload);
          if (r.kind != PureRes::kExit) return r;
          return {PureRes::kExit, encode_sum(side, r.out)};
        });
  }
  return make_arrow("[" + f->name + "+" + g->name + "]",
                    [f, g](const Token &t) {
                      auto [side, payload] = decode_sum(t.index);
                      const Arrow &h = side == Side::Left ? f : g;
                      std::vector<BranchOutcome> out;
                      for (auto &o : h->step({payload, t.state}))
                        out.push_back(
                            {encode_sum(side, o.index), std::move(o.state)});
                      return out;
                    });
}

namespace {

// idx → loop result for a traced pure arrow; the index action is
// deterministic, so results are valid forever.
struct LoopMemo {
  std::mutex mu;
  std::map<BigNat, PureRes> entries;
};

// Hard cap on one pure-loop computation; a deterministic constant (not the
// run fuel) so memoized results stay valid across runs.
constexpr std::size_t kPureLoopCap = 1000000;

}  // namespace

Arrow trace_feedback(const Arrow &f) {
  if (f->pure) {
    auto memo = std::make_shared<LoopMemo>();
    return make_pure_arrow(
        "tr(" + f->name + ")",
        [fp = f->pstep, memo](const BigNat &idx) -> PureRes {
          {
            std::lock_guard<std::mutex> lk(memo->mu);
            auto it = memo->entries.find(idx);
            if (it != memo->entries.end()) return it->second;
          }
          PureRes res{PureRes::kDiverged, {}};
          std::set<BigNat> seen;
          BigNat cur = idx * 2;
          for (std::size_t n = 0; n < kPureLoopCap; ++n) {
            if (!seen.insert(cur).second) break;  // proven cycle
            PureRes r = fp(cur);
            if (r.kind != PureRes::kExit) {
              res = std::move(r);
              break;
            }
            cur = std::move(r.out);
            if (cur % 2 == 0) {
              res = {PureRes::kExit, cur / 2};
              break;
            }
          }
          {
            std::lock_guard<std::mutex> lk(memo->mu);
            memo->entries.emplace(idx, res);
          }
          return res;
        });
  }
  return make_arrow("tr(" + f->name + ")", [f](const Token &t) {
    auto &ctx = detail::run_ctx();
    std::vector<BranchOutcome> done;
    std::vector<Token> queue;
    queue.push_back({t.index * 2, t.state});
    std::size_t budget = ctx.loop_fuel;
    while (!queue.empty()) {
      if (budget == 0) {
        for (auto &q : queue) ctx.exhausted += q.state.trace_real();
        break;
      }
      --budget;
      std::vector<Token> next;
      for (auto &q : queue) {
        for (auto &o : f->step(q)) {
          if (o.state.trace_real() < ctx.prune_tol) continue;
          if (o.index % 2 == 0) {
            done.push_back({o.index / 2, std::move(o.state)});
          } else {
            if (g_trace)
              *g_trace << "{\"arrow\":\"" << f->name << "\",\"index\":\"" << o.index.str()
                       << "\",\"trace\":" << o.state.trace_real() << "}\n";
            next.push_back({std::move(o.index), std::move(o.state)});
          }
        }
      }
      queue = std::move(next);
    }
    return done;
  });
}

Arrow copow(const Arrow &f) {
  if (f->pure) {
    return make_pure_arrow(
        "copow(" + f->name + ")", [fp = f->pstep](const BigNat &n) -> PureRes {
          auto [i, payload] = decode_pair(n);
          PureRes r = fp(payload);
          if (r.kind != PureRes::kExit) return r;
          return {PureRes::kExit, encode_pair(i, r.out)};
        });
  }
  return make_arrow("copow(" + f->name + ")", [f](const Token &t) {
    auto [i, payload] = decode_pair(t.index);
    std::vector<BranchOutcome> out;
    for (auto &o : f->step({payload, t.state}))
      out.push_back({encode_pair(i, o.index), std::move(o.state)});
    return out;
  });
}

Arrow lca_apply(const Arrow &a, const Arrow &b) {
  Arrow inner = compose(coprod(identity_arrow(), b), a);
  Arrow t = trace_feedback(inner);
  return rename_arrow("(" + a->name + " " + b->name + ")", t);
}

Arrow lca_bang(const Arrow &a) { return copow(a); }

// ---------------------------------------------------------- combinators ----

namespace {

using PermFn = std::function<std::optional<BigNat>(const BigNat &)>;

Arrow perm_arrow(std::string name, PermFn f) {
  return make_pure_arrow(std::move(name),
                         [f](const BigNat &n) -> PureRes {
                           auto o = f(n);
                           if (!o) return {PureRes::kDead, {}};
                           return {PureRes::kExit, std::move(*o)};
                         });
}

BigNat pairc(const BigNat &i, const BigNat &n) { return encode_pair(i, n); }

const Arrow &comb_I() {
  static Arrow a = perm_arrow("I", [](const BigNat &n) -> std::optional<BigNat> {
    return n % 2 == 0 ? BigNat(n + 1) : BigNat(n - 1);
  });
  return a;
}

const Arrow &comb_B() {
  static Arrow a = perm_arrow("B", [](const BigNat &n) -> std::optional<BigNat> {
    switch (static_cast<int>(n % 8)) {
      case 0: return n / 2 + 1;            // 8k   -> 4k+1
      case 1: case 5: return 2 * (n - 1);  // 4k+1 -> 8k
      case 3: case 7: return 2 * n - 4;    // 4k+3 -> 8k+2
      case 2: return (n - 2) / 2 + 3;      // 8k+2 -> 4k+3
      case 6: return n - 2;                // 8k+6 -> 8k+4
      case 4: return n + 2;                // 8k+4 -> 8k+6
    }
    return std::nullopt;
  });
  return a;
}

const Arrow &comb_C() {
  static Arrow a = perm_arrow("C", [](const BigNat &n) -> std::optional<BigNat> {
    switch (static_cast<int>(n % 8)) {
      case 0: return n + 1;                         // 8k   -> 8k+1
      case 1: return n - 1;                         // 8k+1 -> 8k
      case 5: return 4 * ((n - 5) / 8) + 2;         // 8k+5 -> 4k+2
      case 2: case 6: return 8 * ((n - 2) / 4) + 5; // 4k+2 -> 8k+5
      case 3: case 7: return 8 * ((n - 3) / 4) + 4; // 4k+3 -> 8k+4
      case 4: return 4 * ((n - 4) / 8) + 3;         // 8k+4 -> 4k+3
    }
    return std::nullopt;
  });
  return a;
}

const Arrow &comb_K() {
  static Arrow a = perm_arrow("K", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 1) return 2 * (n - 1);  // 2k+1 -> 4k
    if (n % 4 == 0) return n / 2 + 1;    // 4k   -> 2k+1
    return std::nullopt;                 // 4k+2: the dropped argument
  });
  return a;
}

const Arrow &comb_W() {
  static Arrow a = perm_arrow("W", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 4 == 0) return 2 * n + 1;                // 4k   -> 8k+1
    if (n % 8 == 1) return (n - 1) / 2;              // 8k+1 -> 4k
    if (n % 4 == 3) {                                // first copy query
      auto [i, t] = decode_pair((n - 3) / 4);
      return 4 * pairc(2 * i, t) + 2;
    }
    if (n % 8 == 5) {                                // second copy query
      auto [i, t] = decode_pair((n - 5) / 8);
      return 4 * pairc(2 * i + 1, t) + 2;
    }
    // n % 4 == 2: answer comes back from the shared !y
    auto [j, t] = decode_pair((n - 2) / 4);
    if (j % 2 == 0) return 4 * pairc(j / 2, t) + 3;
    return 8 * pairc((j - 1) / 2, t) + 5;
  });
  return a;
}

const Arrow &comb_D() {
  static Arrow a = perm_arrow("D", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 0) return 2 * pairc(0, n / 2) + 1;
    auto [i, t] = decode_pair((n - 1) / 2);
    if (i == 0) return 2 * t;
    return std::nullopt;
  });
  return a;
}

const Arrow &comb_Delta() {
  static Arrow a = perm_arrow("Delta", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 0) {
      auto [i, v] = decode_pair(n / 2);
      auto [j, t] = decode_pair(v);
      return 2 * pairc(pairc(i, j), t) + 1;
    }
    auto [c, t] = decode_pair((n - 1) / 2);
    auto [i, j] = decode_pair(c);
    return 2 * pairc(i, pairc(j, t));
  });
  return a;
}

const Arrow &comb_F() {
  static Arrow a = perm_arrow("F", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 4 == 0) {
      auto [i, t] = decode_pair(n / 4);
      return 2 * pairc(i, 2 * t) + 1;
    }
    if (n % 4 == 2) {
      auto [i, r] = decode_pair((n - 2) / 4);
      return 2 * pairc(i, 2 * r + 1) + 1;
    }
    auto [i, s] = decode_pair((n - 1) / 2);
    if (s % 2 == 0) return 4 * pairc(i, s / 2);
    return 4 * pairc(i, (s - 1) / 2) + 2;
  });
  return a;
}

const Arrow &comb_Pdot() {
  static Arrow a = perm_arrow("Pdot", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 1) return 8 * ((n - 1) / 2);  // 2t+1 -> 8t
    if (n % 8 == 0) return 2 * (n / 8) + 1;    // 8t   -> 2t+1
    if (n % 8 == 4) return 4 * ((n - 4) / 8) + 2;
    return 8 * ((n - 2) / 4) + 4;              // 4t+2 -> 8t+4
  });
  return a;
}

const Arrow &comb_Pdot_l() {
  static Arrow a = perm_arrow("Pdot_l", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 0) return 2 * n + 1;          // 2k   -> 4k+1
    if (n % 4 == 1) return (n - 1) / 2;        // 4k+1 -> 2k
    return std::nullopt;
  });
  return a;
}

const Arrow &comb_Pdot_r() {
  static Arrow a = perm_arrow("Pdot_r", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 0) return 2 * n + 3;          // 2k   -> 4k+3
    if (n % 4 == 3) return (n - 3) / 2;        // 4k+3 -> 2k
    return std::nullopt;
  });
  return a;
}

const Arrow &comb_A() {
  static Arrow a = perm_arrow("A", [](const BigNat &n) -> std::optional<BigNat> {
    if (n % 4 == 0) return n + 2;        // 4s   -> 4s+2
    if (n % 4 == 2) return n / 2;        // 4s+2 -> 2s+1
    return 2 * (n - 1);                  // 2t+1 -> 4t
  });
  return a;
}

const Arrow &comb_C_Pdot_to_P() {
  static Arrow a = perm_arrow("C_Pdot_to_P", [](const BigNat &n) -> std::optional<BigNat> {
    switch (static_cast<int>(n % 4)) {
      case 0: return 4 * n + 2;   // 4k    -> 16k+2
      case 1: return 2 * n + 4;   // 4k+1  -> 8k+6
      case 3: return 4 * n - 2;   // 4k+3  -> 16k+10
      case 2:
        if (n % 16 == 2) return 4 * ((n - 2) / 16);       // 16k+2  -> 4k
        if (n % 16 == 10) return 4 * ((n - 10) / 16) + 3; // 16k+10 -> 4k+3
        return 4 * ((n - 6) / 8) + 1;                     // 8k+6   -> 4k+1
    }
    return std::nullopt;
  });
  return a;
}

const Arrow &comb_Kbar() {
  static Arrow a = [] {
    Arrow k = lca_apply(comb_K(), comb_I());
    return rename_arrow("Kbar", k);
  }();
  return a;
}

}  // namespace

Arrow dereliction(std::size_t i) {
  BigNat fib = i;
  return perm_arrow("D_" + std::to_string(i), [fib](const BigNat &n) -> std::optional<BigNat> {
    if (n % 2 == 0) return 2 * pairc(fib, n / 2) + 1;
    auto [j, t] = decode_pair((n - 1) / 2);
    if (j == fib) return 2 * t;
    return std::nullopt;
  });
}

Arrow seq(std::function<Arrow(std::size_t)> gen) {
  struct Cache {
    std::mutex mx;
    std::map<std::size_t, Arrow> entries;
    std::function<Arrow(std::size_t)> gen;
  };
  auto cache = std::make_shared<Cache>();
  cache->gen = std::move(gen);
  return make_arrow("seq", [cache](const Token &t) {
    auto [i, m] = decode_pair(t.index);
    auto fi = i.convert_to<std::size_t>();
    Arrow x;
    {
      std::lock_guard<std::mutex> lock(cache->mx);
      auto it = cache->entries.find(fi);
      if (it == cache->entries.end())
        it = cache->entries.emplace(fi, cache->gen(fi)).first;
      x = it->second;
    }
    std::vector<BranchOutcome> out;
    for (auto &o : x->step({m, t.state}))
      out.push_back({encode_pair(i, o.index), std::move(o.state)});
    return out;
  });
}

// forward declaration; bracket-built combinators below use the DSL
namespace {
const Arrow &comb_P();
const Arrow &comb_P_l();
const Arrow &comb_P_r();
const Arrow &comb_C_P_to_Pdot();
}  // namespace

Arrow combinator(const std::string &name) {
  if (name == "B") return comb_B();
  if (name == "C") return comb_C();
  if (name == "I") return comb_I();
  if (name == "K") return comb_K();
  if (name == "Kbar") return comb_Kbar();
  if (name == "W") return comb_W();
  if (name == "D") return comb_D();
  if (name == "Delta") return comb_Delta();
  if (name == "F") return comb_F();
  if (name == "P") return comb_P();
  if (name == "P_l") return comb_P_l();
  if (name == "P_r") return comb_P_r();
  if (name == "Pdot") return comb_Pdot();
  if (name == "Pdot_l") return comb_Pdot_l();
  if (name == "Pdot_r") return comb_Pdot_r();
  if (name == "C_P_to_Pdot") return comb_C_P_to_Pdot();
  if (name == "C_Pdot_to_P") return comb_C_Pdot_to_P();
  if (name == "A") return comb_A();
  if (name == "bot") return zero_arrow();
  throw std::invalid_argument("combinator: unknown name " + name);
}

// -------------------------------------------------------------- quantum ----

Arrow q_state(const DensityMatrix &rho) {
  if (!rho.validate(kDefaultTol))
    throw std::invalid_argument("q_state: payload is not a density matrix");
  return make_arrow("Q_rho", [rho](const Token &t) {
    std::vector<BranchOutcome> out;
    out.push_back({t.index, DensityMatrix(tensor(rho.mat(), t.state.mat()))});
    return out;
  });
}

Arrow q_unitary(const ComplexMatrix &u) {
  if (!is_unitary(u, kDefaultTol)) throw std::invalid_argument("q_unitary: not unitary");
  std::size_t d = u.rows;
  return make_arrow("Q_U", [u, d](const Token &t) -> std::vector<BranchOutcome> {
    if (t.state.dim % d != 0) return {};
    ComplexMatrix big = tensor(u, ComplexMatrix::identity(t.state.dim / d));
    return {{t.index, DensityMatrix(big * t.state.mat() * adjoint(big))}};
  });
}

Arrow q_proj(std::size_t n, std::size_t i, int b) {
  if (i < 1 || i > n) throw std::invalid_argument("q_proj: index out of range");
  std::size_t d = std::size_t{1} << n;
  ComplexMatrix bra = measurement_bra(n, i, b);
  return make_arrow("Q_proj", [bra, d](const Token &t) -> std::vector<BranchOutcome> {
    if (t.state.dim % d != 0) return {};
    ComplexMatrix k = tensor(bra, ComplexMatrix::identity(t.state.dim / d));
    return {{t.index, DensityMatrix(k * t.state.mat() * adjoint(k))}};
  });
}

Arrow u_unitary(const ComplexMatrix &u) { return lca_apply(comb_A(), q_unitary(u)); }

Arrow pr_proj(std::size_t n, std::size_t i, int b) {
  return lca_apply(comb_A(), q_proj(n, i, b));
}

// ------------------------------------------------- bracket abstraction ----

ExprPtr evar(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Var;
  e->var = std::move(name);
  return e;
}
ExprPtr econst(Arrow a) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Const;
  e->constant = std::move(a);
  return e;
}
ExprPtr eapp(ExprPtr f, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::App;
  e->e0 = std::move(f);
  e->e1 = std::move(a);
  return e;
}
ExprPtr elam(std::string x, ExprPtr body) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Lam;
  e->var = std::move(x);
  e->e0 = std::move(body);
  return e;
}
ExprPtr ebang(ExprPtr closed) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Bang;
  e->e0 = std::move(closed);
  return e;
}

namespace {

bool expr_free(const ExprPtr &e, const std::string &x) {
  switch (e->kind) {
    case Expr::Kind::Var:
      return e->var == x;
    case Expr::Kind::Const:
      return false;
    case Expr::Kind::App:
      return expr_free(e->e0, x) || expr_free(e->e1, x);
    case Expr::Kind::Lam:
      return e->var != x && expr_free(e->e0, x);
    case Expr::Kind::Bang:
      return expr_free(e->e0, x);
  }
  return false;
}

Arrow eval_expr(const ExprPtr &e) {
  switch (e->kind) {
    case Expr::Kind::Const:
      return e->constant;
    case Expr::Kind::App:
      return lca_apply(eval_expr(e->e0), eval_expr(e->e1));
    case Expr::Kind::Var:
      throw std::invalid_argument("bracket_abstract: unbound variable " + e->var);
    default:
      throw std::logic_error("bracket_abstract: unexpanded node");
  }
}

// e is Lam/Bang-free; abstracts x with the affine I/K/B/C rules
ExprPtr abstract_var(const std::string &x, const ExprPtr &e) {
  if (e->kind == Expr::Kind::Var && e->var == x) return econst(comb_I());
  if (!expr_free(e, x)) return eapp(econst(comb_K()), e);
  if (e->kind != Expr::Kind::App)
    throw std::logic_error("bracket_abstract: malformed abstraction body");
  bool in_f = expr_free(e->e0, x);
  bool in_a = expr_free(e->e1, x);
  if (in_f && in_a)
    throw std::invalid_argument("bracket_abstract: non-affine use of " + x);
  if (in_f) return eapp(econst(comb_C()), abstract_var(x, e->e0), e->e1);
  // η: λx. f x = f when x not free in f
  if (e->e1->kind == Expr::Kind::Var && e->e1->var == x) return e->e0;
  return eapp(econst(comb_B()), e->e0, abstract_var(x, e->e1));
}

ExprPtr expand(const ExprPtr &e) {
  switch (e->kind) {
    case Expr::Kind::Var:
    case Expr::Kind::Const:
      return e;
    case Expr::Kind::App:
      return eapp(expand(e->e0), expand(e->e1));
    case Expr::Kind::Bang:
      return econst(lca_bang(eval_expr(expand(e->e0))));
    case Expr::Kind::Lam:
      return abstract_var(e->var, expand(e->e0));
  }
  return e;
}

const Arrow &comb_P() {
  // P = λxyz. z x y
  static Arrow a = [] {
    Arrow p = bracket_abstract(
        elam("x", elam("y", elam("z", eapp(evar("z"), evar("x"), evar("y"))))));
    return rename_arrow("P", p);
  }();
  return a;
}

const Arrow &comb_P_l() {
  static Arrow a = [] {
    Arrow p = bracket_abstract(elam("w", eapp(evar("w"), econst(comb_K()))));
    return rename_arrow("P_l", p);
  }();
  return a;
}

const Arrow &comb_P_r() {
  static Arrow a = [] {
    Arrow p = bracket_abstract(elam("w", eapp(evar("w"), econst(comb_Kbar()))));
    return rename_arrow("P_r", p);
  }();
  return a;
}

const Arrow &comb_C_P_to_Pdot() {
  static Arrow a = [] {
    Arrow p = bracket_abstract(elam("w", eapp(evar("w"), econst(comb_Pdot()))));
    return rename_arrow("C_P_to_Pdot", p);
  }();
  return a;
}

}  // namespace

Arrow bracket_abstract(const ExprPtr &e) { return eval_expr(expand(e)); }

// ------------------------------------------------------------ execution ----

RunResult run_token(const Arrow &a, const Token &t, std::size_t fuel) {
  auto &ctx = detail::run_ctx();
  auto saved = ctx;
  ctx.loop_fuel = fuel;
  ctx.exhausted = 0.0;
  RunResult res;
  res.outcomes = a->step(t);
  res.exhausted_mass = ctx.exhausted;
  ctx = saved;
  return res;
}

}  // namespace hoq
