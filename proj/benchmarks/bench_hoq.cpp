#include <benchmark/benchmark.h>

#include "hoq/denotation.hpp"
#include "hoq/goi.hpp"
#include "hoq/operational.hpp"
#include "hoq/syntax.hpp"
#include "hoq/typing.hpp"

namespace {

const char *kFcoin = "(\\x:qbit. meas[1,1] x) (gate[H] (new[|0><0|]))";

void bench_parse(benchmark::State &state) {
  for (auto _ : state) benchmark::DoNotOptimize(hoq::parse(kFcoin));
}
BENCHMARK(bench_parse);

void bench_infer(benchmark::State &state) {
  hoq::TermPtr m = hoq::parse(kFcoin);
  for (auto _ : state)
    benchmark::DoNotOptimize(hoq::infer_principal({}, m));
}
BENCHMARK(bench_infer);

void bench_bigstep(benchmark::State &state) {
  hoq::TermPtr m = hoq::parse(kFcoin);
  for (auto _ : state) {
    hoq::ProbPair r = hoq::bigstep(m, 100);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bench_bigstep);

void bench_bracket(benchmark::State &state) {
  using namespace hoq;
  for (auto _ : state) {
    ExprPtr e = elam("x", elam("y", eapp(evar("y"), evar("x"))));
    benchmark::DoNotOptimize(bracket_abstract(e));
  }
}
BENCHMARK(bench_bracket);

void bench_token_run(benchmark::State &state) {
  using namespace hoq;
  Arrow a = lca_apply(combinator("I"), combinator("K"));
  Token t{BigNat(0), DensityMatrix::scalar(1.0)};
  for (auto _ : state) benchmark::DoNotOptimize(run_token(a, t, 1000));
}
BENCHMARK(bench_token_run);

void bench_denote(benchmark::State &state) {
  hoq::TermPtr m = hoq::parse(kFcoin);
  for (auto _ : state) {
    hoq::ProbPair r = hoq::denote(m, 8, 2000);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bench_denote);

}  // namespace

BENCHMARK_MAIN();
