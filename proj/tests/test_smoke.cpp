#include <gtest/gtest.h>

#include "hoq/denotation.hpp"
#include "hoq/operational.hpp"
#include "hoq/syntax.hpp"
#include "hoq/typing.hpp"

TEST(Smoke, FcoinBothSemantics) {
  hoq::TermPtr m =
      hoq::parse("(\\x:qbit. meas[1,1] x) (gate[H] (new[|0><0|]))");
  ASSERT_TRUE(hoq::check({}, m, hoq::bit_t()).has_value());
  hoq::ProbPair op = hoq::bigstep(m, 1000);
  EXPECT_NEAR(op.p, 0.5, 1e-9);
  EXPECT_NEAR(op.q, 0.5, 1e-9);
  hoq::ProbPair den = hoq::denote(m, 8, 2000);
  EXPECT_NEAR(den.p, 0.5, 1e-6);
  EXPECT_NEAR(den.q, 0.5, 1e-6);
}
