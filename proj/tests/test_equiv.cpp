#include "oracles.hpp"

#include "lockml/bench.hpp"
#include "lockml/equiv.hpp"
#include "lockml/generate.hpp"

#include <gtest/gtest.h>

using namespace lockml;

TEST( Equiv, Reflexive )
{
  const auto n = random_circuit( { .inputs = 10, .gates = 100 }, 4 );
  EXPECT_TRUE( equiv_check( n, n, EquivOptions::exhaustive() ).equivalent );
  EXPECT_TRUE( equiv_check( n, n, EquivOptions::random( 1000, 1 ) ).equivalent );
}

TEST( Equiv, ExhaustiveCountsAllPatterns )
{
  const auto n = random_circuit( { .inputs = 9, .gates = 40 }, 4 );
  EXPECT_EQ( equiv_check( n, n, EquivOptions::exhaustive() ).vectors_checked, 512u );
}

TEST( Equiv, CounterexampleDistinguishes )
{
  const auto a = parse_bench( "INPUT(x)\nINPUT(y)\nINPUT(w)\nOUTPUT(z)\nt = AND(x, y)\nz = OR(t, w)\n" );
  const auto b = parse_bench( "INPUT(x)\nINPUT(y)\nINPUT(w)\nOUTPUT(z)\nt = NAND(x, y)\nz = OR(t, w)\n" );
  for ( auto opt : { EquivOptions::exhaustive(), EquivOptions::random( 100, 3 ) } )
  {
    const auto r = equiv_check( a, b, opt );
    ASSERT_FALSE( r.equivalent );
    EXPECT_NE( oracle::eval( a, r.counterexample ), oracle::eval( b, r.counterexample ) );
    EXPECT_FALSE( r.counterexample.at( "w" ) );
  }
}

TEST( Equiv, SymmetricForFixedSeed )
{
  for ( std::uint64_t seed = 0; seed < 10; ++seed )
  {
    const auto a = random_circuit( { .inputs = 12, .gates = 60, .outputs = 3 }, seed );
    auto b = a;
    // perturb one gate
    const auto victim = b.primary_outputs()[0];
    if ( is_unary( b.gate( victim ).type ) )
    {
      continue;
    }
    b.set_type( victim, b.gate( victim ).type == GateType::And ? GateType::Or : GateType::And );
    for ( auto opt : { EquivOptions::exhaustive(), EquivOptions::random( 500, seed ) } )
    {
      const auto ab = equiv_check( a, b, opt );
      const auto ba = equiv_check( b, a, opt );
      EXPECT_EQ( ab.equivalent, ba.equivalent );
      EXPECT_EQ( ab.counterexample, ba.counterexample );
    }
  }
}

TEST( Equiv, AgreesWithReferenceOnExhaustiveMode )
{
  for ( std::uint64_t seed = 0; seed < 10; ++seed )
  {
    const auto a = random_circuit( { .inputs = 7, .gates = 30, .outputs = 2 }, seed );
    auto b = a;
    const auto victim = b.primary_outputs().back();
    if ( is_unary( b.gate( victim ).type ) )
    {
      continue;
    }
    b.set_type( victim, GateType::Xor );
    bool differ = false;
    for ( std::uint64_t p = 0; p < 128 && !differ; ++p )
    {
      const auto env = oracle::assignment( a, p );
      differ = oracle::eval( a, env ) != oracle::eval( b, env );
    }
    EXPECT_EQ( equiv_check( a, b, EquivOptions::exhaustive() ).equivalent, !differ );
  }
}

TEST( Equiv, Errors )
{
  const auto a = parse_bench( "INPUT(x)\nOUTPUT(z)\nz = NOT(x)\n" );
  const auto b = parse_bench( "INPUT(y)\nOUTPUT(z)\nz = NOT(y)\n" );
  try
  {
    equiv_check( a, b, EquivOptions::exhaustive() );
    FAIL();
  }
  catch ( const Error& e )
  {
    EXPECT_EQ( e.kind(), "interface-mismatch" );
  }
  const auto big = random_circuit( { .inputs = 25, .gates = 30 }, 1 );
  try
  {
    equiv_check( big, big, EquivOptions::exhaustive() );
    FAIL();
  }
  catch ( const Error& e )
  {
    EXPECT_EQ( e.kind(), "exhaustive-too-large" );
  }
}

TEST( Equiv, SequentialComparedAtFlipFlopBoundaries )
{
  const auto a = parse_bench( "INPUT(a)\nOUTPUT(z)\nq = DFF(d)\nd = XOR(a, q)\nz = BUF(q)\n" );
  const auto b = parse_bench( "INPUT(a)\nOUTPUT(z)\nq = DFF(d)\nd = XNOR(a, q)\nz = BUF(q)\n" );
  EXPECT_TRUE( equiv_check( a, a, EquivOptions::exhaustive() ).equivalent );
  EXPECT_FALSE( equiv_check( a, b, EquivOptions::exhaustive() ).equivalent );
}
