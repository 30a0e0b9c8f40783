#include "oracles.hpp"

#include "lockml/bench.hpp"
#include "lockml/equiv.hpp"
#include "lockml/generate.hpp"
#include "lockml/locking.hpp"
#include "lockml/simulate.hpp"
#include "lockml/transform.hpp"

#include <gtest/gtest.h>

using namespace lockml;

namespace
{

std::vector<Netlist> corpus()
{
  std::vector<Netlist> out;
  for ( std::uint64_t seed = 0; seed < 25; ++seed )
  {
    const auto base = random_circuit(
        { .inputs = 6 + seed % 7, .gates = 40 + 5 * seed, .outputs = 4, .max_fanin = 2 + seed % 3, .unary_fraction = 0.3 },
        seed );
    out.push_back( to_generic( base ) );
    // locked variants exercise the key-gate rewrites
    out.push_back( lock_epic( out.back(), keygen( 6, seed ), seed ).first );
  }
  out.push_back( ripple_carry_adder( 4 ) );
  out.push_back( c17() );
  return out;
}

bool equivalent( const Netlist& a, const Netlist& b )
{
  return equiv_check( a, b, EquivOptions::exhaustive() ).equivalent;
}

} // namespace

TEST( ToGeneric, NaryAndBecomesLeftLeaningTree )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nz = AND(a, b, c)\n" );
  const auto g = to_generic( n );
  EXPECT_TRUE( is_generic( g ) );
  const auto& z = g.gate( *g.find( "z" ) );
  EXPECT_EQ( z.type, GateType::And );
  ASSERT_EQ( z.fanin.size(), 2u );
  EXPECT_EQ( g.gate( z.fanin[1] ).name, "c" );
  const auto& inner = g.gate( z.fanin[0] );
  EXPECT_EQ( inner.type, GateType::And );
  EXPECT_EQ( g.gate( inner.fanin[0] ).name, "a" );
  EXPECT_EQ( g.gate( inner.fanin[1] ).name, "b" );
  EXPECT_TRUE( equivalent( n, g ) );
}

TEST( ToGeneric, InvertingGatesKeepInversionAtRoot )
{
  for ( auto kw : { "NAND", "NOR", "XNOR", "XOR", "OR" } )
  {
    const auto n = parse_bench( std::string( "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(z)\nz = " ) + kw +
                                "(a, b, c, d)\n" );
    const auto g = to_generic( n );
    EXPECT_TRUE( is_generic( g ) );
    EXPECT_EQ( g.gate_count(), 3u );
    EXPECT_TRUE( equivalent( n, g ) ) << kw;
  }
}

TEST( ToGeneric, BinaryNetlistUnchanged )
{
  const auto n = random_circuit( { .inputs = 8, .gates = 50 }, 2 );
  const auto g = to_generic( n );
  EXPECT_EQ( write_bench( g ), write_bench( n ) );
}

TEST( ToGeneric, FullAdderSumExhaustive )
{
  const auto n = parse_bench( "INPUT(A)\nINPUT(B)\nINPUT(Cin)\nOUTPUT(S)\nS = XOR(A, B, Cin)\n" );
  const auto g = to_generic( n );
  EXPECT_EQ( g.gate_count(), 2u );
  EXPECT_EQ( equiv_check( n, g, EquivOptions::exhaustive() ).vectors_checked, 8u );
  EXPECT_TRUE( equivalent( n, g ) );
}

TEST( Optimize, DoubleInverter )
{
  const auto n = parse_bench( "INPUT(x)\nINPUT(y)\nOUTPUT(z)\na = NOT(x)\nb = NOT(a)\nz = AND(b, y)\n" );
  const auto o = optimize( n, default_passes() );
  EXPECT_EQ( o.gate_count(), 1u );
  const auto& z = o.gate( *o.find( "z" ) );
  EXPECT_EQ( o.gate( z.fanin[0] ).name, "x" );
}

TEST( Optimize, ZeroKeyChainBecomesWire )
{
  const auto n = parse_bench( "INPUT(s)\nINPUT(t)\nINPUT(keyinput0)\nINPUT(keyinput1)\nOUTPUT(z)\n"
                              "a = XOR(keyinput0, s)\nb = XOR(keyinput1, a)\nz = AND(b, t)\n" );
  const auto o = optimize( apply_key( n, Key::from_string( "00" ) ), default_passes() );
  EXPECT_EQ( o.gate_count(), 1u );
  const auto& z = o.gate( *o.find( "z" ) );
  EXPECT_EQ( o.gate( z.fanin[0] ).name, "s" );
}

TEST( Optimize, XnorPairOnOneDataPathCollapses )
{
  const auto n = parse_bench( "INPUT(s)\nINPUT(t)\nINPUT(keyinput0)\nINPUT(keyinput1)\nOUTPUT(z)\n"
                              "a = XNOR(keyinput0, s)\nb = XNOR(keyinput1, a)\nz = AND(b, t)\n" );
  const auto o = optimize( n, default_passes() );
  EXPECT_TRUE( equivalent( n, o ) );
  // exactly one gate on the data path between s and z, with even parity
  const auto& z = o.gate( *o.find( "z" ) );
  const auto& kg = o.gate( z.fanin[0] );
  EXPECT_EQ( kg.type, GateType::Xor );
  EXPECT_EQ( o.gate( kg.fanin[1] ).name, "s" );
  // with the key fixed the chain disappears entirely
  const auto fixed = optimize( apply_key( n, Key::from_string( "11" ) ), default_passes() );
  EXPECT_EQ( fixed.gate_count(), 1u );
}

TEST( Optimize, OddParityChainKeepsInversion )
{
  const auto n = parse_bench( "INPUT(s)\nINPUT(keyinput0)\nINPUT(keyinput1)\nINPUT(keyinput2)\nOUTPUT(z)\n"
                              "a = XNOR(keyinput0, s)\nb = XOR(keyinput1, a)\nc = XOR(keyinput2, b)\nz = NOT(c)\n" );
  const auto o = optimize( n, { Pass::run_collapse } );
  EXPECT_TRUE( equivalent( n, o ) );
  const auto head = o.gate( *o.find( "z" ) ).fanin[0];
  EXPECT_EQ( o.gate( head ).type, GateType::Xnor );
}

TEST( Optimize, NotAbsorptionTurnsXorNotIntoXnor )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nx = XOR(a, b)\ny = NOT(x)\nz = AND(y, c)\n" );
  const auto o = optimize( n, { Pass::not_absorption } );
  EXPECT_EQ( o.gate_count(), 2u );
  EXPECT_EQ( o.gate( o.gate( *o.find( "z" ) ).fanin[0] ).type, GateType::Xnor );
  EXPECT_TRUE( equivalent( n, o ) );
}

TEST( Optimize, ConstantPropagation )
{
  const auto n = parse_bench( "INPUT(a)\nOUTPUT(z)\nk = CONST1()\nx = AND(a, k)\nz = NOR(x, x)\n" );
  const auto o = optimize( n, default_passes() );
  EXPECT_TRUE( equivalent( n, o ) );
  EXPECT_LE( o.gate_count(), 1u );
}

TEST( Optimize, EveryPassPreservesEquivalence )
{
  const auto all = corpus();
  for ( std::size_t i = 0; i < all.size(); ++i )
  {
    for ( auto p : default_passes() )
    {
      const auto o = optimize( all[i], { p } );
      ASSERT_TRUE( validate( o ).empty() ) << to_string( p ) << " netlist " << i;
      ASSERT_TRUE( equivalent( all[i], o ) ) << to_string( p ) << " netlist " << i;
    }
    ASSERT_TRUE( equivalent( all[i], optimize( all[i], default_passes() ) ) ) << i;
  }
}

TEST( Optimize, IdempotentAndNeverGrows )
{
  for ( const auto& n : corpus() )
  {
    const auto once = optimize( n, default_passes() );
    const auto twice = optimize( once, default_passes() );
    EXPECT_LE( once.gate_count(), n.gate_count() );
    EXPECT_EQ( write_bench( once ), write_bench( twice ) );
  }
}

TEST( Optimize, PassNames )
{
  for ( auto p : default_passes() )
  {
    EXPECT_EQ( pass_from_string( to_string( p ) ), p );
  }
  EXPECT_THROW( pass_from_string( "sat-sweep" ), Error );
}
