#include "lockml/generate.hpp"

#include <algorithm>
#include <string>

namespace lockml
{

namespace
{

constexpr GateType binary_types[] = { GateType::And, GateType::Nand, GateType::Or,
                                      GateType::Nor, GateType::Xor,  GateType::Xnor };

GateId pick( Rng& rng, const std::vector<GateId>& signals, std::size_t locality )
{
  if ( signals.size() > locality && rng.bernoulli( 0.8 ) )
  {
    return signals[signals.size() - 1 - rng.uniform_index( locality )];
  }
  return signals[rng.uniform_index( signals.size() )];
}

struct FullAdder
{
  GateId sum;
  GateId carry;
};

FullAdder full_adder( Netlist& n, const std::string& tag, GateId a, GateId b, GateId c )
{
  const auto p = n.add_gate( tag + "_p", GateType::Xor, { a, b } );
  const auto s = n.add_gate( tag + "_s", GateType::Xor, { p, c } );
  const auto g1 = n.add_gate( tag + "_g", GateType::Nand, { a, b } );
  const auto g2 = n.add_gate( tag + "_h", GateType::Nand, { p, c } );
  const auto co = n.add_gate( tag + "_c", GateType::Nand, { g1, g2 } );
  return { s, co };
}

FullAdder half_adder( Netlist& n, const std::string& tag, GateId a, GateId b )
{
  return { n.add_gate( tag + "_s", GateType::Xor, { a, b } ), n.add_gate( tag + "_c", GateType::And, { a, b } ) };
}

} // namespace

Netlist random_circuit( const RandomCircuitParams& params, std::uint64_t seed )
{
  if ( params.inputs < 2 || params.gates < 1 || params.max_fanin < 2 )
  {
    throw Error( "config-schema", "random circuit needs >= 2 inputs, >= 1 gate and max_fanin >= 2" );
  }
  Rng rng( seed );
  Netlist n;
  std::vector<GateId> signals;
  for ( std::size_t i = 0; i < params.inputs; ++i )
  {
    signals.push_back( n.add_input( "pi" + std::to_string( i ) ) );
  }
  for ( std::size_t i = 0; i < params.gates; ++i )
  {
    const auto name = "g" + std::to_string( i );
    if ( rng.bernoulli( params.unary_fraction ) )
    {
      const auto type = rng.bernoulli( 0.75 ) ? GateType::Not : GateType::Buf;
      signals.push_back( n.add_gate( name, type, { pick( rng, signals, params.locality ) } ) );
      continue;
    }
    const auto type = binary_types[rng.uniform_index( std::size( binary_types ) )];
    auto arity = 2 + rng.uniform_index( params.max_fanin - 1 );
    std::vector<GateId> fanin;
    for ( std::size_t tries = 0; fanin.size() < arity && tries < 8 * arity; ++tries )
    {
      const auto s = pick( rng, signals, params.locality );
      if ( std::find( fanin.begin(), fanin.end(), s ) == fanin.end() )
      {
        fanin.push_back( s );
      }
    }
    signals.push_back( n.add_gate( name, type, std::move( fanin ) ) );
  }

  // every sink is an output; top up with random internal signals
  std::vector<GateId> outputs;
  for ( auto s : signals )
  {
    if ( n.gate( s ).type != GateType::Input && n.gate( s ).fanout.empty() )
    {
      outputs.push_back( s );
    }
  }
  for ( std::size_t tries = 0; outputs.size() < params.outputs && tries < 4 * params.gates; ++tries )
  {
    const auto s = signals[params.inputs + rng.uniform_index( params.gates )];
    if ( std::find( outputs.begin(), outputs.end(), s ) == outputs.end() )
    {
      outputs.push_back( s );
    }
  }
  std::sort( outputs.begin(), outputs.end() );
  for ( auto o : outputs )
  {
    n.add_output( o );
  }
  return n;
}

Netlist ripple_carry_adder( std::size_t bits )
{
  if ( bits == 0 )
  {
    throw Error( "config-schema", "adder width must be at least 1" );
  }
  Netlist n;
  std::vector<GateId> a, b;
  for ( std::size_t i = 0; i < bits; ++i )
  {
    a.push_back( n.add_input( "a" + std::to_string( i ) ) );
  }
  for ( std::size_t i = 0; i < bits; ++i )
  {
    b.push_back( n.add_input( "b" + std::to_string( i ) ) );
  }
  auto carry = n.add_input( "cin" );
  std::vector<GateId> sums;
  for ( std::size_t i = 0; i < bits; ++i )
  {
    const auto fa = full_adder( n, "fa" + std::to_string( i ), a[i], b[i], carry );
    sums.push_back( fa.sum );
    carry = fa.carry;
  }
  for ( auto s : sums )
  {
    n.add_output( s );
  }
  n.add_output( carry );
  return n;
}

Netlist array_multiplier( std::size_t bits )
{
  if ( bits < 2 )
  {
    throw Error( "config-schema", "multiplier width must be at least 2" );
  }
  Netlist n;
  std::vector<GateId> a, b;
  for ( std::size_t i = 0; i < bits; ++i )
  {
    a.push_back( n.add_input( "a" + std::to_string( i ) ) );
  }
  for ( std::size_t i = 0; i < bits; ++i )
  {
    b.push_back( n.add_input( "b" + std::to_string( i ) ) );
  }
  // columns of partial products, reduced with a carry-save ripple per row
  std::vector<std::vector<GateId>> columns( 2 * bits );
  for ( std::size_t i = 0; i < bits; ++i )
  {
    for ( std::size_t j = 0; j < bits; ++j )
    {
      columns[i + j].push_back(
          n.add_gate( "pp" + std::to_string( i ) + "_" + std::to_string( j ), GateType::And, { a[i], b[j] } ) );
    }
  }
  std::vector<GateId> product;
  std::size_t counter = 0;
  for ( std::size_t c = 0; c < columns.size(); ++c )
  {
    auto& col = columns[c];
    while ( col.size() > 1 )
    {
      const auto tag = "add" + std::to_string( counter++ );
      FullAdder r;
      if ( col.size() >= 3 )
      {
        r = full_adder( n, tag, col[0], col[1], col[2] );
        col.erase( col.begin(), col.begin() + 3 );
      }
      else
      {
        r = half_adder( n, tag, col[0], col[1] );
        col.erase( col.begin(), col.begin() + 2 );
      }
      col.push_back( r.sum );
      if ( c + 1 < columns.size() )
      {
        columns[c + 1].push_back( r.carry );
      }
    }
    if ( !col.empty() )
    {
      product.push_back( col[0] );
    }
  }
  for ( auto p : product )
  {
    n.add_output( p );
  }
  return n;
}

Netlist c17()
{
  Netlist n;
  const auto g1 = n.add_input( "G1" );
  const auto g2 = n.add_input( "G2" );
  const auto g3 = n.add_input( "G3" );
  const auto g6 = n.add_input( "G6" );
  const auto g7 = n.add_input( "G7" );
  const auto g10 = n.add_gate( "G10", GateType::Nand, { g1, g3 } );
  const auto g11 = n.add_gate( "G11", GateType::Nand, { g3, g6 } );
  const auto g16 = n.add_gate( "G16", GateType::Nand, { g2, g11 } );
  const auto g19 = n.add_gate( "G19", GateType::Nand, { g11, g7 } );
  const auto g22 = n.add_gate( "G22", GateType::Nand, { g10, g16 } );
  const auto g23 = n.add_gate( "G23", GateType::Nand, { g16, g19 } );
  n.add_output( g22 );
  n.add_output( g23 );
  return n;
}

} // namespace lockml
