#include "lockml/simulate.hpp"

#include "lockml/transform.hpp"

#include <string>

namespace lockml
{

std::uint64_t evaluate_gate( GateType type, std::span<const std::uint64_t> in )
{
  constexpr std::uint64_t ones = ~std::uint64_t{ 0 };
  switch ( type )
  {
  case GateType::Buf:
  case GateType::Dff:
    return in[0];
  case GateType::Not:
    return ~in[0];
  case GateType::And:
  case GateType::Nand:
  {
    auto v = ones;
    for ( auto x : in )
    {
      v &= x;
    }
    return type == GateType::And ? v : ~v;
  }
  case GateType::Or:
  case GateType::Nor:
  {
    std::uint64_t v = 0;
    for ( auto x : in )
    {
      v |= x;
    }
    return type == GateType::Or ? v : ~v;
  }
  case GateType::Xor:
  case GateType::Xnor:
  {
    std::uint64_t v = 0;
    for ( auto x : in )
    {
      v ^= x;
    }
    return type == GateType::Xor ? v : ~v;
  }
  case GateType::Const0:
    return 0;
  case GateType::Const1:
    return ones;
  default:
    throw Error( "unsupported-gate", "cannot evaluate " + std::string( to_string( type ) ) );
  }
}

Simulator::Simulator( const Netlist& netlist ) : netlist_( netlist ), order_( netlist.topological_order() ) {}

std::vector<std::uint64_t> Simulator::run( std::span<const std::uint64_t> primary_inputs,
                                           std::span<const std::uint64_t> key_inputs,
                                           std::span<const std::uint64_t> ff_state ) const
{
  const auto& pis = netlist_.primary_inputs();
  const auto& keys = netlist_.key_inputs();
  const auto& ffs = netlist_.flipflops();
  if ( primary_inputs.size() != pis.size() || key_inputs.size() != keys.size() || ff_state.size() != ffs.size() )
  {
    throw Error( "missing-assignment", "simulation input words do not match the netlist interface" );
  }
  std::vector<std::uint64_t> values( netlist_.slot_count(), 0 );
  for ( std::size_t i = 0; i < pis.size(); ++i )
  {
    values[pis[i]] = primary_inputs[i];
  }
  for ( std::size_t i = 0; i < keys.size(); ++i )
  {
    values[keys[i]] = key_inputs[i];
  }
  for ( std::size_t i = 0; i < ffs.size(); ++i )
  {
    values[ffs[i]] = ff_state[i];
  }
  std::vector<std::uint64_t> scratch;
  for ( auto id : order_ )
  {
    const auto& g = netlist_.gate( id );
    if ( g.type == GateType::Input || g.type == GateType::KeyInput || g.type == GateType::Dff )
    {
      continue;
    }
    scratch.clear();
    for ( auto f : g.fanin )
    {
      scratch.push_back( values[f] );
    }
    values[id] = evaluate_gate( g.type, scratch );
  }
  return values;
}

std::vector<std::uint64_t> Simulator::outputs( const std::vector<std::uint64_t>& values ) const
{
  std::vector<std::uint64_t> out;
  out.reserve( netlist_.primary_outputs().size() );
  for ( auto o : netlist_.primary_outputs() )
  {
    out.push_back( values[o] );
  }
  return out;
}

std::vector<std::uint64_t> Simulator::next_state( const std::vector<std::uint64_t>& values ) const
{
  std::vector<std::uint64_t> out;
  out.reserve( netlist_.flipflops().size() );
  for ( auto ff : netlist_.flipflops() )
  {
    out.push_back( values[netlist_.gate( ff ).fanin[0]] );
  }
  return out;
}

SimulationResult simulate( const Netlist& netlist, const std::unordered_map<GateId, bool>& assignment,
                           const std::unordered_map<GateId, bool>& ff_state )
{
  auto gather = [&]( const std::vector<GateId>& ids ) {
    std::vector<std::uint64_t> words;
    words.reserve( ids.size() );
    for ( auto id : ids )
    {
      auto it = assignment.find( id );
      if ( it == assignment.end() )
      {
        throw Error( "missing-assignment", "no value assigned to input '" + netlist.gate( id ).name + "'" );
      }
      words.push_back( it->second ? 1u : 0u );
    }
    return words;
  };
  const auto pi = gather( netlist.primary_inputs() );
  const auto keys = gather( netlist.key_inputs() );
  std::vector<std::uint64_t> ff;
  for ( auto id : netlist.flipflops() )
  {
    auto it = ff_state.find( id );
    ff.push_back( it != ff_state.end() && it->second ? 1u : 0u );
  }

  const Simulator sim( netlist );
  const auto values = sim.run( pi, keys, ff );
  SimulationResult result;
  for ( auto w : sim.outputs( values ) )
  {
    result.outputs.push_back( ( w & 1u ) != 0 );
  }
  for ( auto w : sim.next_state( values ) )
  {
    result.next_state.push_back( ( w & 1u ) != 0 );
  }
  return result;
}

Netlist apply_key( const Netlist& netlist, const Key& key )
{
  if ( key.size() != netlist.key_inputs().size() )
  {
    throw Error( "length-mismatch", "key has " + std::to_string( key.size() ) + " bits but the netlist has " +
                                        std::to_string( netlist.key_inputs().size() ) + " key inputs" );
  }
  Netlist out = netlist;
  for ( std::size_t i = key.size(); i-- > 0; )
  {
    out.fix_key_input( i, key[i] );
  }
  fold_constants( out );
  return out.compacted();
}

} // namespace lockml
