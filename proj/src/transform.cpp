#include "lockml/transform.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace lockml
{

namespace
{

GateType base_of( GateType t )
{
  switch ( t )
  {
  case GateType::And:
  case GateType::Nand:
    return GateType::And;
  case GateType::Or:
  case GateType::Nor:
    return GateType::Or;
  default:
    return GateType::Xor;
  }
}

bool inverting( GateType t )
{
  return t == GateType::Nand || t == GateType::Nor || t == GateType::Xnor || t == GateType::Not;
}

GateType flip_xor( GateType t )
{
  return t == GateType::Xor ? GateType::Xnor : GateType::Xor;
}

bool is_xor_family( GateType t )
{
  return t == GateType::Xor || t == GateType::Xnor;
}

void make_constant( Netlist& n, GateId g, bool value )
{
  n.set_fanins( g, {} );
  n.set_type( g, value ? GateType::Const1 : GateType::Const0 );
}

void remove_if_dead( Netlist& n, GateId g )
{
  const auto t = n.gate( g ).type;
  if ( n.alive( g ) && n.gate( g ).fanout.empty() && !n.is_output( g ) && t != GateType::Input &&
       t != GateType::KeyInput )
  {
    n.remove( g );
  }
}

constexpr std::array<std::pair<Pass, std::string_view>, 6> pass_names = { {
    { Pass::constant_propagation, "constant-propagation" },
    { Pass::double_inverter, "double-inverter" },
    { Pass::buffer_elision, "buffer-elision" },
    { Pass::run_collapse, "run-collapse" },
    { Pass::dead_gate, "dead-gate" },
    { Pass::not_absorption, "not-absorption" },
} };

} // namespace

std::string_view to_string( Pass pass )
{
  for ( const auto& [p, name] : pass_names )
  {
    if ( p == pass )
    {
      return name;
    }
  }
  return "?";
}

Pass pass_from_string( std::string_view name )
{
  for ( const auto& [p, n] : pass_names )
  {
    if ( n == name )
    {
      return p;
    }
  }
  throw Error( "config-schema", "unknown optimisation pass '" + std::string( name ) + "'" );
}

std::vector<Pass> default_passes()
{
  return { Pass::constant_propagation, Pass::double_inverter, Pass::buffer_elision,
           Pass::run_collapse,         Pass::dead_gate,       Pass::not_absorption };
}

Netlist to_generic( const Netlist& netlist )
{
  Netlist out = netlist;
  const auto slots = static_cast<GateId>( out.slot_count() );
  for ( GateId id = 0; id < slots; ++id )
  {
    const auto& g = out.gate( id );
    if ( g.removed )
    {
      continue;
    }
    if ( g.type == GateType::Output )
    {
      throw Error( "unsupported-gate", "OUTPUT marker cannot appear as a gate" );
    }
    if ( is_unary( g.type ) && g.fanin.size() != 1 )
    {
      throw Error( "arity", std::string( to_string( g.type ) ) + " '" + g.name + "' must have exactly one input" );
    }
    if ( !is_logic( g.type ) || is_unary( g.type ) )
    {
      continue;
    }
    const auto type = g.type;
    const auto fanin = g.fanin;
    if ( fanin.size() == 1 )
    {
      out.set_type( id, inverting( type ) ? GateType::Not : GateType::Buf );
      continue;
    }
    if ( fanin.size() <= 2 )
    {
      continue;
    }
    const auto base = base_of( type );
    const auto prefix = out.gate( id ).name + "_t";
    auto acc = out.add_gate( out.unique_name( prefix ), base, { fanin[0], fanin[1] } );
    for ( std::size_t i = 2; i + 1 < fanin.size(); ++i )
    {
      acc = out.add_gate( out.unique_name( prefix ), base, { acc, fanin[i] } );
    }
    out.set_fanins( id, { acc, fanin.back() } );
  }
  return out.compacted();
}

bool fold_constants( Netlist& n )
{
  bool changed = false;
  bool progress = true;
  while ( progress )
  {
    progress = false;
    for ( auto id : n.topological_order() )
    {
      const auto& g = n.gate( id );
      if ( !is_logic( g.type ) )
      {
        continue;
      }
      std::vector<GateId> live;
      std::vector<bool> consts;
      for ( auto f : g.fanin )
      {
        const auto ft = n.gate( f ).type;
        if ( is_constant( ft ) )
        {
          consts.push_back( ft == GateType::Const1 );
        }
        else
        {
          live.push_back( f );
        }
      }
      if ( consts.empty() )
      {
        continue;
      }
      const auto type = g.type;
      progress = changed = true;
      const bool inv = inverting( type );
      switch ( type )
      {
      case GateType::Not:
      case GateType::Buf:
        make_constant( n, id, consts[0] != inv );
        break;
      case GateType::And:
      case GateType::Nand:
      case GateType::Or:
      case GateType::Nor:
      {
        // controlling value forces the output; non-controlling constants drop out
        const bool controlling = base_of( type ) == GateType::Or;
        if ( std::find( consts.begin(), consts.end(), controlling ) != consts.end() )
        {
          make_constant( n, id, controlling != inv );
        }
        else if ( live.empty() )
        {
          make_constant( n, id, !controlling != inv );
        }
        else if ( live.size() == 1 )
        {
          n.set_fanins( id, live );
          n.set_type( id, inv ? GateType::Not : GateType::Buf );
        }
        else
        {
          n.set_fanins( id, live );
        }
        break;
      }
      default:
      {
        bool parity = inv;
        for ( bool c : consts )
        {
          parity = parity != c;
        }
        if ( live.empty() )
        {
          make_constant( n, id, parity );
        }
        else if ( live.size() == 1 )
        {
          n.set_fanins( id, live );
          n.set_type( id, parity ? GateType::Not : GateType::Buf );
        }
        else
        {
          n.set_fanins( id, live );
          n.set_type( id, parity ? GateType::Xnor : GateType::Xor );
        }
        break;
      }
      }
    }
  }
  // constants nobody reads any more
  for ( GateId id = 0; id < n.slot_count(); ++id )
  {
    if ( n.alive( id ) && is_constant( n.gate( id ).type ) && n.gate( id ).fanout.empty() && !n.is_output( id ) )
    {
      n.remove( id );
      changed = true;
    }
  }
  return changed;
}

bool remove_double_inverters( Netlist& n )
{
  bool changed = false;
  for ( GateId id = 0; id < n.slot_count(); ++id )
  {
    if ( !n.alive( id ) || n.gate( id ).type != GateType::Not )
    {
      continue;
    }
    const auto inner = n.gate( id ).fanin[0];
    if ( n.gate( inner ).type != GateType::Not )
    {
      continue;
    }
    n.redirect( id, n.gate( inner ).fanin[0] );
    n.remove( id );
    remove_if_dead( n, inner );
    changed = true;
  }
  return changed;
}

bool elide_buffers( Netlist& n )
{
  bool changed = false;
  for ( GateId id = 0; id < n.slot_count(); ++id )
  {
    if ( !n.alive( id ) || n.gate( id ).type != GateType::Buf )
    {
      continue;
    }
    n.redirect( id, n.gate( id ).fanin[0] );
    n.remove( id );
    changed = true;
  }
  return changed;
}

bool collapse_runs( Netlist& n )
{
  const auto key_only = key_only_gates( n );
  // a run member is an XOR/XNOR with exactly one key-only input
  auto side_pin = [&]( GateId g ) -> int {
    const auto& gate = n.gate( g );
    if ( !is_xor_family( gate.type ) || gate.fanin.size() != 2 || key_only[g] )
    {
      return -1;
    }
    const bool k0 = key_only[gate.fanin[0]];
    const bool k1 = key_only[gate.fanin[1]];
    if ( k0 == k1 )
    {
      return -1;
    }
    return k0 ? 0 : 1;
  };

  auto order = n.topological_order();
  std::vector<bool> done( n.slot_count(), false );
  bool changed = false;
  for ( auto it = order.rbegin(); it != order.rend(); ++it )
  {
    const auto head = *it;
    if ( done[head] || !n.alive( head ) || side_pin( head ) < 0 )
    {
      continue;
    }
    std::vector<GateId> chain{ head };
    done[head] = true;
    while ( true )
    {
      const auto cur = chain.back();
      const auto pin = side_pin( cur );
      const auto data = n.gate( cur ).fanin[1 - pin];
      if ( done[data] || side_pin( data ) < 0 || n.is_output( data ) || n.gate( data ).fanout.size() != 1 )
      {
        break;
      }
      chain.push_back( data );
      done[data] = true;
    }
    if ( chain.size() < 2 )
    {
      continue;
    }

    // sides in data-path order from the input end, parity of inversions
    std::vector<GateId> sides;
    bool parity = false;
    for ( auto g = chain.rbegin(); g != chain.rend(); ++g )
    {
      const auto pin = side_pin( *g );
      sides.push_back( n.gate( *g ).fanin[pin] );
      parity = parity != ( n.gate( *g ).type == GateType::Xnor );
    }
    const auto last = chain.back();
    const auto data_in = n.gate( last ).fanin[1 - side_pin( last )];

    // reuse the non-head members as an XOR tree over the key side inputs
    GateId acc = sides[0];
    for ( std::size_t j = 1; j < sides.size(); ++j )
    {
      const auto member = chain[chain.size() - j];
      n.set_fanins( member, { acc, sides[j] } );
      n.set_type( member, GateType::Xor );
      acc = member;
    }
    n.set_fanins( head, { acc, data_in } );
    n.set_type( head, parity ? GateType::Xnor : GateType::Xor );
    changed = true;
  }
  return changed;
}

bool remove_dead_gates( Netlist& n )
{
  bool changed = false;
  std::vector<GateId> work;
  for ( GateId id = 0; id < n.slot_count(); ++id )
  {
    work.push_back( id );
  }
  while ( !work.empty() )
  {
    const auto id = work.back();
    work.pop_back();
    if ( !n.alive( id ) )
    {
      continue;
    }
    const auto& g = n.gate( id );
    if ( !g.fanout.empty() || n.is_output( id ) || g.type == GateType::Input || g.type == GateType::KeyInput )
    {
      continue;
    }
    const auto fanin = g.fanin;
    n.remove( id );
    changed = true;
    work.insert( work.end(), fanin.begin(), fanin.end() );
  }
  return changed;
}

bool absorb_inverters( Netlist& n )
{
  bool changed = false;
  for ( GateId id = 0; id < n.slot_count(); ++id )
  {
    if ( !n.alive( id ) || !is_xor_family( n.gate( id ).type ) )
    {
      continue;
    }
    // XOR feeding only an inverter
    const auto& fo = n.gate( id ).fanout;
    if ( fo.size() == 1 && !n.is_output( id ) && n.gate( fo[0] ).type == GateType::Not )
    {
      const auto inv = fo[0];
      n.set_type( id, flip_xor( n.gate( id ).type ) );
      n.redirect( inv, id );
      n.remove( inv );
      changed = true;
      continue;
    }
    // inverter feeding only this XOR
    const auto fanin = n.gate( id ).fanin;
    for ( std::size_t pin = 0; pin < fanin.size(); ++pin )
    {
      const auto src = fanin[pin];
      const auto& s = n.gate( src );
      if ( s.type == GateType::Not && s.fanout.size() == 1 && !n.is_output( src ) )
      {
        n.set_fanin( id, pin, s.fanin[0] );
        n.set_type( id, flip_xor( n.gate( id ).type ) );
        n.remove( src );
        changed = true;
        break;
      }
    }
  }
  return changed;
}

Netlist optimize( const Netlist& netlist, const std::vector<Pass>& passes, std::uint64_t /*seed*/ )
{
  Netlist work = netlist;
  bool changed = true;
  while ( changed )
  {
    changed = false;
    for ( auto p : passes )
    {
      bool c = false;
      switch ( p )
      {
      case Pass::constant_propagation:
        c = fold_constants( work );
        break;
      case Pass::double_inverter:
        c = remove_double_inverters( work );
        break;
      case Pass::buffer_elision:
        c = elide_buffers( work );
        break;
      case Pass::run_collapse:
        c = collapse_runs( work );
        break;
      case Pass::dead_gate:
        c = remove_dead_gates( work );
        break;
      case Pass::not_absorption:
        c = absorb_inverters( work );
        break;
      }
      changed = changed || c;
    }
  }
  return work.compacted();
}

} // namespace lockml
