#include "lockml/netlist.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <deque>
#include <string>

namespace lockml
{

namespace
{

constexpr std::array<std::string_view, 14> type_names = {
    "NOT", "AND", "NAND", "OR", "XOR", "NOR", "XNOR", "BUF", "DFF", "INPUT", "KEYINPUT", "OUTPUT", "CONST0", "CONST1" };

std::string upper( std::string_view s )
{
  std::string r( s );
  for ( auto& c : r )
  {
    c = static_cast<char>( std::toupper( static_cast<unsigned char>( c ) ) );
  }
  return r;
}

void erase_one( std::vector<GateId>& v, GateId value )
{
  if ( auto it = std::find( v.begin(), v.end(), value ); it != v.end() )
  {
    v.erase( it );
  }
}

} // namespace

std::string_view to_string( GateType type )
{
  return type_names[static_cast<std::size_t>( type )];
}

std::optional<GateType> gate_type_from_keyword( std::string_view keyword )
{
  const auto k = upper( keyword );
  if ( k == "BUFF" )
  {
    return GateType::Buf;
  }
  for ( std::size_t i = 0; i < type_names.size(); ++i )
  {
    if ( k == type_names[i] )
    {
      const auto t = static_cast<GateType>( i );
      if ( t == GateType::Input || t == GateType::KeyInput || t == GateType::Output )
      {
        return std::nullopt;
      }
      return t;
    }
  }
  return std::nullopt;
}

std::string Key::to_string() const
{
  std::string s;
  s.reserve( bits.size() );
  for ( auto b : bits )
  {
    s.push_back( b ? '1' : '0' );
  }
  return s;
}

Key Key::from_string( std::string_view text )
{
  Key k;
  for ( char c : text )
  {
    if ( c != '0' && c != '1' )
    {
      throw Error( "key-format", "key strings may only contain '0' and '1'" );
    }
    k.bits.push_back( c == '1' ? 1 : 0 );
  }
  return k;
}

Netlist Netlist::from_raw( std::vector<Gate> gates, std::vector<GateId> primary_inputs,
                           std::vector<GateId> key_inputs, std::vector<GateId> primary_outputs )
{
  Netlist n;
  n.gates_ = std::move( gates );
  n.output_refs_.assign( n.gates_.size(), 0 );
  n.primary_inputs_ = std::move( primary_inputs );
  n.key_inputs_ = std::move( key_inputs );
  n.primary_outputs_ = std::move( primary_outputs );
  for ( GateId id = 0; id < n.gates_.size(); ++id )
  {
    n.names_.emplace( n.gates_[id].name, id );
    if ( n.gates_[id].type == GateType::Dff && !n.gates_[id].removed )
    {
      n.flipflops_.push_back( id );
    }
  }
  for ( auto o : n.primary_outputs_ )
  {
    if ( o < n.output_refs_.size() )
    {
      ++n.output_refs_[o];
    }
  }
  return n;
}

GateId Netlist::push( std::string name, GateType type, std::vector<GateId> fanin )
{
  if ( names_.count( name ) )
  {
    throw Error( "duplicate-definition", "signal '" + name + "' is defined twice" );
  }
  const auto id = static_cast<GateId>( gates_.size() );
  for ( auto f : fanin )
  {
    if ( f >= gates_.size() || gates_[f].removed )
    {
      throw Error( "dangling-fanin", "gate '" + name + "' references an unknown fanin" );
    }
  }
  names_.emplace( name, id );
  gates_.push_back( Gate{ std::move( name ), type, std::move( fanin ), {}, false } );
  output_refs_.push_back( 0 );
  for ( auto f : gates_.back().fanin )
  {
    gates_[f].fanout.push_back( id );
  }
  return id;
}

GateId Netlist::add_input( std::string name )
{
  const auto id = push( std::move( name ), GateType::Input, {} );
  primary_inputs_.push_back( id );
  return id;
}

GateId Netlist::add_key_input( std::string name )
{
  const auto id = push( std::move( name ), GateType::KeyInput, {} );
  key_inputs_.push_back( id );
  return id;
}

GateId Netlist::add_gate( std::string name, GateType type, std::vector<GateId> fanin )
{
  if ( type == GateType::Input || type == GateType::KeyInput || type == GateType::Output )
  {
    throw Error( "unsupported-gate", "use add_input/add_key_input/add_output for structural markers" );
  }
  const auto id = push( std::move( name ), type, std::move( fanin ) );
  if ( type == GateType::Dff )
  {
    flipflops_.push_back( id );
  }
  return id;
}

void Netlist::add_output( GateId driver )
{
  if ( !alive( driver ) )
  {
    throw Error( "dangling-fanin", "output references an unknown gate" );
  }
  primary_outputs_.push_back( driver );
  ++output_refs_[driver];
}

void Netlist::set_fanin( GateId gate, std::size_t pin, GateId source )
{
  auto& g = gates_[gate];
  erase_one( gates_[g.fanin[pin]].fanout, gate );
  g.fanin[pin] = source;
  gates_[source].fanout.push_back( gate );
}

void Netlist::set_fanins( GateId gate, std::vector<GateId> fanin )
{
  auto& g = gates_[gate];
  for ( auto f : g.fanin )
  {
    erase_one( gates_[f].fanout, gate );
  }
  g.fanin = std::move( fanin );
  for ( auto f : g.fanin )
  {
    gates_[f].fanout.push_back( gate );
  }
}

void Netlist::set_type( GateId gate, GateType type )
{
  auto& g = gates_[gate];
  if ( ( g.type == GateType::Dff ) != ( type == GateType::Dff ) )
  {
    if ( type == GateType::Dff )
    {
      flipflops_.push_back( gate );
    }
    else
    {
      erase_one( flipflops_, gate );
    }
  }
  g.type = type;
}

void Netlist::redirect( GateId from, GateId to )
{
  if ( from == to )
  {
    return;
  }
  auto users = gates_[from].fanout;
  std::sort( users.begin(), users.end() );
  users.erase( std::unique( users.begin(), users.end() ), users.end() );
  for ( auto u : users )
  {
    auto& fi = gates_[u].fanin;
    for ( auto& f : fi )
    {
      if ( f == from )
      {
        f = to;
        gates_[to].fanout.push_back( u );
      }
    }
  }
  gates_[from].fanout.clear();
  for ( auto& o : primary_outputs_ )
  {
    if ( o == from )
    {
      o = to;
      --output_refs_[from];
      ++output_refs_[to];
    }
  }
}

void Netlist::remove( GateId gate )
{
  auto& g = gates_[gate];
  if ( !g.fanout.empty() || output_refs_[gate] > 0 )
  {
    throw Error( "internal", "cannot remove gate '" + g.name + "' while it is in use" );
  }
  for ( auto f : g.fanin )
  {
    erase_one( gates_[f].fanout, gate );
  }
  g.fanin.clear();
  if ( g.type == GateType::Dff )
  {
    erase_one( flipflops_, gate );
  }
  if ( g.type == GateType::Input )
  {
    erase_one( primary_inputs_, gate );
  }
  if ( g.type == GateType::KeyInput )
  {
    erase_one( key_inputs_, gate );
  }
  names_.erase( g.name );
  g.removed = true;
}

void Netlist::fix_key_input( std::size_t index, bool value )
{
  const auto id = key_inputs_.at( index );
  key_inputs_.erase( key_inputs_.begin() + static_cast<std::ptrdiff_t>( index ) );
  gates_[id].type = value ? GateType::Const1 : GateType::Const0;
}

Netlist Netlist::compacted() const
{
  std::vector<GateId> remap( gates_.size(), no_gate );
  Netlist out;
  GateId next = 0;
  for ( GateId id = 0; id < gates_.size(); ++id )
  {
    if ( !gates_[id].removed )
    {
      remap[id] = next++;
    }
  }
  out.gates_.reserve( next );
  for ( GateId id = 0; id < gates_.size(); ++id )
  {
    const auto& g = gates_[id];
    if ( g.removed )
    {
      continue;
    }
    Gate ng{ g.name, g.type, {}, {}, false };
    ng.fanin.reserve( g.fanin.size() );
    for ( auto f : g.fanin )
    {
      ng.fanin.push_back( remap[f] );
    }
    ng.fanout.reserve( g.fanout.size() );
    for ( auto f : g.fanout )
    {
      ng.fanout.push_back( remap[f] );
    }
    out.names_.emplace( g.name, remap[id] );
    out.gates_.push_back( std::move( ng ) );
  }
  auto map_list = [&]( const std::vector<GateId>& src ) {
    std::vector<GateId> dst;
    dst.reserve( src.size() );
    for ( auto s : src )
    {
      dst.push_back( remap[s] );
    }
    return dst;
  };
  out.primary_inputs_ = map_list( primary_inputs_ );
  out.key_inputs_ = map_list( key_inputs_ );
  out.primary_outputs_ = map_list( primary_outputs_ );
  out.flipflops_ = map_list( flipflops_ );
  out.output_refs_.assign( out.gates_.size(), 0 );
  for ( auto o : out.primary_outputs_ )
  {
    ++out.output_refs_[o];
  }
  out.name_counter_ = name_counter_;
  return out;
}

std::size_t Netlist::gate_count() const
{
  return static_cast<std::size_t>( std::count_if( gates_.begin(), gates_.end(), []( const Gate& g ) {
    return !g.removed && !is_source( g.type );
  } ) );
}

std::optional<GateId> Netlist::find( std::string_view name ) const
{
  if ( auto it = names_.find( std::string( name ) ); it != names_.end() )
  {
    return it->second;
  }
  return std::nullopt;
}

std::string Netlist::unique_name( std::string_view prefix )
{
  while ( true )
  {
    auto candidate = std::string( prefix ) + std::to_string( name_counter_++ );
    if ( !names_.count( candidate ) )
    {
      return candidate;
    }
  }
}

std::vector<GateId> Netlist::consumers( GateId id ) const
{
  auto c = gates_[id].fanout;
  std::sort( c.begin(), c.end() );
  c.erase( std::unique( c.begin(), c.end() ), c.end() );
  return c;
}

std::optional<std::vector<GateId>> Netlist::try_topological_order() const
{
  std::vector<std::uint32_t> pending( gates_.size(), 0 );
  std::vector<GateId> order;
  order.reserve( gates_.size() );
  std::deque<GateId> ready;
  std::size_t live = 0;
  for ( GateId id = 0; id < gates_.size(); ++id )
  {
    const auto& g = gates_[id];
    if ( g.removed )
    {
      continue;
    }
    ++live;
    if ( g.type != GateType::Dff )
    {
      for ( auto f : g.fanin )
      {
        if ( f < gates_.size() && !gates_[f].removed )
        {
          ++pending[id];
        }
      }
    }
    if ( pending[id] == 0 )
    {
      ready.push_back( id );
    }
  }
  while ( !ready.empty() )
  {
    const auto id = ready.front();
    ready.pop_front();
    order.push_back( id );
    for ( auto c : gates_[id].fanout )
    {
      if ( c >= gates_.size() || gates_[c].removed || gates_[c].type == GateType::Dff )
      {
        continue;
      }
      if ( --pending[c] == 0 )
      {
        ready.push_back( c );
      }
    }
  }
  if ( order.size() != live )
  {
    return std::nullopt;
  }
  return order;
}

std::vector<GateId> Netlist::topological_order() const
{
  auto order = try_topological_order();
  if ( !order )
  {
    throw Error( "cycle", "netlist contains a combinational cycle" );
  }
  return std::move( *order );
}

std::vector<Violation> validate( const Netlist& netlist )
{
  std::vector<Violation> out;
  const auto n = static_cast<GateId>( netlist.slot_count() );
  auto report = [&]( GateId id, std::string rule, std::string message ) {
    out.push_back( Violation{ id, std::move( rule ), std::move( message ) } );
  };

  bool structurally_sound = true;
  for ( GateId id = 0; id < n; ++id )
  {
    const auto& g = netlist.gate( id );
    if ( g.removed )
    {
      continue;
    }
    for ( auto f : g.fanin )
    {
      if ( !netlist.alive( f ) )
      {
        report( id, "dangling fanin", "gate '" + g.name + "' references a missing fanin" );
        structurally_sound = false;
        continue;
      }
      const auto& fo = netlist.gate( f ).fanout;
      if ( std::count( g.fanin.begin(), g.fanin.end(), f ) != std::count( fo.begin(), fo.end(), id ) )
      {
        report( id, "fanout mismatch", "fanin/fanout lists of '" + g.name + "' and '" + netlist.gate( f ).name + "' disagree" );
      }
    }
    for ( auto c : g.fanout )
    {
      if ( !netlist.alive( c ) )
      {
        report( id, "dangling fanout", "gate '" + g.name + "' lists a missing consumer" );
        structurally_sound = false;
      }
      else if ( std::find( netlist.gate( c ).fanin.begin(), netlist.gate( c ).fanin.end(), id ) == netlist.gate( c ).fanin.end() )
      {
        report( id, "fanout mismatch", "gate '" + g.name + "' lists consumer '" + netlist.gate( c ).name + "' that does not read it" );
      }
    }
    const auto arity = g.fanin.size();
    switch ( g.type )
    {
    case GateType::Input:
    case GateType::KeyInput:
    case GateType::Const0:
    case GateType::Const1:
      if ( arity != 0 )
      {
        report( id, "arity", "source '" + g.name + "' must not have fanins" );
      }
      break;
    case GateType::Not:
    case GateType::Buf:
    case GateType::Dff:
      if ( arity != 1 )
      {
        report( id, "arity", std::string( to_string( g.type ) ) + " '" + g.name + "' must have exactly one fanin" );
      }
      break;
    case GateType::Output:
      report( id, "marker", "OUTPUT is not a gate type" );
      break;
    default:
      if ( arity < 2 )
      {
        report( id, "arity", std::string( to_string( g.type ) ) + " '" + g.name + "' needs at least two fanins" );
      }
      break;
    }
  }

  auto check_list = [&]( const std::vector<GateId>& list, GateType type, const char* what ) {
    for ( auto id : list )
    {
      if ( !netlist.alive( id ) )
      {
        report( id, "dangling reference", std::string( what ) + " list references a missing gate" );
      }
      else if ( netlist.gate( id ).type != type )
      {
        report( id, "marker", std::string( what ) + " '" + netlist.gate( id ).name + "' has the wrong type" );
      }
    }
  };
  check_list( netlist.primary_inputs(), GateType::Input, "primary input" );
  check_list( netlist.key_inputs(), GateType::KeyInput, "key input" );
  check_list( netlist.flipflops(), GateType::Dff, "flip-flop" );
  for ( auto o : netlist.primary_outputs() )
  {
    if ( !netlist.alive( o ) )
    {
      report( o, "dangling reference", "primary output references a missing gate" );
    }
  }
  for ( GateId id = 0; id < n; ++id )
  {
    const auto& g = netlist.gate( id );
    if ( g.removed )
    {
      continue;
    }
    auto listed = [&]( const std::vector<GateId>& l ) { return std::find( l.begin(), l.end(), id ) != l.end(); };
    if ( g.type == GateType::Input && !listed( netlist.primary_inputs() ) )
    {
      report( id, "marker", "input '" + g.name + "' is not in the primary input list" );
    }
    if ( g.type == GateType::KeyInput && !listed( netlist.key_inputs() ) )
    {
      report( id, "marker", "key input '" + g.name + "' is not in the key input list" );
    }
  }

  if ( structurally_sound && !netlist.try_topological_order() )
  {
    // name one gate on the cycle: any gate left with pending fanins after peeling
    std::vector<std::uint32_t> pending( n, 0 );
    std::deque<GateId> ready;
    for ( GateId id = 0; id < n; ++id )
    {
      const auto& g = netlist.gate( id );
      if ( g.removed )
      {
        continue;
      }
      if ( g.type != GateType::Dff )
      {
        pending[id] = static_cast<std::uint32_t>( g.fanin.size() );
      }
      if ( pending[id] == 0 )
      {
        ready.push_back( id );
      }
    }
    while ( !ready.empty() )
    {
      auto id = ready.front();
      ready.pop_front();
      for ( auto c : netlist.gate( id ).fanout )
      {
        if ( netlist.gate( c ).type != GateType::Dff && --pending[c] == 0 )
        {
          ready.push_back( c );
        }
      }
    }
    for ( GateId id = 0; id < n; ++id )
    {
      if ( !netlist.gate( id ).removed && pending[id] > 0 )
      {
        report( id, "cycle", "gate '" + netlist.gate( id ).name + "' lies on a combinational cycle" );
        break;
      }
    }
  }
  return out;
}

bool is_generic( const Netlist& netlist )
{
  for ( GateId id = 0; id < netlist.slot_count(); ++id )
  {
    const auto& g = netlist.gate( id );
    if ( g.removed )
    {
      continue;
    }
    if ( is_unary( g.type ) && g.fanin.size() != 1 )
    {
      return false;
    }
    if ( is_logic( g.type ) && g.fanin.size() > 2 )
    {
      return false;
    }
  }
  return true;
}

std::vector<bool> observable_gates( const Netlist& netlist )
{
  std::vector<bool> seen( netlist.slot_count(), false );
  std::vector<GateId> stack;
  auto mark = [&]( GateId id ) {
    if ( !seen[id] )
    {
      seen[id] = true;
      stack.push_back( id );
    }
  };
  for ( auto o : netlist.primary_outputs() )
  {
    mark( o );
  }
  for ( auto ff : netlist.flipflops() )
  {
    mark( ff );
  }
  while ( !stack.empty() )
  {
    auto id = stack.back();
    stack.pop_back();
    for ( auto f : netlist.gate( id ).fanin )
    {
      mark( f );
    }
  }
  return seen;
}

std::vector<bool> key_only_gates( const Netlist& netlist )
{
  std::vector<bool> key_only( netlist.slot_count(), false );
  for ( auto id : netlist.topological_order() )
  {
    const auto& g = netlist.gate( id );
    if ( g.type == GateType::KeyInput )
    {
      key_only[id] = true;
    }
    else if ( is_logic( g.type ) && !g.fanin.empty() )
    {
      key_only[id] = std::all_of( g.fanin.begin(), g.fanin.end(), [&]( GateId f ) { return key_only[f]; } );
    }
  }
  return key_only;
}

} // namespace lockml
