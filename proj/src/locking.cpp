#include "lockml/locking.hpp"

#include "lockml/bench.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace lockml
{

namespace
{

constexpr std::uint64_t location_stream = 0x6c6f63;
constexpr std::uint64_t type_stream = 0x747970;
constexpr std::uint64_t key_stream = 0x6b6579;

bool is_key_gate( const Netlist& n, GateId g, const std::vector<bool>& key_only )
{
  const auto& gate = n.gate( g );
  if ( ( gate.type != GateType::Xor && gate.type != GateType::Xnor ) || key_only[g] )
  {
    return false;
  }
  return std::any_of( gate.fanin.begin(), gate.fanin.end(), [&]( GateId f ) { return key_only[f]; } );
}

/* Inserts `type(key, wire)` and moves every reader of `wire` onto it. */
GateId insert_key_gate( Netlist& n, GateId wire, GateId key, GateType type )
{
  const auto kg = n.add_gate( n.unique_name( "lkg" ), type, { key, wire } );
  n.redirect( wire, kg );
  n.set_fanin( kg, 1, wire );
  return kg;
}

LockResult insert( const Netlist& netlist, const Key& key, std::uint64_t seed, Scheme scheme, bool allow_key_gates )
{
  if ( key.size() == 0 )
  {
    throw Error( "length-mismatch", "key must have at least one bit" );
  }
  const auto candidates = lock_candidates( netlist, allow_key_gates );
  if ( candidates.size() < key.size() )
  {
    throw Error( "not-enough-locations", "netlist offers " + std::to_string( candidates.size() ) +
                                             " lockable wires for a " + std::to_string( key.size() ) + "-bit key" );
  }

  // partial Fisher-Yates: the first key.size() entries are the chosen wires
  auto pool = candidates;
  Rng loc( derive_seed( seed, { location_stream } ) );
  for ( std::size_t i = 0; i < key.size(); ++i )
  {
    std::swap( pool[i], pool[i + loc.uniform_index( pool.size() - i )] );
  }
  Rng types( derive_seed( seed, { type_stream } ) );

  Netlist out = netlist;
  LockRecord record;
  record.key = key;
  record.scheme = scheme;
  record.seed = seed;
  record.key_offset = netlist.key_inputs().size();
  for ( std::size_t i = 0; i < key.size(); ++i )
  {
    const bool xnor = scheme == Scheme::epic ? key[i] : types.bit();
    const auto k = out.add_key_input( key_input_name( record.key_offset + i ) );
    const auto kg = insert_key_gate( out, pool[i], k, xnor ? GateType::Xnor : GateType::Xor );
    record.key_gate_ids.push_back( kg );
    record.key_gate_names.push_back( out.gate( kg ).name );
  }
  return { std::move( out ), std::move( record ) };
}

} // namespace

std::string_view to_string( Scheme scheme )
{
  return scheme == Scheme::epic ? "epic" : "unbiased";
}

Scheme scheme_from_string( std::string_view name )
{
  if ( name == "epic" )
  {
    return Scheme::epic;
  }
  if ( name == "unbiased" )
  {
    return Scheme::unbiased;
  }
  throw Error( "config-schema", "unknown locking scheme '" + std::string( name ) + "'" );
}

Key keygen( std::size_t length, std::uint64_t seed )
{
  if ( length == 0 )
  {
    throw Error( "length-mismatch", "key length must be at least 1" );
  }
  Rng rng( derive_seed( seed, { key_stream } ) );
  Key k;
  k.bits.reserve( length );
  for ( std::size_t i = 0; i < length; ++i )
  {
    k.bits.push_back( rng.bit() ? 1 : 0 );
  }
  return k;
}

std::vector<GateId> lock_candidates( const Netlist& netlist, bool allow_key_gate_outputs )
{
  const auto observable = observable_gates( netlist );
  const auto key_only = key_only_gates( netlist );
  std::vector<GateId> out;
  for ( GateId id = 0; id < netlist.slot_count(); ++id )
  {
    if ( !netlist.alive( id ) || !observable[id] || key_only[id] )
    {
      continue;
    }
    const auto& g = netlist.gate( id );
    if ( g.type != GateType::Input && !( is_logic( g.type ) && !g.fanin.empty() ) )
    {
      continue;
    }
    if ( g.fanout.empty() && !netlist.is_output( id ) )
    {
      continue;
    }
    if ( !allow_key_gate_outputs && is_key_gate( netlist, id, key_only ) )
    {
      continue;
    }
    out.push_back( id );
  }
  return out;
}

LockResult lock_epic( const Netlist& netlist, const Key& key, std::uint64_t seed )
{
  return insert( netlist, key, seed, Scheme::epic, false );
}

LockResult lock_unbiased( const Netlist& netlist, const Key& key, std::uint64_t seed )
{
  return insert( netlist, key, seed, Scheme::unbiased, false );
}

LockResult lock( const Netlist& netlist, const Key& key, std::uint64_t seed, Scheme scheme )
{
  return insert( netlist, key, seed, scheme, false );
}

LockResult relock( const Netlist& locked, const Key& key2, std::uint64_t seed, Scheme scheme )
{
  return insert( locked, key2, seed, scheme, true );
}

LockResult relock( const Netlist& locked, const LockRecord& prior, const Key& key2, std::uint64_t seed )
{
  if ( locked.key_inputs().size() < prior.key_offset + prior.key.size() )
  {
    throw Error( "length-mismatch", "lock record describes more key inputs than the netlist has" );
  }
  return relock( locked, key2, seed, prior.scheme );
}

std::string to_json( const LockRecord& record )
{
  nlohmann::json j;
  j["format"] = "lockml-lockrecord";
  j["version"] = 1;
  j["key"] = record.key.to_string();
  j["key_gate_ids"] = record.key_gate_ids;
  j["key_gate_names"] = record.key_gate_names;
  j["scheme"] = to_string( record.scheme );
  j["seed"] = record.seed;
  j["key_offset"] = record.key_offset;
  return j.dump( 2 );
}

LockRecord lock_record_from_json( const std::string& text )
{
  try
  {
    const auto j = nlohmann::json::parse( text );
    LockRecord r;
    r.key = Key::from_string( j.at( "key" ).get<std::string>() );
    r.key_gate_ids = j.at( "key_gate_ids" ).get<std::vector<GateId>>();
    r.key_gate_names = j.at( "key_gate_names" ).get<std::vector<std::string>>();
    r.scheme = scheme_from_string( j.at( "scheme" ).get<std::string>() );
    r.seed = j.at( "seed" ).get<std::uint64_t>();
    r.key_offset = j.value( "key_offset", std::size_t{ 0 } );
    return r;
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "format", std::string( "malformed lock record: " ) + e.what() );
  }
}

void write_lock_record( const LockRecord& record, const std::filesystem::path& path )
{
  std::ofstream out( path );
  if ( !out )
  {
    throw Error( "io", "cannot write '" + path.string() + "'" );
  }
  out << to_json( record ) << "\n";
}

LockRecord read_lock_record( const std::filesystem::path& path )
{
  std::ifstream in( path );
  if ( !in )
  {
    throw Error( "missing-input", "cannot open '" + path.string() + "'" );
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return lock_record_from_json( ss.str() );
}

} // namespace lockml
