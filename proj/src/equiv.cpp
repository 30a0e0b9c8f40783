#include "lockml/equiv.hpp"

#include "lockml/simulate.hpp"

#include <algorithm>
#include <bit>

namespace lockml
{

namespace
{

std::vector<std::string> input_names( const Netlist& n )
{
  std::vector<std::string> names;
  for ( auto id : n.primary_inputs() )
  {
    names.push_back( n.gate( id ).name );
  }
  for ( auto id : n.key_inputs() )
  {
    names.push_back( n.gate( id ).name );
  }
  for ( auto id : n.flipflops() )
  {
    names.push_back( n.gate( id ).name );
  }
  return names;
}

/* Maps the canonical input order onto one netlist's (pi, key, ff) word slots. */
struct Binding
{
  const Netlist& netlist;
  Simulator sim;
  std::vector<std::size_t> pi_slot, key_slot, ff_slot;

  Binding( const Netlist& n, const std::vector<std::string>& canonical ) : netlist( n ), sim( n )
  {
    auto slot_of = [&]( GateId id ) {
      auto it = std::lower_bound( canonical.begin(), canonical.end(), n.gate( id ).name );
      return static_cast<std::size_t>( it - canonical.begin() );
    };
    for ( auto id : n.primary_inputs() )
    {
      pi_slot.push_back( slot_of( id ) );
    }
    for ( auto id : n.key_inputs() )
    {
      key_slot.push_back( slot_of( id ) );
    }
    for ( auto id : n.flipflops() )
    {
      ff_slot.push_back( slot_of( id ) );
    }
  }

  /* Outputs followed by flip-flop next-state functions, the latter sorted by flip-flop name. */
  std::vector<std::uint64_t> points( const std::vector<std::uint64_t>& words ) const
  {
    std::vector<std::uint64_t> pi, key, ff;
    for ( auto s : pi_slot )
    {
      pi.push_back( words[s] );
    }
    for ( auto s : key_slot )
    {
      key.push_back( words[s] );
    }
    for ( auto s : ff_slot )
    {
      ff.push_back( words[s] );
    }
    const auto values = sim.run( pi, key, ff );
    auto out = sim.outputs( values );
    auto next = sim.next_state( values );
    std::vector<std::size_t> idx( next.size() );
    for ( std::size_t i = 0; i < idx.size(); ++i )
    {
      idx[i] = i;
    }
    std::sort( idx.begin(), idx.end(), [&]( auto x, auto y ) {
      return netlist.gate( netlist.flipflops()[x] ).name < netlist.gate( netlist.flipflops()[y] ).name;
    } );
    for ( auto i : idx )
    {
      out.push_back( next[i] );
    }
    return out;
  }
};

} // namespace

EquivResult equiv_check( const Netlist& a, const Netlist& b, const EquivOptions& options )
{
  auto names_a = input_names( a );
  auto names_b = input_names( b );
  std::sort( names_a.begin(), names_a.end() );
  std::sort( names_b.begin(), names_b.end() );
  if ( names_a != names_b || a.primary_outputs().size() != b.primary_outputs().size() ||
       a.primary_inputs().size() != b.primary_inputs().size() || a.key_inputs().size() != b.key_inputs().size() ||
       a.flipflops().size() != b.flipflops().size() )
  {
    throw Error( "interface-mismatch", "netlists do not share the same input/output interface" );
  }
  const auto& canonical = names_a;
  const auto n_inputs = canonical.size();

  const Binding ba( a, canonical );
  const Binding bb( b, canonical );

  EquivResult result;
  std::vector<std::uint64_t> words( n_inputs );

  auto compare = [&]( std::uint64_t valid_mask ) {
    const auto pa = ba.points( words );
    const auto pb = bb.points( words );
    std::uint64_t diff = 0;
    for ( std::size_t i = 0; i < pa.size(); ++i )
    {
      diff |= ( pa[i] ^ pb[i] ) & valid_mask;
    }
    if ( !diff )
    {
      return false;
    }
    // earliest distinguishing pattern, then the first point that differs there
    const auto bit = static_cast<unsigned>( std::countr_zero( diff ) );
    std::size_t first_point = 0;
    for ( std::size_t i = 0; i < pa.size(); ++i )
    {
      if ( ( ( pa[i] ^ pb[i] ) >> bit ) & 1u )
      {
        first_point = i;
        break;
      }
    }
    result.equivalent = false;
    result.differing_point = first_point;
    for ( std::size_t i = 0; i < n_inputs; ++i )
    {
      result.counterexample[canonical[i]] = ( ( words[i] >> bit ) & 1u ) != 0;
    }
    result.vectors_checked += bit + 1;
    return true;
  };

  if ( options.mode == EquivOptions::Mode::exhaustive )
  {
    if ( n_inputs > max_exhaustive_inputs )
    {
      throw Error( "exhaustive-too-large", "exhaustive check requested for " + std::to_string( n_inputs ) +
                                               " inputs (limit " + std::to_string( max_exhaustive_inputs ) + ")" );
    }
    const std::uint64_t total = std::uint64_t{ 1 } << n_inputs;
    constexpr std::uint64_t low_patterns[6] = { 0xaaaaaaaaaaaaaaaaull, 0xccccccccccccccccull, 0xf0f0f0f0f0f0f0f0ull,
                                                0xff00ff00ff00ff00ull, 0xffff0000ffff0000ull, 0xffffffff00000000ull };
    for ( std::uint64_t base = 0; base < total; base += 64 )
    {
      const auto count = std::min<std::uint64_t>( 64, total - base );
      const auto mask = count == 64 ? ~std::uint64_t{ 0 } : ( ( std::uint64_t{ 1 } << count ) - 1 );
      for ( std::size_t i = 0; i < n_inputs; ++i )
      {
        words[i] = i < 6 ? low_patterns[i] : ( ( ( base >> i ) & 1u ) ? ~std::uint64_t{ 0 } : 0 );
      }
      if ( compare( mask ) )
      {
        return result;
      }
      result.vectors_checked += count;
    }
    return result;
  }

  Rng rng( derive_seed( options.seed, { 0x65717569ull } ) );
  for ( std::uint64_t base = 0; base < options.vectors; base += 64 )
  {
    const auto count = std::min<std::uint64_t>( 64, options.vectors - base );
    const auto mask = count == 64 ? ~std::uint64_t{ 0 } : ( ( std::uint64_t{ 1 } << count ) - 1 );
    for ( auto& w : words )
    {
      w = rng.next();
    }
    if ( compare( mask ) )
    {
      return result;
    }
    result.vectors_checked += count;
  }
  return result;
}

} // namespace lockml
