#include "lockml/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>

namespace lockml
{

namespace
{

std::size_t depth_of( Direction d, const ExtractionParams& p )
{
  return d == Direction::backward ? p.backward_depth : p.forward_depth;
}

std::size_t width_of( Direction d, const ExtractionParams& p )
{
  return d == Direction::backward ? p.fan_in : p.fan_out;
}

/* Breadth-first walk over the padded, unrolled window. `visit(parent_slot, child_value)`
 * receives every emitted slot in emission order; children of empty slots are empty. */
template<typename Node, typename Neighbours, typename Emit>
void walk( Node root, Node empty, Direction direction, const ExtractionParams& params, Neighbours&& neighbours,
           Emit&& emit )
{
  const auto depth = depth_of( direction, params );
  const auto width = width_of( direction, params );
  struct Entry
  {
    Node node;
    std::size_t level;
  };
  std::deque<Entry> queue{ { root, 0 } };
  std::size_t budget = params.depth_mode == DepthMode::nodes ? std::max<std::size_t>( depth, 2 ) - 1 : 0;
  while ( !queue.empty() )
  {
    const auto [node, level] = queue.front();
    queue.pop_front();
    if ( params.depth_mode == DepthMode::levels && level >= depth )
    {
      break;
    }
    auto next = neighbours( node, width );
    next.resize( width, empty );
    for ( const auto& child : next )
    {
      emit( node, child );
      queue.push_back( { child, level + 1 } );
    }
    if ( params.depth_mode == DepthMode::nodes && --budget == 0 )
    {
      break;
    }
  }
}

} // namespace

void ExtractionParams::check() const
{
  if ( backward_depth < 1 || forward_depth < 1 || fan_in < 2 || fan_out < 1 || vector_length < 1 )
  {
    throw Error( "config-schema", "extraction parameters require D_b, D_f >= 1, F_in >= 2, F_out >= 1, L_vec >= 1" );
  }
}

std::uint8_t encode_gate( GateType type )
{
  switch ( type )
  {
  case GateType::Not:
    return 1;
  case GateType::And:
    return 2;
  case GateType::Nand:
    return 3;
  case GateType::Or:
    return 4;
  case GateType::Xor:
    return 5;
  case GateType::Nor:
    return 6;
  case GateType::Xnor:
    return 7;
  case GateType::Buf:
    return 8;
  case GateType::Dff:
    return 9;
  default:
    return 0;
  }
}

std::size_t section_length( Direction direction, const ExtractionParams& params )
{
  const auto depth = depth_of( direction, params );
  const auto width = width_of( direction, params );
  if ( params.depth_mode == DepthMode::nodes )
  {
    return ( std::max<std::size_t>( depth, 2 ) - 1 ) * width;
  }
  std::size_t total = 0;
  std::size_t level = 1;
  for ( std::size_t l = 1; l <= depth; ++l )
  {
    level *= width;
    total += level;
  }
  return total;
}

std::vector<std::uint8_t> bfs_extract( const Netlist& netlist, Direction direction, GateId root,
                                       const ExtractionParams& params )
{
  params.check();
  if ( !netlist.alive( root ) )
  {
    throw Error( "extraction", "extraction root does not exist" );
  }
  std::vector<std::uint8_t> out;
  out.reserve( section_length( direction, params ) );
  auto neighbours = [&]( GateId g, std::size_t width ) {
    std::vector<GateId> next;
    if ( g == no_gate )
    {
      return next;
    }
    if ( direction == Direction::backward )
    {
      next = netlist.gate( g ).fanin;
    }
    else
    {
      next = netlist.consumers( g );
    }
    if ( next.size() > width )
    {
      next.resize( width );
    }
    return next;
  };
  walk( root, no_gate, direction, params, neighbours, [&]( GateId, GateId child ) {
    out.push_back( child == no_gate ? 0 : encode_gate( netlist.gate( child ).type ) );
  } );
  if ( direction == Direction::backward )
  {
    std::reverse( out.begin(), out.end() );
  }
  return out;
}

std::pair<GateId, GateId> locate_key_gate( const Netlist& netlist, std::size_t index )
{
  const auto key = netlist.key_inputs().at( index );
  const auto& name = netlist.gate( key ).name;
  const auto key_only = key_only_gates( netlist );
  auto cur = key;
  while ( true )
  {
    const auto users = netlist.consumers( cur );
    if ( users.size() != 1 || netlist.gate( cur ).fanout.size() != 1 || netlist.is_output( cur ) )
    {
      throw Error( "extraction", "key input '" + name + "' must feed exactly one gate (feeds " +
                                     std::to_string( users.size() ) + ")" );
    }
    cur = users[0];
    if ( !key_only[cur] )
    {
      break;
    }
  }
  const auto& kg = netlist.gate( cur );
  if ( ( kg.type != GateType::Xor && kg.type != GateType::Xnor ) || kg.fanin.size() != 2 ||
       key_only[kg.fanin[0]] == key_only[kg.fanin[1]] )
  {
    throw Error( "extraction", "key input '" + name + "' does not drive an XOR/XNOR key gate" );
  }
  const auto data = key_only[kg.fanin[0]] ? kg.fanin[1] : kg.fanin[0];
  return { cur, data };
}

LocalityVector extract_locality( const Netlist& netlist, std::size_t key_index, const ExtractionParams& params,
                                 std::optional<bool> label )
{
  const auto [kg, data] = locate_key_gate( netlist, key_index );
  LocalityVector v;
  v.key_index = key_index;
  v.raw = bfs_extract( netlist, Direction::backward, data, params );
  v.center = v.raw.size();
  v.raw.push_back( encode_gate( netlist.gate( kg ).type ) );
  const auto forward = bfs_extract( netlist, Direction::forward, kg, params );
  v.raw.insert( v.raw.end(), forward.begin(), forward.end() );
  v.formatted = format_vector( v.raw, params.vector_length, params.overflow );
  if ( label )
  {
    v.label = *label ? 1 : 0;
  }
  return v;
}

std::vector<LocalityVector> lve( const Netlist& netlist, const ExtractionParams& params, const std::optional<Key>& key )
{
  const auto k = netlist.key_inputs().size();
  if ( k == 0 )
  {
    throw Error( "extraction", "netlist has no key inputs" );
  }
  if ( key && key->size() != k )
  {
    throw Error( "length-mismatch", "key length does not match the number of key inputs" );
  }
  std::vector<LocalityVector> out;
  out.reserve( k );
  for ( std::size_t i = 0; i < k; ++i )
  {
    out.push_back( extract_locality( netlist, i, params, key ? std::optional<bool>( ( *key )[i] ) : std::nullopt ) );
  }
  return out;
}

std::vector<std::uint8_t> fit_length( std::span<const std::uint8_t> raw, std::size_t length, OverflowPolicy overflow )
{
  std::vector<std::uint8_t> out( raw.begin(), raw.end() );
  if ( out.size() > length )
  {
    auto end = out.size();
    while ( end > length && out[end - 1] == 0 )
    {
      --end;
    }
    if ( end > length && overflow == OverflowPolicy::error )
    {
      throw Error( "incompressible-overflow", "locality of length " + std::to_string( raw.size() ) +
                                                  " cannot be trimmed to " + std::to_string( length ) +
                                                  " by removing trailing empty entries" );
    }
    out.resize( length );
  }
  out.resize( length, 0 );
  return out;
}

std::vector<float> format_vector( std::span<const std::uint8_t> raw, std::size_t length, OverflowPolicy overflow )
{
  const auto codes = fit_length( raw, length, overflow );
  std::vector<float> out( codes.size() );
  std::transform( codes.begin(), codes.end(), out.begin(), []( std::uint8_t c ) { return static_cast<float>( c ) / 9.0f; } );
  return out;
}

WindowNode reconstruct_window( std::span<const std::uint8_t> section, Direction direction,
                               const ExtractionParams& params )
{
  if ( section.size() != section_length( direction, params ) )
  {
    throw Error( "extraction", "section length does not match the extraction parameters" );
  }
  std::vector<std::uint8_t> emitted( section.begin(), section.end() );
  if ( direction == Direction::backward )
  {
    std::reverse( emitted.begin(), emitted.end() );
  }

  // flat tree: index 0 is the root; replay the walk over slot indices
  struct Flat
  {
    std::uint8_t code;
    std::vector<std::size_t> children;
  };
  std::vector<Flat> flat{ { 0, {} } };
  std::size_t cursor = 0;
  struct Entry
  {
    std::size_t node;
    std::size_t level;
  };
  const auto depth = depth_of( direction, params );
  const auto width = width_of( direction, params );
  std::deque<Entry> queue{ { 0, 0 } };
  std::size_t budget = params.depth_mode == DepthMode::nodes ? std::max<std::size_t>( depth, 2 ) - 1 : 0;
  while ( !queue.empty() )
  {
    const auto [node, level] = queue.front();
    queue.pop_front();
    if ( params.depth_mode == DepthMode::levels && level >= depth )
    {
      break;
    }
    for ( std::size_t j = 0; j < width; ++j )
    {
      flat.push_back( { emitted[cursor++], {} } );
      flat[node].children.push_back( flat.size() - 1 );
      queue.push_back( { flat.size() - 1, level + 1 } );
    }
    if ( params.depth_mode == DepthMode::nodes && --budget == 0 )
    {
      break;
    }
  }

  auto build = [&]( auto&& self, std::size_t i ) -> WindowNode {
    WindowNode n{ flat[i].code, {} };
    for ( auto c : flat[i].children )
    {
      n.children.push_back( self( self, c ) );
    }
    return n;
  };
  return build( build, 0 );
}

std::map<int, GrayImage> export_image( std::span<const LocalityVector> vectors, bool group_by_label )
{
  if ( vectors.empty() )
  {
    throw Error( "empty-input", "no locality vectors to export" );
  }
  const auto height = vectors.front().formatted.size();
  std::map<int, std::vector<const LocalityVector*>> groups;
  for ( const auto& v : vectors )
  {
    if ( v.formatted.size() != height )
    {
      throw Error( "length-mismatch", "all locality vectors must be formatted to the same length" );
    }
    const int key = group_by_label ? ( v.label ? static_cast<int>( *v.label ) : -1 ) : -1;
    groups[key].push_back( &v );
  }
  std::map<int, GrayImage> images;
  for ( const auto& [label, members] : groups )
  {
    GrayImage img{ members.size(), height, std::vector<std::uint8_t>( members.size() * height ) };
    for ( std::size_t col = 0; col < members.size(); ++col )
    {
      for ( std::size_t row = 0; row < height; ++row )
      {
        const auto value = std::clamp( members[col]->formatted[row], 0.0f, 1.0f );
        img.pixels[row * img.width + col] = static_cast<std::uint8_t>( std::lround( value * 255.0f ) );
      }
    }
    images.emplace( label, std::move( img ) );
  }
  return images;
}

void write_pgm( const GrayImage& image, const std::filesystem::path& path )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out )
  {
    throw Error( "io", "cannot write '" + path.string() + "'" );
  }
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write( reinterpret_cast<const char*>( image.pixels.data() ), static_cast<std::streamsize>( image.pixels.size() ) );
}

GrayImage read_pgm( const std::filesystem::path& path )
{
  std::ifstream in( path, std::ios::binary );
  std::string magic;
  GrayImage img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if ( !in || magic != "P5" || maxval != 255 )
  {
    throw Error( "format", "'" + path.string() + "' is not an 8-bit binary PGM" );
  }
  in.get();
  img.pixels.resize( img.width * img.height );
  in.read( reinterpret_cast<char*>( img.pixels.data() ), static_cast<std::streamsize>( img.pixels.size() ) );
  if ( !in )
  {
    throw Error( "format", "truncated PGM '" + path.string() + "'" );
  }
  return img;
}

} // namespace lockml
