#include "lockml/bench.hpp"
#include "lockml/extraction.hpp"
#include "lockml/generate.hpp"
#include "lockml/locking.hpp"
#include "lockml/transform.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

using namespace lockml;

namespace
{

ExtractionParams levels( std::size_t db, std::size_t df, std::size_t fin = 2, std::size_t fout = 3 )
{
  ExtractionParams p;
  p.backward_depth = db;
  p.forward_depth = df;
  p.fan_in = fin;
  p.fan_out = fout;
  return p;
}


Netlist locked_sample( std::uint64_t seed, std::size_t bits )
{
  const auto base = random_circuit(
      { .inputs = 8 + seed % 8, .gates = 60 + 7 * ( seed % 20 ), .outputs = 6, .max_fanin = 3, .unary_fraction = 0.2 },
      seed );
  return lock_epic( to_generic( base ), keygen( bits, seed ), seed ).first;
}

} // namespace

TEST( Encoding, TableCodes )
{
  EXPECT_EQ( encode_gate( GateType::Xor ), 5 );
  EXPECT_EQ( encode_gate( GateType::Dff ), 9 );
  EXPECT_EQ( encode_gate( GateType::Input ), 0 );
  EXPECT_EQ( encode_gate( GateType::KeyInput ), 0 );
  EXPECT_EQ( encode_gate( GateType::Const1 ), 0 );
  for ( auto t : { GateType::Not, GateType::And, GateType::Nand, GateType::Or, GateType::Xor, GateType::Nor,
                   GateType::Xnor, GateType::Buf, GateType::Dff } )
  {
    EXPECT_EQ( encode_gate( t ), oracle::table_code( t ) );
  }
}

TEST( Bfs, CanonicalSectionLengths )
{
  const ExtractionParams p;
  EXPECT_EQ( section_length( Direction::backward, p ), 62u );
  EXPECT_EQ( section_length( Direction::forward, p ), 363u );
  auto nodes = levels( 3, 3 );
  nodes.depth_mode = DepthMode::nodes;
  EXPECT_EQ( section_length( Direction::backward, nodes ), 4u );
}

TEST( Bfs, PrimaryInputFaninsAreEmpty )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = AND(a, b)\n" );
  EXPECT_EQ( bfs_extract( n, Direction::backward, *n.find( "z" ), levels( 1, 1 ) ),
             ( std::vector<std::uint8_t>{ 0, 0 } ) );
}

TEST( Bfs, SingleConsumerIsPadded )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nOUTPUT(z)\nx = OR(a, b)\nz = NAND(x, a)\n" );
  EXPECT_EQ( bfs_extract( n, Direction::forward, *n.find( "x" ), levels( 1, 1 ) ),
             ( std::vector<std::uint8_t>{ 3, 0, 0 } ) );
  // second level: the NAND has no consumers, empties expand to empties
  const auto two = bfs_extract( n, Direction::forward, *n.find( "x" ), levels( 1, 2 ) );
  ASSERT_EQ( two.size(), 12u );
  EXPECT_EQ( two[0], 3 );
  EXPECT_TRUE( std::all_of( two.begin() + 1, two.end(), []( auto c ) { return c == 0; } ) );
}

TEST( Bfs, NodesModeHandTrace )
{
  // g's fanins: a NAND (whose fanins are a NOT and an XOR) and a primary input
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(g)\n"
                              "inv = NOT(a)\nx = XOR(b, c)\nd = NAND(inv, x)\ng = AND(d, c)\n" );
  auto p = levels( 3, 3 );
  p.depth_mode = DepthMode::nodes;
  EXPECT_EQ( bfs_extract( n, Direction::backward, *n.find( "g" ), p ), ( std::vector<std::uint8_t>{ 5, 1, 0, 3 } ) );
  p.backward_depth = 1;
  EXPECT_EQ( bfs_extract( n, Direction::backward, *n.find( "g" ), p ), ( std::vector<std::uint8_t>{ 0, 3 } ) );
}

TEST( Bfs, LevelsModeBackwardIsReversedBreadthFirstOrder )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(g)\n"
                              "inv = NOT(a)\nx = XOR(b, c)\nd = NAND(inv, x)\ng = AND(d, c)\n" );
  // emission: [d, c] then [inv, x] [0, 0] ; reversed
  EXPECT_EQ( bfs_extract( n, Direction::backward, *n.find( "g" ), levels( 2, 1 ) ),
             ( std::vector<std::uint8_t>{ 0, 0, 5, 1, 0, 3 } ) );
}

TEST( Bfs, WideFaninIsTruncated )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nx = NOT(a)\ny = BUFF(b)\nw = NOT(c)\n"
                              "z = AND(x, y, w)\n" );
  EXPECT_EQ( bfs_extract( n, Direction::backward, *n.find( "z" ), levels( 1, 1 ) ),
             ( std::vector<std::uint8_t>{ 8, 1 } ) );
}

TEST( Lve, SingleXnorKeyGate )
{
  const auto n = parse_bench( "INPUT(a)\nINPUT(b)\nINPUT(keyinput0)\nOUTPUT(z)\np = NOT(a)\nq = OR(a, b)\n"
                              "x = AND(p, q)\nk = XNOR(keyinput0, x)\nz = NOT(k)\n" );
  const auto v = lve( n, {}, Key::from_string( "1" ) );
  ASSERT_EQ( v.size(), 1u );
  EXPECT_EQ( v[0].label, std::optional<std::uint8_t>( 1 ) );
  EXPECT_EQ( v[0].raw.size(), 426u );
  EXPECT_EQ( v[0].center, 62u );
  EXPECT_EQ( v[0].raw[62], 7 );
  // the data-side AND is the search root and is not emitted; its fanins are
  EXPECT_EQ( v[0].raw[61], 1 );
  EXPECT_EQ( v[0].raw[60], 4 );
  EXPECT_EQ( v[0].raw[63], 1 );  // the NOT consumer
  EXPECT_EQ( v[0].formatted.size(), 400u );
  const auto unlabeled = lve( n, {} );
  EXPECT_FALSE( unlabeled[0].label.has_value() );
  EXPECT_EQ( unlabeled[0].raw, v[0].raw );
}

TEST( Lve, DeterministicOverSixtyFourKeys )
{
  const auto n = to_generic( random_circuit( { .inputs = 20, .gates = 600 }, 3 ) );
  const auto [locked, rec] = lock_epic( n, keygen( 64, 3 ), 3 );
  const auto a = lve( locked, {}, rec.key );
  const auto b = lve( locked, {}, rec.key );
  ASSERT_EQ( a.size(), 64u );
  for ( std::size_t i = 0; i < 64; ++i )
  {
    EXPECT_EQ( a[i].raw, b[i].raw );
    EXPECT_EQ( a[i].label, std::optional<std::uint8_t>( rec.key.bits[i] ) );
    EXPECT_EQ( a[i].raw[a[i].center], rec.key[i] ? 7 : 5 );
  }
}

TEST( Lve, KeyInputWiringErrors )
{
  const auto twice = parse_bench( "INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\nOUTPUT(z)\ny = XOR(keyinput0, a)\n"
                                  "z = XOR(keyinput0, y)\n" );
  EXPECT_THROW( lve( twice, {} ), Error );
  const auto wrong_type = parse_bench( "INPUT(a)\nINPUT(keyinput0)\nOUTPUT(z)\nz = AND(keyinput0, a)\n" );
  EXPECT_THROW( lve( wrong_type, {} ), Error );
  const auto unused = parse_bench( "INPUT(a)\nINPUT(keyinput0)\nOUTPUT(z)\nz = NOT(a)\n" );
  EXPECT_THROW( lve( unused, {} ), Error );
  const auto none = parse_bench( "INPUT(a)\nOUTPUT(z)\nz = NOT(a)\n" );
  EXPECT_THROW( lve( none, {} ), Error );
}

TEST( Lve, FollowsCollapsedKeyCone )
{
  const auto n = parse_bench( "INPUT(s)\nINPUT(t)\nINPUT(keyinput0)\nINPUT(keyinput1)\nOUTPUT(z)\n"
                              "a = XOR(keyinput0, s)\nb = XOR(keyinput1, a)\nz = AND(b, t)\n" );
  const auto o = optimize( n, { Pass::run_collapse } );
  const auto v = lve( o, {} );
  ASSERT_EQ( v.size(), 2u );
  EXPECT_EQ( v[0].raw, v[1].raw );
}

TEST( Format, TrimsTrailingEmpties )
{
  std::vector<std::uint8_t> raw( 426, 0 );
  raw[0] = 9;
  raw[399] = 3;
  const auto f = format_vector( raw, 400 );
  ASSERT_EQ( f.size(), 400u );
  EXPECT_FLOAT_EQ( f[0], 1.0f );
  EXPECT_FLOAT_EQ( f[399], 3.0f / 9.0f );
}

TEST( Format, PadsShortVectors )
{
  const std::vector<std::uint8_t> raw{ 1, 2, 3, 4, 5, 6, 7, 8 };
  const auto f = format_vector( raw, 400 );
  ASSERT_EQ( f.size(), 400u );
  EXPECT_FLOAT_EQ( f[7], 8.0f / 9.0f );
  EXPECT_TRUE( std::all_of( f.begin() + 8, f.end(), []( float v ) { return v == 0.0f; } ) );
}

TEST( Format, IncompressibleOverflow )
{
  std::vector<std::uint8_t> raw( 426, 0 );
  raw[420] = 2;
  try
  {
    format_vector( raw, 400 );
    FAIL();
  }
  catch ( const Error& e )
  {
    EXPECT_EQ( e.kind(), "incompressible-overflow" );
  }
  const auto cut = format_vector( raw, 400, OverflowPolicy::truncate );
  EXPECT_EQ( cut.size(), 400u );
}

TEST( Window, ReconstructionMatchesDepthFirstOracle )
{
  for ( std::uint64_t seed = 0; seed < 30; ++seed )
  {
    const auto n = locked_sample( seed, 4 );
    for ( const auto& p : { ExtractionParams{}, levels( 3, 2, 3, 2 ), levels( 2, 4, 2, 1 ) } )
    {
      for ( std::size_t k = 0; k < 4; ++k )
      {
        const auto [kg, data] = locate_key_gate( n, k );
        const auto back = bfs_extract( n, Direction::backward, data, p );
        const auto fwd = bfs_extract( n, Direction::forward, kg, p );
        EXPECT_EQ( reconstruct_window( back, Direction::backward, p ),
                   oracle::window( n, data, Direction::backward, p.backward_depth, p.fan_in, 0 ) );
        EXPECT_EQ( reconstruct_window( fwd, Direction::forward, p ),
                   oracle::window( n, kg, Direction::forward, p.forward_depth, p.fan_out, 0 ) );
      }
    }
  }
}

TEST( Window, NodesModeShape )
{
  auto p = levels( 3, 4 );
  p.depth_mode = DepthMode::nodes;
  const std::vector<std::uint8_t> back{ 5, 1, 0, 3 };
  const auto w = reconstruct_window( back, Direction::backward, p );
  ASSERT_EQ( w.children.size(), 2u );
  EXPECT_EQ( w.children[0].code, 3 );
  EXPECT_EQ( w.children[1].code, 0 );
  ASSERT_EQ( w.children[0].children.size(), 2u );
  EXPECT_EQ( w.children[0].children[0].code, 1 );
  EXPECT_EQ( w.children[0].children[1].code, 5 );
  EXPECT_TRUE( w.children[1].children.empty() );
  EXPECT_THROW( reconstruct_window( std::vector<std::uint8_t>( 5 ), Direction::backward, p ), Error );
}

TEST( Params, Invariants )
{
  EXPECT_NO_THROW( ExtractionParams{}.check() );
  EXPECT_THROW( levels( 0, 1 ).check(), Error );
  EXPECT_THROW( levels( 1, 1, 1, 1 ).check(), Error );
  EXPECT_THROW( levels( 1, 1, 2, 0 ).check(), Error );
}

TEST( Image, DimensionsAndPixels )
{
  std::vector<LocalityVector> vs;
  for ( int i = 0; i < 400; ++i )
  {
    LocalityVector v;
    v.label = i % 2;
    v.formatted.assign( 400, 0.0f );
    v.formatted[i] = 1.0f;
    v.formatted[0] = 5.0f / 9.0f;
    vs.push_back( v );
  }
  const auto grouped = export_image( vs, true );
  ASSERT_EQ( grouped.size(), 2u );
  EXPECT_EQ( grouped.at( 0 ).width, 200u );
  EXPECT_EQ( grouped.at( 1 ).height, 400u );
  const auto all = export_image( vs, false );
  const auto& img = all.at( -1 );
  EXPECT_EQ( img.width, 400u );
  EXPECT_EQ( img.height, 400u );
  EXPECT_EQ( img.at( 0, 7 ), 142 );  // round(5/9 * 255)
  EXPECT_EQ( img.at( 7, 7 ), 255 );
  EXPECT_EQ( img.at( 8, 7 ), 0 );
}

TEST( Image, SingleEmptyVectorIsBlackColumn )
{
  LocalityVector v;
  v.formatted.assign( 400, 0.0f );
  const auto img = export_image( std::vector<LocalityVector>{ v }, false ).at( -1 );
  EXPECT_EQ( img.width, 1u );
  EXPECT_EQ( img.height, 400u );
  EXPECT_TRUE( std::all_of( img.pixels.begin(), img.pixels.end(), []( auto p ) { return p == 0; } ) );
  EXPECT_THROW( export_image( std::vector<LocalityVector>{}, false ), Error );
}

TEST( Image, PgmRoundTrip )
{
  GrayImage img{ 3, 2, { 0, 10, 20, 255, 128, 7 } };
  const auto path = std::filesystem::temp_directory_path() / "lockml_test.pgm";
  write_pgm( img, path );
  const auto back = read_pgm( path );
  EXPECT_EQ( back.width, 3u );
  EXPECT_EQ( back.height, 2u );
  EXPECT_EQ( back.pixels, img.pixels );
  std::filesystem::remove( path );
}

TEST( Unbiased, CenterCodeIndependentOfLabel )
{
  const auto n = to_generic( random_circuit( { .inputs = 20, .gates = 600 }, 5 ) );
  double table[2][2] = {};
  for ( std::uint64_t s = 0; s < 40; ++s )
  {
    const auto [locked, rec] = lock_unbiased( n, keygen( 64, s ), s );
    for ( const auto& v : lve( locked, {}, rec.key ) )
    {
      table[*v.label][v.raw[v.center] == 7] += 1;
    }
  }
  const double total = table[0][0] + table[0][1] + table[1][0] + table[1][1];
  ASSERT_GE( total, 2000 );
  double chi2 = 0;
  for ( int r = 0; r < 2; ++r )
  {
    for ( int c = 0; c < 2; ++c )
    {
      const double expected = ( table[r][0] + table[r][1] ) * ( table[0][c] + table[1][c] ) / total;
      chi2 += ( table[r][c] - expected ) * ( table[r][c] - expected ) / expected;
    }
  }
  EXPECT_LT( chi2, 6.635 );  // 1 dof, alpha 0.01
}
