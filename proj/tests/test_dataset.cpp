#include "lockml/dataset.hpp"
#include "lockml/generate.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace lockml;

namespace
{

Netlist small_circuit( std::uint64_t seed, std::size_t gates = 120 )
{
  RandomCircuitParams p;
  p.inputs = 12;
  p.gates = gates;
  p.outputs = 6;
  return random_circuit( p, seed );
}

std::string slurp( const std::filesystem::path& p )
{
  std::ifstream in( p );
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch( const std::string& name )
{
  auto dir = std::filesystem::temp_directory_path() / ( "lockml_dataset_" + name );
  std::filesystem::remove_all( dir );
  return dir;
}

/* Key inputs whose key gate also carries one of the first `original` key inputs. */
std::set<std::size_t> shared_keys( const Netlist& n, std::size_t original )
{
  std::vector<bool> key_only( n.slot_count(), false );
  for ( bool changed = true; changed; )
  {
    changed = false;
    for ( GateId g = 0; g < n.slot_count(); ++g )
    {
      if ( !n.alive( g ) || key_only[g] )
      {
        continue;
      }
      const auto& gate = n.gate( g );
      const bool k = gate.type == GateType::KeyInput ||
                     ( is_logic( gate.type ) && !gate.fanin.empty() &&
                       std::all_of( gate.fanin.begin(), gate.fanin.end(), [&]( GateId f ) { return key_only[f]; } ) );
      if ( k )
      {
        key_only[g] = true;
        changed = true;
      }
    }
  }
  auto head_of = [&]( GateId k ) {
    auto g = k;
    while ( key_only[g] )
    {
      g = n.consumers( g ).at( 0 );
    }
    return g;
  };
  std::map<GateId, std::set<std::size_t>> keys_at;
  for ( std::size_t i = 0; i < n.key_inputs().size(); ++i )
  {
    keys_at[head_of( n.key_inputs()[i] )].insert( i );
  }
  std::set<std::size_t> out;
  for ( const auto& [head, keys] : keys_at )
  {
    if ( *keys.begin() < original )
    {
      for ( auto k : keys )
      {
        if ( k >= original )
        {
          out.insert( k );
        }
      }
    }
  }
  return out;
}

LabeledDataset toy( std::size_t n, std::size_t ones )
{
  LabeledDataset d;
  d.vector_length = 4;
  for ( std::size_t i = 0; i < n; ++i )
  {
    d.codes.push_back( { static_cast<std::uint8_t>( i % 10 ), 0, 1, 2 } );
    d.labels.push_back( i < ones ? 1 : 0 );
    d.provenance.push_back( { "toy", Scheme::epic, i, i } );
  }
  return d;
}

} // namespace

TEST( Gss, CountsAndProvenance )
{
  const std::vector<NamedNetlist> train{ { "a", small_circuit( 1 ) }, { "b", small_circuit( 2 ) } };
  const auto one = gen_gss( { train[0] }, "t", 1, 4, 3, {} );
  EXPECT_EQ( one.size(), 4u );
  const auto d = gen_gss( train, "t", 3, 5, 3, {} );
  ASSERT_EQ( d.size(), 2u * 3 * 5 );
  EXPECT_EQ( d.scenario, Scenario::gss );
  std::map<std::string, std::size_t> per_netlist;
  for ( std::size_t i = 0; i < d.size(); ++i )
  {
    const auto& p = d.provenance[i];
    ++per_netlist[p.netlist];
    // the label is the key bit the copy was locked with
    EXPECT_EQ( d.labels[i], keygen( 5, p.seed )[p.key_index] ? 1 : 0 );
    EXPECT_LT( p.key_index, 5u );
    EXPECT_EQ( d.codes[i].size(), 400u );
  }
  EXPECT_EQ( per_netlist["a"], 15u );
  EXPECT_EQ( per_netlist["b"], 15u );
}

TEST( Gss, TargetLeakageIsRejected )
{
  const std::vector<NamedNetlist> train{ { "a", small_circuit( 1 ) }, { "t", small_circuit( 2 ) } };
  try
  {
    gen_gss( train, "t", 1, 2, 0, {} );
    FAIL();
  }
  catch ( const Error& e )
  {
    EXPECT_EQ( e.kind(), "target-leakage" );
  }
}

TEST( Gss, SeededRunsAreByteIdentical )
{
  const std::vector<NamedNetlist> train{ { "a", small_circuit( 5 ) }, { "b", small_circuit( 6 ) } };
  PipelineOptions o;
  o.jobs = 3;
  const auto x = gen_gss( train, "t", 4, 6, 11, o );
  o.jobs = 1;
  const auto y = gen_gss( train, "t", 4, 6, 11, o );
  const auto dx = scratch( "x" ), dy = scratch( "y" );
  save_dataset( x, dx );
  save_dataset( y, dy );
  for ( const char* f : { "manifest.json", "data.csv", "provenance.csv" } )
  {
    EXPECT_EQ( slurp( dx / f ), slurp( dy / f ) ) << f;
  }
  EXPECT_NE( gen_gss( train, "t", 4, 6, 12, o ).codes, x.codes );
}

TEST( Srs, TrainingVectorsComeFromAdditionalKeysOnly )
{
  const auto target = to_generic( small_circuit( 7, 200 ) );
  const auto [locked, record] = lock( target, keygen( 8, 1 ), 1, Scheme::epic );
  PipelineOptions o;
  o.skip_shared_key_gates = false;
  const auto data = gen_srs( locked, record, 3, 4, 2, o );
  EXPECT_EQ( data.train.size(), 12u );
  EXPECT_EQ( data.test.size(), 8u );
  EXPECT_FALSE( data.test.labeled );
  for ( const auto& p : data.train.provenance )
  {
    EXPECT_GE( p.key_index, 8u );
    EXPECT_LT( p.key_index, 12u );
  }
  for ( std::size_t i = 0; i < data.test.size(); ++i )
  {
    EXPECT_EQ( data.test.provenance[i].key_index, i );
  }
  const auto unit = gen_srs( locked, record, 1, 1, 2, o );
  EXPECT_EQ( unit.train.size(), 1u );
  EXPECT_EQ( unit.test.size(), 8u );
}

TEST( Srs, SharedKeyGatesAreSkipped )
{
  const auto target = to_generic( small_circuit( 8, 60 ) );
  const auto [locked, record] = lock( target, keygen( 12, 1 ), 1, Scheme::epic );
  PipelineOptions keep;
  keep.skip_shared_key_gates = false;
  const PipelineOptions skip;
  const std::size_t copies = 30, bits = 12;
  const auto all = gen_srs( locked, record, copies, bits, 4, keep );
  const auto filtered = gen_srs( locked, record, copies, bits, 4, skip );

  // recount the shared key gates independently, copy by copy
  std::size_t shared = 0;
  for ( std::size_t copy = 0; copy < copies; ++copy )
  {
    std::uint64_t s = 0;
    for ( std::size_t i = 0; i < all.train.size(); ++i )
    {
      if ( all.train.provenance[i].netlist == "target/relock" + std::to_string( copy ) )
      {
        s = all.train.provenance[i].seed;
        break;
      }
    }
    const auto relocked = prepare_locked( relock( locked, record, keygen( bits, s ), s ).first, keep );
    shared += shared_keys( relocked, 12 ).size();
  }
  EXPECT_EQ( all.train.size(), copies * bits );
  EXPECT_GT( shared, 0u );
  EXPECT_EQ( filtered.train.size(), all.train.size() - shared );
}

TEST( Split, StratifiedDisjointReproducible )
{
  const auto d = toy( 100, 37 );
  const auto [a, b] = split( d, 0.9, 5 );
  EXPECT_EQ( a.size(), 90u );
  EXPECT_EQ( b.size(), 10u );
  const auto ones = []( const LabeledDataset& x ) { return std::count( x.labels.begin(), x.labels.end(), 1 ); };
  EXPECT_NEAR( static_cast<double>( ones( a ) ), 0.9 * 37, 1.0 );
  EXPECT_NEAR( static_cast<double>( ones( b ) ), 0.1 * 37, 1.0 );
  std::set<std::uint64_t> seen;
  for ( const auto& p : a.provenance )
  {
    seen.insert( p.seed );
  }
  for ( const auto& p : b.provenance )
  {
    EXPECT_FALSE( seen.count( p.seed ) );
    seen.insert( p.seed );
  }
  EXPECT_EQ( seen.size(), 100u );
  const auto [a2, b2] = split( d, 0.9, 5 );
  EXPECT_EQ( a2.provenance, a.provenance );

  const auto [x, y] = split( toy( 2, 1 ), 0.5, 0 );
  EXPECT_EQ( x.size(), 1u );
  EXPECT_EQ( y.size(), 1u );
  EXPECT_NE( x.labels, y.labels );
  EXPECT_THROW( split( toy( 1, 1 ), 0.5, 0 ), Error );
  EXPECT_THROW( split( d, 1.0, 0 ), Error );
}

TEST( DatasetIo, RoundTripAndCsvValues )
{
  const std::vector<NamedNetlist> train{ { "a", small_circuit( 9 ) } };
  auto d = gen_gss( train, "t", 2, 3, 1, {} );
  const auto dir = scratch( "io" );
  save_dataset( d, dir );
  const auto back = load_dataset( dir );
  EXPECT_EQ( back.codes, d.codes );
  EXPECT_EQ( back.labels, d.labels );
  EXPECT_EQ( back.provenance, d.provenance );
  EXPECT_EQ( back.scenario, d.scenario );

  std::ifstream csv( dir / "data.csv" );
  std::string header, row;
  std::getline( csv, header );
  std::getline( csv, row );
  EXPECT_EQ( header.substr( 0, 12 ), "label,v0,v1," );
  std::istringstream cells( row );
  std::string cell;
  std::getline( cells, cell, ',' );
  EXPECT_EQ( std::stoi( cell ), d.labels[0] );
  for ( std::size_t j = 0; j < 400; ++j )
  {
    std::getline( cells, cell, ',' );
    char expected[16];
    std::snprintf( expected, sizeof expected, "%.6f", d.codes[0][j] / 9.0 );
    ASSERT_EQ( cell, expected ) << j;
  }

  LabeledDataset unlabeled;
  unlabeled.labeled = false;
  unlabeled.scenario = Scenario::srs;
  unlabeled.vector_length = 400;
  unlabeled.codes = { d.codes[0] };
  unlabeled.provenance = { d.provenance[0] };
  const auto udir = scratch( "unlabeled" );
  save_dataset( unlabeled, udir );
  const auto u = load_dataset( udir );
  EXPECT_FALSE( u.labeled );
  EXPECT_TRUE( u.labels.empty() );
  EXPECT_EQ( u.codes, unlabeled.codes );
}

TEST( DatasetIo, ExtractionParamsSchema )
{
  ExtractionParams p;
  p.depth_mode = DepthMode::nodes;
  p.fan_out = 4;
  const auto q = extraction_params_from_json( to_json( p ) );
  EXPECT_EQ( to_json( q ), to_json( p ) );
  EXPECT_THROW( extraction_params_from_json( { { "fanin", 2 } } ), Error );
  EXPECT_THROW( extraction_params_from_json( { { "fan_in", 1 } } ), Error );
}
