#include "lockml/attack.hpp"
#include "lockml/bench.hpp"
#include "lockml/generate.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace lockml;

namespace
{

Netlist circuit( std::uint64_t seed, std::size_t gates = 150 )
{
  RandomCircuitParams p;
  p.inputs = 16;
  p.gates = gates;
  p.outputs = 8;
  return random_circuit( p, seed );
}

/* single dense layer whose output ignores the input */
Network<float> constant_model( int winner )
{
  ModelSpec spec{ { 1, 1, 400 }, { LayerSpec::dense( 2 ), LayerSpec::softmax() } };
  Network<float> net( spec, 0 );
  auto w = net.weights();
  w[0].setZero();
  w[1] << ( winner == 0 ? 5.0 : -5.0 ), ( winner == 0 ? -5.0 : 5.0 );
  net.set_weights( w );
  return net;
}

AttackConfig tiny_config( std::uint64_t seed )
{
  AttackConfig c;
  c.key_bits = 8;
  c.relocks = 12;
  c.locks = 6;
  c.epochs = 3;
  c.batch = 32;
  c.seed = seed;
  return c;
}

std::filesystem::path scratch( const std::string& name )
{
  auto dir = std::filesystem::temp_directory_path() / ( "lockml_attack_" + name );
  std::filesystem::remove_all( dir );
  return dir;
}

/* Removes key gate `index` (wire restored) and its key input. */
Netlist unlock_one( const Netlist& n, std::size_t index )
{
  auto copy = n;
  const auto [kg, data] = locate_key_gate( copy, index );
  copy.redirect( kg, data );
  copy.remove( kg );
  copy.fix_key_input( index, false );
  return copy.compacted();
}

} // namespace

TEST( Kpa, Arithmetic )
{
  const auto a = keygen( 64, 1 );
  EXPECT_DOUBLE_EQ( kpa( a, a ), 100.0 );
  Key complement = a;
  for ( auto& b : complement.bits )
  {
    b ^= 1u;
  }
  EXPECT_DOUBLE_EQ( kpa( complement, a ), 0.0 );
  Key partial = a;
  for ( std::size_t i = 0; i < 16; ++i )
  {
    partial.bits[i * 4] ^= 1u;
  }
  EXPECT_DOUBLE_EQ( kpa( partial, a ), 75.0 );
  try
  {
    kpa( keygen( 63, 1 ), a );
    FAIL();
  }
  catch ( const Error& e )
  {
    EXPECT_EQ( e.kind(), "length-mismatch" );
  }
}

TEST( Kpa, RandomGuessesConcentrateAtHalf )
{
  double sum = 0;
  for ( std::uint64_t t = 0; t < 10000; ++t )
  {
    sum += kpa( keygen( 64, 2 * t ), keygen( 64, 2 * t + 1 ) );
  }
  EXPECT_NEAR( sum / 10000, 50.0, 1.0 );
}

TEST( Deploy, ConstantModelsGiveConstantKeys )
{
  const auto [locked, record] = lock( to_generic( circuit( 1 ) ), keygen( 16, 3 ), 3, Scheme::epic );
  const auto zero = deploy( constant_model( 0 ), locked, {} );
  EXPECT_EQ( zero.key, Key( std::vector<std::uint8_t>( 16, 0 ) ) );
  const auto one = deploy( constant_model( 1 ), locked, {} );
  EXPECT_EQ( one.key, Key( std::vector<std::uint8_t>( 16, 1 ) ) );
}

TEST( Deploy, PredictionCountIsLinearInKeyLength )
{
  const auto base = to_generic( circuit( 2, 300 ) );
  const auto model = constant_model( 1 );
  for ( std::size_t k : { 4u, 8u, 16u, 32u } )
  {
    const auto small = lock( base, keygen( k, 1 ), 1, Scheme::epic ).first;
    const auto large = lock( base, keygen( 2 * k, 1 ), 1, Scheme::epic ).first;
    EXPECT_EQ( deploy( model, small, {} ).predictions.size(), k );
    EXPECT_EQ( deploy( model, large, {} ).predictions.size(), 2 * k );
  }
}

TEST( Deploy, BitsArePredictedIndependently )
{
  const auto [locked, record] = lock( to_generic( circuit( 4, 400 ) ), keygen( 12, 5 ), 5, Scheme::epic );
  Network<float> model( build_mlp( Scenario::srs ), 9 );
  const ExtractionParams params;
  const auto full = deploy( model, locked, params );
  std::size_t compared = 0;
  for ( std::size_t j = 0; j < 12; ++j )
  {
    const auto reduced = unlock_one( locked, j );
    const auto partial = deploy( model, reduced, params );
    ASSERT_EQ( partial.predictions.size(), 11u );
    for ( std::size_t i = 0; i < 12; ++i )
    {
      if ( i == j )
      {
        continue;
      }
      const auto r = i < j ? i : i - 1;
      if ( extract_locality( locked, i, params ).raw != extract_locality( reduced, r, params ).raw )
      {
        continue;
      }
      ++compared;
      EXPECT_EQ( partial.predictions[r].probabilities, full.predictions[i].probabilities );
    }
  }
  EXPECT_GT( compared, 60u );
}

TEST( Deploy, MemorisedLocalityReturnsItsLabel )
{
  const auto [locked, record] = lock( to_generic( circuit( 6 ) ), keygen( 1, 2 ), 2, Scheme::unbiased );
  const ExtractionParams params;
  const auto target = extract_locality( locked, 0, params );
  for ( std::uint8_t label : { 0, 1 } )
  {
    LabeledDataset d;
    auto v = target;
    v.label = label;
    d.append( v, {} );
    // a few distinct vectors with the opposite label
    const auto other = lock( to_generic( circuit( 7 ) ), keygen( 6, 1 ), 1, Scheme::epic ).first;
    for ( auto w : lve( other, params ) )
    {
      w.label = 1 - label;
      d.append( w, {} );
    }
    Network<float> net( build_mlp( Scenario::srs ), 3 );
    TrainOptions o;
    o.epochs = 60;
    o.batch = 8;
    train( net, to_matrix( d ), d.labels, o );
    EXPECT_EQ( deploy( net, locked, params ).key.bits.at( 0 ), label );
  }
}

TEST( Attack, SrsReportArtifactsAndDeterminism )
{
  const NamedNetlist target{ "r200", circuit( 10, 200 ) };
  const auto dir = scratch( "srs" );
  const auto report = run_srs_attack( target, tiny_config( 1 ), dir );
  EXPECT_EQ( report.scenario, Scenario::srs );
  ASSERT_TRUE( report.truth && report.kpa );
  EXPECT_EQ( report.predicted.size(), 8u );
  EXPECT_EQ( report.probabilities.size(), 8u );
  EXPECT_DOUBLE_EQ( *report.kpa, kpa( report.predicted, *report.truth ) );
  EXPECT_EQ( report.model["kind"], "mlp" );
  for ( const char* stage : { "setup", "dataset", "model", "deploy", "score" } )
  {
    EXPECT_TRUE( report.timing.count( stage ) ) << stage;
  }
  for ( const char* f : { "setup/target.bench", "setup/locked.bench", "truth/lockrecord.json", "dataset/train/data.csv",
                          "dataset/test/data.csv", "model/model.lmm", "deploy/prediction.json", "report.json" } )
  {
    EXPECT_TRUE( std::filesystem::exists( dir / f ) ) << f;
  }
  // the persisted truth is the key of the persisted locked netlist
  const auto truth = read_lock_record( dir / "truth" / "lockrecord.json" );
  EXPECT_EQ( truth.key, *report.truth );
  EXPECT_EQ( read_bench_file( dir / "setup" / "locked.bench" ).key_inputs().size(), 8u );

  const auto again = run_srs_attack( target, tiny_config( 1 ) );
  EXPECT_EQ( to_json( again, false ), to_json( report, false ) );
  const auto model = load_model( dir / "model" / "model.lmm" );
  EXPECT_EQ( deploy( model.network, prepare_locked( read_bench_file( dir / "setup" / "locked.bench" ), {} ), {} ).key,
             report.predicted );
}

TEST( Attack, GssRejectsLeakageAndRecordsScenario )
{
  const std::vector<NamedNetlist> train{ { "a", circuit( 20 ) }, { "b", circuit( 21 ) } };
  try
  {
    run_gss_attack( { train[0], { "t", circuit( 22 ) } }, { "t", circuit( 22 ) }, tiny_config( 1 ) );
    FAIL();
  }
  catch ( const StageError& e )
  {
    EXPECT_EQ( e.kind(), "target-leakage" );
    EXPECT_EQ( e.stage(), "dataset" );
  }
  const auto report = run_gss_attack( train, { "t", circuit( 22 ) }, tiny_config( 2 ) );
  EXPECT_EQ( report.scenario, Scenario::gss );
  EXPECT_EQ( to_json( report )["scenario"], "gss" );
  EXPECT_EQ( report.training_vectors, 2u * 6 * 8 );
  EXPECT_EQ( report.model["spec"], to_json( build_mlp( Scenario::gss ) ) );
}

TEST( Attack, StageErrorsCarryTheStage )
{
  auto c = tiny_config( 1 );
  c.key_bits = 500;
  try
  {
    run_srs_attack( { "small", circuit( 3, 40 ) }, c );
    FAIL();
  }
  catch ( const StageError& e )
  {
    EXPECT_EQ( e.stage(), "setup" );
    EXPECT_EQ( e.kind(), "not-enough-locations" );
  }
}

TEST( Attack, EvolvedCnnWritesEvolutionLog )
{
  auto c = tiny_config( 3 );
  c.model = ModelKind::cnn_evolved;
  c.relocks = 4;
  c.evolution.population = 2;
  c.evolution.generations = 2;
  c.evolution.epochs = 1;
  c.epochs = 1;
  const auto dir = scratch( "evolved" );
  const auto report = run_srs_attack( { "r", circuit( 11, 200 ) }, c, dir );
  EXPECT_EQ( report.model["kind"], "cnn-evolved" );
  EXPECT_EQ( report.model["ga_evaluations"], 4 );
  std::ifstream log( dir / "model" / "evolution.jsonl" );
  std::string line;
  std::size_t lines = 0;
  while ( std::getline( log, line ) )
  {
    ++lines;
    EXPECT_TRUE( nlohmann::json::parse( line ).contains( "architecture_hash" ) );
  }
  EXPECT_EQ( lines, 4u );
}

TEST( Attack, ConfigSchema )
{
  const auto c = attack_config_from_json( { { "scheme", "unbiased" },
                                            { "model", "cnn-fixed" },
                                            { "key_bits", 16 },
                                            { "extraction", { { "depth_mode", "nodes" } } },
                                            { "evolution", { { "population", 4 } } },
                                            { "passes", { "run-collapse", "dead-gate" } } } );
  EXPECT_EQ( c.pipeline.scheme, Scheme::unbiased );
  EXPECT_EQ( c.model, ModelKind::cnn_fixed );
  EXPECT_EQ( c.pipeline.passes.size(), 2u );
  EXPECT_EQ( to_json( attack_config_from_json( to_json( c ) ) ), to_json( c ) );
  EXPECT_THROW( attack_config_from_json( { { "keybits", 16 } } ), Error );
  EXPECT_THROW( attack_config_from_json( { { "key_bits", -1 } } ), Error );
  EXPECT_THROW( attack_config_from_json( { { "model", "rnn" } } ), Error );
}
