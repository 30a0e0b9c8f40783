/*!
  \file lockml.cpp
  \brief Command line front end.

  Every subcommand is a thin adapter over the library; errors are reported
  on stderr as a JSON object {"error": kind, "message": ...} with exit code 1
  (2 for command line usage errors).
*/

#include "lockml/attack.hpp"
#include "lockml/bench.hpp"
#include "lockml/equiv.hpp"
#include "lockml/generate.hpp"
#include "lockml/parallel.hpp"
#include "lockml/simulate.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace lockml;
namespace fs = std::filesystem;

namespace
{

constexpr const char* version_text =
    "lockml 0.1.0 (bench 1, lockrecord 1, dataset 1, model 1, attack-report 1)";

struct Common
{
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::size_t jobs = default_jobs();
};

void add_common( CLI::App* app, Common& c )
{
  app->add_option( "--seed", c.seed, "Seed for every random choice" );
  app->add_option( "--config", c.config, "JSON configuration file" );
  app->add_option( "--out", c.out, "Output directory" );
  app->add_option( "--jobs", c.jobs, "Worker threads" )->check( CLI::PositiveNumber );
}

AttackConfig load_config( const Common& c )
{
  auto config = c.config.empty() ? AttackConfig{} : read_attack_config( c.config );
  config.seed = c.seed;
  config.pipeline.jobs = c.jobs;
  return config;
}

fs::path out_dir( const Common& c )
{
  const fs::path dir = c.out.empty() ? fs::path( "." ) : fs::path( c.out );
  fs::create_directories( dir );
  return dir;
}

std::string read_text( const fs::path& path )
{
  std::ifstream in( path );
  if ( !in )
  {
    throw Error( "missing-input", "cannot open '" + path.string() + "'" );
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text( const fs::path& path, const std::string& text )
{
  std::ofstream out( path );
  if ( !out )
  {
    throw Error( "io", "cannot write '" + path.string() + "'" );
  }
  out << text;
}

/* Key from a bare bit string, {"key": ...}, {"predicted_key": ...} or a lock record. */
Key read_key( const fs::path& path )
{
  const auto text = read_text( path );
  const auto first = text.find_first_not_of( " \t\r\n" );
  if ( first != std::string::npos && text[first] != '{' )
  {
    return Key::from_string( text.substr( first, text.find_last_not_of( " \t\r\n" ) - first + 1 ) );
  }
  try
  {
    const auto j = nlohmann::json::parse( text );
    for ( const char* field : { "key", "predicted_key" } )
    {
      if ( j.contains( field ) )
      {
        return Key::from_string( j[field].get<std::string>() );
      }
    }
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "format", "'" + path.string() + "': " + e.what() );
  }
  throw Error( "format", "'" + path.string() + "' holds no key" );
}

std::string stem_of( const std::string& path )
{
  return fs::path( path ).stem().string();
}

std::vector<NamedNetlist> read_named( const std::vector<std::string>& paths )
{
  std::vector<NamedNetlist> out;
  for ( const auto& p : paths )
  {
    out.push_back( { stem_of( p ), read_bench_file( p ) } );
  }
  return out;
}

void print_error( const std::string& kind, const std::string& message, const std::string& stage = {} )
{
  nlohmann::json j{ { "error", kind }, { "message", message } };
  if ( !stage.empty() )
  {
    j["stage"] = stage;
  }
  std::cerr << j.dump() << std::endl;
}

} // namespace

int main( int argc, char** argv )
{
  CLI::App app{ "Machine-learning attacks on XOR/XNOR logic locking" };
  app.set_version_flag( "--version", version_text );
  app.require_subcommand( 1 );
  Common common;

  // keygen
  auto* keygen_cmd = app.add_subcommand( "keygen", "Generate a seeded random key" );
  add_common( keygen_cmd, common );
  std::size_t key_bits = 32;
  keygen_cmd->add_option( "--bits", key_bits, "Key length" )->check( CLI::PositiveNumber );

  // gen-circuit
  auto* gen_circuit_cmd = app.add_subcommand( "gen-circuit", "Write a synthetic benchmark circuit" );
  add_common( gen_circuit_cmd, common );
  std::string circuit_kind = "random";
  RandomCircuitParams rc;
  std::size_t arith_bits = 8;
  std::string circuit_name;
  gen_circuit_cmd->add_option( "--kind", circuit_kind, "random, adder, multiplier or c17" )
      ->check( CLI::IsMember( { "random", "adder", "multiplier", "c17" } ) );
  gen_circuit_cmd->add_option( "--inputs", rc.inputs );
  gen_circuit_cmd->add_option( "--gates", rc.gates );
  gen_circuit_cmd->add_option( "--outputs", rc.outputs );
  gen_circuit_cmd->add_option( "--max-fanin", rc.max_fanin );
  gen_circuit_cmd->add_option( "--bits", arith_bits, "Adder/multiplier width" );
  gen_circuit_cmd->add_option( "--name", circuit_name, "Output file stem" );

  // lock
  auto* lock_cmd = app.add_subcommand( "lock", "Insert XOR/XNOR key gates" );
  add_common( lock_cmd, common );
  std::string input;
  std::string scheme_name;
  std::string key_text;
  lock_cmd->add_option( "input", input, "Bench file" )->required();
  auto* lock_scheme = lock_cmd->add_option( "--scheme", scheme_name, "epic or unbiased" );
  auto* lock_bits = lock_cmd->add_option( "--key-bits", key_bits, "Key length" )->check( CLI::PositiveNumber );
  lock_cmd->add_option( "--key", key_text, "Explicit key bits (default: keygen from the seed)" );

  // transform
  auto* transform_cmd = app.add_subcommand( "transform", "Decompose into two-input generic form" );
  add_common( transform_cmd, common );
  transform_cmd->add_option( "input", input )->required();

  // optimize
  auto* optimize_cmd = app.add_subcommand( "optimize", "Run the peephole passes to a fixpoint" );
  add_common( optimize_cmd, common );
  std::vector<std::string> pass_names;
  optimize_cmd->add_option( "input", input )->required();
  optimize_cmd->add_option( "--passes", pass_names, "Pass names in order (default: all six)" );

  // extract
  auto* extract_cmd = app.add_subcommand( "extract", "Extract locality vectors of every key input" );
  add_common( extract_cmd, common );
  std::string record_path;
  bool prepare = false;
  extract_cmd->add_option( "input", input, "Locked bench file" )->required();
  extract_cmd->add_option( "--record", record_path, "Lock record; labels the vectors" );
  extract_cmd->add_flag( "--prepare", prepare, "Optimize and transform before extracting" );

  // gen-dataset
  auto* gen_dataset_cmd = app.add_subcommand( "gen-dataset", "Generate a GSS or SRS training set" );
  add_common( gen_dataset_cmd, common );
  std::string scenario_name = "srs";
  std::vector<std::string> train_paths;
  std::string target_path;
  std::string target_id;
  gen_dataset_cmd->add_option( "--scenario", scenario_name )->check( CLI::IsMember( { "gss", "srs" } ) );
  gen_dataset_cmd->add_option( "--train", train_paths, "GSS: training bench files" );
  gen_dataset_cmd->add_option( "--target", target_path, "SRS: locked target bench" );
  gen_dataset_cmd->add_option( "--target-id", target_id, "GSS: id excluded from training" );
  gen_dataset_cmd->add_option( "--record", record_path, "SRS: lock record of the target" );

  // train
  auto* train_cmd = app.add_subcommand( "train", "Train an MLP or the fixed CNN" );
  add_common( train_cmd, common );
  std::string data_dir;
  std::string model_name;
  train_cmd->add_option( "--data", data_dir, "Dataset directory" )->required();
  train_cmd->add_option( "--model", model_name, "mlp or cnn-fixed" )
      ->check( CLI::IsMember( { "mlp", "cnn-fixed" } ) );

  // evolve
  auto* evolve_cmd = app.add_subcommand( "evolve", "Search CNN architectures with the genetic algorithm" );
  add_common( evolve_cmd, common );
  auto* evolve_scenario = evolve_cmd->add_option( "--scenario", scenario_name )->check( CLI::IsMember( { "gss", "srs" } ) );
  evolve_cmd->add_option( "--data", data_dir, "Dataset directory" )->required();

  // attack
  auto* attack_cmd = app.add_subcommand( "attack", "Run an end-to-end attack" );
  add_common( attack_cmd, common );
  attack_cmd->add_option( "--scenario", scenario_name )->check( CLI::IsMember( { "gss", "srs" } ) );
  attack_cmd->add_option( "--target", target_path, "Unlocked target bench" )->required();
  attack_cmd->add_option( "--train", train_paths, "GSS: training bench files" );
  auto* attack_model = attack_cmd->add_option( "--model", model_name, "mlp, cnn-fixed or cnn-evolved" );

  // eval
  auto* eval_cmd = app.add_subcommand( "eval", "Key prediction accuracy of a predicted key" );
  add_common( eval_cmd, common );
  std::string pred_path, truth_path;
  eval_cmd->add_option( "--pred", pred_path, "Predicted key" )->required();
  eval_cmd->add_option( "--truth", truth_path, "Lock record or key" )->required();

  // export-image
  auto* image_cmd = app.add_subcommand( "export-image", "Write locality vectors as PGM images" );
  add_common( image_cmd, common );
  bool combined = false;
  image_cmd->add_option( "--data", data_dir, "Dataset directory" )->required();
  image_cmd->add_flag( "--combined", combined, "One image for all labels" );

  // equiv-check
  auto* equiv_cmd = app.add_subcommand( "equiv-check", "Compare two netlists" );
  add_common( equiv_cmd, common );
  std::string other;
  std::uint64_t vectors = 0;
  equiv_cmd->add_option( "first", input )->required();
  equiv_cmd->add_option( "second", other )->required();
  equiv_cmd->add_option( "--key", key_text, "Key applied to the second netlist (bits or key file)" );
  equiv_cmd->add_option( "--random", vectors, "Random vectors instead of exhaustive enumeration" );

  try
  {
    app.parse( argc, argv );
  }
  catch ( const CLI::Success& e )
  {
    return app.exit( e );
  }
  catch ( const CLI::ParseError& e )
  {
    print_error( "usage", e.what() );
    return 2;
  }

  try
  {
    if ( keygen_cmd->parsed() )
    {
      const auto key = keygen( key_bits, common.seed );
      const nlohmann::json j{ { "key", key.to_string() }, { "seed", common.seed } };
      if ( !common.out.empty() )
      {
        write_text( out_dir( common ) / "key.json", j.dump( 2 ) + "\n" );
      }
      std::cout << key.to_string() << "\n";
    }
    else if ( gen_circuit_cmd->parsed() )
    {
      Netlist n;
      if ( circuit_kind == "random" )
        n = random_circuit( rc, common.seed );
      else if ( circuit_kind == "adder" )
        n = ripple_carry_adder( arith_bits );
      else if ( circuit_kind == "multiplier" )
        n = array_multiplier( arith_bits );
      else
        n = c17();
      const auto name = circuit_name.empty() ? circuit_kind : circuit_name;
      const auto path = out_dir( common ) / ( name + ".bench" );
      write_bench_file( n, path );
      std::cout << path.string() << "\n";
    }
    else if ( lock_cmd->parsed() )
    {
      auto config = load_config( common );
      if ( *lock_scheme )
        config.pipeline.scheme = scheme_from_string( scheme_name );
      if ( *lock_bits )
        config.key_bits = key_bits;
      const auto key = key_text.empty() ? keygen( config.key_bits, common.seed ) : Key::from_string( key_text );
      const auto netlist = read_bench_file( input );
      auto [locked, record] = lock( netlist, key, common.seed, config.pipeline.scheme );
      const auto dir = out_dir( common );
      write_bench_file( locked, dir / "locked.bench" );
      write_lock_record( record, dir / "lockrecord.json" );
      std::cout << ( dir / "locked.bench" ).string() << "\n";
    }
    else if ( transform_cmd->parsed() )
    {
      const auto path = out_dir( common ) / ( stem_of( input ) + ".generic.bench" );
      write_bench_file( to_generic( read_bench_file( input ) ), path );
      std::cout << path.string() << "\n";
    }
    else if ( optimize_cmd->parsed() )
    {
      auto passes = load_config( common ).pipeline.passes;
      if ( !pass_names.empty() )
      {
        passes.clear();
        for ( const auto& p : pass_names )
        {
          passes.push_back( pass_from_string( p ) );
        }
      }
      const auto before = to_generic( read_bench_file( input ) );
      const auto after = optimize( before, passes, common.seed );
      const auto path = out_dir( common ) / ( stem_of( input ) + ".opt.bench" );
      write_bench_file( after, path );
      std::cout << nlohmann::json{ { "output", path.string() },
                                   { "gates_before", before.gate_count() },
                                   { "gates_after", after.gate_count() } }
                       .dump()
                << "\n";
    }
    else if ( extract_cmd->parsed() )
    {
      const auto config = load_config( common );
      auto netlist = read_bench_file( input );
      netlist = prepare ? prepare_locked( netlist, config.pipeline ) : to_generic( netlist );
      std::optional<LockRecord> record;
      if ( !record_path.empty() )
      {
        record = read_lock_record( record_path );
      }
      const auto k = netlist.key_inputs().size();
      std::optional<Key> labels;
      if ( record )
      {
        // bits before the record's offset are unknown; only its own key inputs are labelled
        if ( record->key_offset != 0 || record->key.size() != k )
        {
          throw Error( "length-mismatch", "lock record does not describe every key input of the netlist" );
        }
        labels = record->key;
      }
      const auto vectors = lve( netlist, config.pipeline.extraction, labels );
      LabeledDataset d;
      d.scenario = Scenario::srs;
      d.labeled = labels.has_value();
      d.vector_length = config.pipeline.extraction.vector_length;
      d.info = { { "source", input }, { "extraction", to_json( config.pipeline.extraction ) } };
      nlohmann::json raw = nlohmann::json::array();
      for ( const auto& v : vectors )
      {
        d.append( v, { stem_of( input ), record ? record->scheme : Scheme::epic, record ? record->seed : 0,
                       v.key_index } );
        raw.push_back( { { "key_index", v.key_index }, { "center", v.center }, { "raw", v.raw } } );
      }
      const auto dir = out_dir( common );
      save_dataset( d, dir );
      write_text( dir / "raw.json", raw.dump() + "\n" );
      std::cout << vectors.size() << " localities\n";
    }
    else if ( gen_dataset_cmd->parsed() )
    {
      const auto config = load_config( common );
      const auto dir = out_dir( common );
      if ( scenario_name == "gss" )
      {
        if ( train_paths.empty() )
        {
          throw Error( "missing-input", "gss needs --train bench files" );
        }
        const auto d = gen_gss( read_named( train_paths ), target_id, config.locks, config.key_bits, common.seed,
                                config.pipeline );
        save_dataset( d, dir / "train" );
        std::cout << d.size() << " training vectors\n";
      }
      else
      {
        if ( target_path.empty() || record_path.empty() )
        {
          throw Error( "missing-input", "srs needs --target and --record" );
        }
        const auto data = gen_srs( read_bench_file( target_path ), read_lock_record( record_path ), config.relocks,
                                   config.relock_bits ? config.relock_bits : config.key_bits, common.seed,
                                   config.pipeline, stem_of( target_path ) );
        save_dataset( data.train, dir / "train" );
        save_dataset( data.test, dir / "test" );
        std::cout << data.train.size() << " training vectors, " << data.test.size() << " test vectors\n";
      }
    }
    else if ( train_cmd->parsed() )
    {
      auto config = load_config( common );
      if ( !model_name.empty() )
        config.model = model_kind_from_string( model_name );
      if ( config.model == ModelKind::cnn_evolved )
      {
        throw Error( "config-schema", "train handles mlp and cnn-fixed; use evolve for cnn-evolved" );
      }
      const auto data = load_dataset( data_dir );
      const auto model = fit_model( data, data.scenario, config );
      const auto dir = out_dir( common );
      save_model( model.network, model.identity, dir / "model.lmm" );
      write_text( dir / "model.json", model.identity.dump( 2 ) + "\n" );
      std::cout << ( dir / "model.lmm" ).string() << "\n";
    }
    else if ( evolve_cmd->parsed() )
    {
      auto config = load_config( common );
      config.model = ModelKind::cnn_evolved;
      const auto data = load_dataset( data_dir );
      if ( *evolve_scenario && scenario_from_string( scenario_name ) != data.scenario )
      {
        throw Error( "config-schema", "dataset scenario is " + std::string( to_string( data.scenario ) ) );
      }
      const auto dir = out_dir( common );
      const auto model = fit_model( data, data.scenario, config, dir );
      save_model( model.network, model.identity, dir / "model.lmm" );
      write_text( dir / "model.json", model.identity.dump( 2 ) + "\n" );
      std::cout << model.identity["architecture"].get<std::string>() << "\n";
    }
    else if ( attack_cmd->parsed() )
    {
      auto config = load_config( common );
      if ( *attack_model )
        config.model = model_kind_from_string( model_name );
      const NamedNetlist target{ stem_of( target_path ), read_bench_file( target_path ) };
      const auto dir = out_dir( common );
      const auto report = scenario_name == "gss" ? run_gss_attack( read_named( train_paths ), target, config, dir )
                                                 : run_srs_attack( target, config, dir );
      std::cout << to_json( report ).dump( 2 ) << "\n";
    }
    else if ( eval_cmd->parsed() )
    {
      const auto predicted = read_key( pred_path );
      const auto text = read_text( truth_path );
      const auto truth = text.find( "lockml-lockrecord" ) != std::string::npos ? read_lock_record( truth_path ).key
                                                                                : read_key( truth_path );
      const auto score = kpa( predicted, truth );
      if ( !common.out.empty() )
      {
        write_text( out_dir( common ) / "kpa.json", nlohmann::json{ { "kpa", score } }.dump() + "\n" );
      }
      std::cout << score << "\n";
    }
    else if ( image_cmd->parsed() )
    {
      const auto data = load_dataset( data_dir );
      std::vector<LocalityVector> vectors;
      for ( std::size_t i = 0; i < data.size(); ++i )
      {
        LocalityVector v;
        v.key_index = data.provenance[i].key_index;
        v.formatted = data.formatted( i );
        if ( data.labeled )
        {
          v.label = data.labels[i];
        }
        vectors.push_back( std::move( v ) );
      }
      const auto dir = out_dir( common );
      for ( const auto& [label, image] : export_image( vectors, !combined ) )
      {
        const auto path = dir / ( label < 0 ? std::string( "combined.pgm" ) : "label" + std::to_string( label ) + ".pgm" );
        write_pgm( image, path );
        std::cout << path.string() << "\n";
      }
    }
    else if ( equiv_cmd->parsed() )
    {
      const auto a = read_bench_file( input );
      auto b = read_bench_file( other );
      if ( !key_text.empty() )
      {
        b = apply_key( b, fs::exists( key_text ) ? read_key( key_text ) : Key::from_string( key_text ) );
      }
      const auto options = vectors ? EquivOptions::random( vectors, common.seed ) : EquivOptions::exhaustive();
      const auto r = equiv_check( a, b, options );
      nlohmann::json j{ { "equivalent", r.equivalent }, { "vectors_checked", r.vectors_checked } };
      if ( !r.equivalent )
      {
        j["counterexample"] = r.counterexample;
      }
      std::cout << j.dump() << "\n";
    }
  }
  catch ( const StageError& e )
  {
    print_error( e.kind(), e.what(), e.stage() );
    return 1;
  }
  catch ( const Error& e )
  {
    print_error( e.kind(), e.what() );
    return 1;
  }
  catch ( const std::exception& e )
  {
    print_error( "internal", e.what() );
    return 1;
  }
  return 0;
}
