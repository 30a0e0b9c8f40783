#include "lockml/attack.hpp"

#include "lockml/bench.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace lockml
{

namespace
{

constexpr std::uint64_t truth_stream = 0x7472757468;
constexpr std::uint64_t data_stream = 0x64617461;
constexpr std::uint64_t model_stream = 0x6d6f64656c;

/* Runs one stage, records its wall time and tags its errors. */
template<typename F>
auto stage( const std::string& name, std::map<std::string, double>& timing, F&& f )
{
  const auto start = std::chrono::steady_clock::now();
  try
  {
    if constexpr ( std::is_void_v<decltype( f() )> )
    {
      f();
      timing[name] = std::chrono::duration<double>( std::chrono::steady_clock::now() - start ).count();
    }
    else
    {
      auto r = f();
      timing[name] = std::chrono::duration<double>( std::chrono::steady_clock::now() - start ).count();
      return r;
    }
  }
  catch ( const StageError& )
  {
    throw;
  }
  catch ( const Error& e )
  {
    throw StageError( name, e );
  }
}

void write_json( const nlohmann::json& j, const std::filesystem::path& path )
{
  std::filesystem::create_directories( path.parent_path() );
  std::ofstream out( path );
  if ( !out )
  {
    throw Error( "io", "cannot write '" + path.string() + "'" );
  }
  out << j.dump( 2 ) << "\n";
}

std::size_t get_size( const nlohmann::json& v, const std::string& key )
{
  if ( !v.is_number_unsigned() && !( v.is_number_integer() && v.get<long long>() >= 0 ) )
  {
    throw Error( "config-schema", "'" + key + "' must be a non-negative integer" );
  }
  return v.get<std::size_t>();
}

Deployment finish( AttackReport& report, const Network<float>& network, const Netlist& prepared,
                   const AttackConfig& config, const LockRecord& truth,
                   const std::optional<std::filesystem::path>& artifacts )
{
  auto d = stage( "deploy", report.timing, [&] {
    auto d = deploy( network, prepared, config.pipeline.extraction );
    if ( artifacts )
    {
      write_json( { { "key", d.key.to_string() }, { "probabilities", [&] {
                      std::vector<double> p;
                      for ( const auto& x : d.predictions )
                        p.push_back( x.probabilities[1] );
                      return p;
                    }() } },
                  *artifacts / "deploy" / "prediction.json" );
    }
    return d;
  } );
  report.predicted = d.key;
  for ( const auto& p : d.predictions )
  {
    report.probabilities.push_back( p.probabilities[1] );
  }
  stage( "score", report.timing, [&] {
    report.truth = truth.key;
    report.kpa = kpa( d.key, truth.key );
  } );
  if ( artifacts )
  {
    write_json( to_json( report ), *artifacts / "report.json" );
  }
  return d;
}

} // namespace

std::string_view to_string( ModelKind kind )
{
  switch ( kind )
  {
  case ModelKind::mlp:
    return "mlp";
  case ModelKind::cnn_fixed:
    return "cnn-fixed";
  default:
    return "cnn-evolved";
  }
}

ModelKind model_kind_from_string( std::string_view name )
{
  if ( name == "mlp" )
    return ModelKind::mlp;
  if ( name == "cnn-fixed" )
    return ModelKind::cnn_fixed;
  if ( name == "cnn-evolved" )
    return ModelKind::cnn_evolved;
  throw Error( "config-schema", "unknown model kind '" + std::string( name ) + "' (mlp, cnn-fixed, cnn-evolved)" );
}

void AttackConfig::check() const
{
  if ( key_bits == 0 || relocks == 0 || locks == 0 || epochs == 0 || batch == 0 )
  {
    throw Error( "config-schema", "key_bits, relocks, locks, epochs and batch must be positive" );
  }
  pipeline.extraction.check();
  evolution.check();
}

nlohmann::json to_json( const AttackConfig& c )
{
  std::vector<std::string> passes;
  for ( auto p : c.pipeline.passes )
  {
    passes.emplace_back( to_string( p ) );
  }
  return { { "scheme", to_string( c.pipeline.scheme ) },
           { "key_bits", c.key_bits },
           { "relocks", c.relocks },
           { "relock_bits", c.relock_bits },
           { "locks", c.locks },
           { "model", to_string( c.model ) },
           { "epochs", c.epochs },
           { "batch", c.batch },
           { "retrain", c.retrain },
           { "optimize", c.pipeline.optimize },
           { "passes", passes },
           { "extraction", to_json( c.pipeline.extraction ) },
           { "evolution", to_json( c.evolution ) } };
}

AttackConfig attack_config_from_json( const nlohmann::json& j )
{
  if ( !j.is_object() )
  {
    throw Error( "config-schema", "configuration must be an object" );
  }
  AttackConfig c;
  try
  {
    for ( const auto& [key, value] : j.items() )
    {
      if ( key == "scheme" )
        c.pipeline.scheme = scheme_from_string( value.get<std::string>() );
      else if ( key == "key_bits" )
        c.key_bits = get_size( value, key );
      else if ( key == "relocks" )
        c.relocks = get_size( value, key );
      else if ( key == "relock_bits" )
        c.relock_bits = get_size( value, key );
      else if ( key == "locks" )
        c.locks = get_size( value, key );
      else if ( key == "model" )
        c.model = model_kind_from_string( value.get<std::string>() );
      else if ( key == "epochs" )
        c.epochs = get_size( value, key );
      else if ( key == "batch" )
        c.batch = get_size( value, key );
      else if ( key == "retrain" )
        c.retrain = value.get<bool>();
      else if ( key == "optimize" )
        c.pipeline.optimize = value.get<bool>();
      else if ( key == "passes" )
      {
        c.pipeline.passes.clear();
        for ( const auto& p : value )
        {
          c.pipeline.passes.push_back( pass_from_string( p.get<std::string>() ) );
        }
      }
      else if ( key == "extraction" )
        c.pipeline.extraction = extraction_params_from_json( value );
      else if ( key == "evolution" )
        c.evolution = evolution_config_from_json( value );
      else
        throw Error( "config-schema", "unknown configuration key '" + key + "'" );
    }
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "config-schema", std::string( "configuration: " ) + e.what() );
  }
  c.check();
  return c;
}

AttackConfig read_attack_config( const std::filesystem::path& path )
{
  std::ifstream in( path );
  if ( !in )
  {
    throw Error( "missing-input", "cannot open '" + path.string() + "'" );
  }
  nlohmann::json j;
  try
  {
    in >> j;
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "config-schema", "'" + path.string() + "' is not valid JSON: " + e.what() );
  }
  return attack_config_from_json( j );
}

double kpa( const Key& predicted, const Key& actual )
{
  if ( predicted.size() != actual.size() || actual.size() == 0 )
  {
    throw Error( "length-mismatch", "predicted key has " + std::to_string( predicted.size() ) +
                                        " bits, ground truth has " + std::to_string( actual.size() ) );
  }
  std::size_t agree = 0;
  for ( std::size_t i = 0; i < actual.size(); ++i )
  {
    agree += predicted[i] == actual[i];
  }
  return 100.0 * static_cast<double>( agree ) / static_cast<double>( actual.size() );
}

Deployment deploy( const Network<float>& model, const Netlist& target, const ExtractionParams& params )
{
  const auto vectors = lve( target, params );
  Matrix<float> x( static_cast<Eigen::Index>( vectors.size() ), static_cast<Eigen::Index>( params.vector_length ) );
  for ( std::size_t i = 0; i < vectors.size(); ++i )
  {
    for ( std::size_t j = 0; j < params.vector_length; ++j )
    {
      x( static_cast<Eigen::Index>( i ), static_cast<Eigen::Index>( j ) ) = vectors[i].formatted[j];
    }
  }
  Deployment d;
  d.predictions = predict( model, x );
  for ( const auto& p : d.predictions )
  {
    d.key.bits.push_back( p.bit );
  }
  return d;
}

AttackModel fit_model( const LabeledDataset& train_set, Scenario scenario, const AttackConfig& config,
                       const std::optional<std::filesystem::path>& log_dir )
{
  if ( !train_set.labeled || train_set.size() == 0 )
  {
    throw Error( "config-schema", "model training needs a labelled, non-empty dataset" );
  }
  const auto seed = derive_seed( config.seed, { model_stream } );
  const auto x = to_matrix( train_set );
  TrainOptions options;
  options.epochs = config.epochs;
  options.batch = config.batch;
  options.seed = seed;

  ModelSpec spec;
  nlohmann::json identity{ { "kind", to_string( config.model ) } };
  std::optional<Network<float>> evolved;
  switch ( config.model )
  {
  case ModelKind::mlp:
    spec = build_mlp( scenario );
    break;
  case ModelKind::cnn_fixed:
    spec = build_cnn( {} );
    identity["architecture"] = "";
    break;
  case ModelKind::cnn_evolved:
  {
    auto ga = config.evolution;
    ga.seed = derive_seed( seed, { 0x6761 } );
    ga.jobs = config.pipeline.jobs;
    std::ofstream log;
    if ( log_dir )
    {
      std::filesystem::create_directories( *log_dir );
      log.open( *log_dir / "evolution.jsonl" );
    }
    auto result = evolve( train_set, ga, [&]( const Evaluation& e ) {
      if ( log )
      {
        log << to_json( e ).dump() << "\n" << std::flush;
      }
    } );
    spec = build_cnn( result.architecture );
    identity["architecture"] = result.architecture.key();
    identity["genotype"] = result.best.to_string();
    identity["ga_fitness"] = result.best_fitness;
    identity["ga_evaluations"] = result.evaluations;
    identity["ga_trainings"] = result.trainings;
    if ( !config.retrain )
    {
      evolved = std::move( result.model );
    }
    break;
  }
  }
  identity["spec"] = to_json( spec );
  identity["parameters"] = spec.parameter_count();

  if ( evolved )
  {
    identity["epochs"] = config.evolution.epochs;
    return { std::move( *evolved ), identity };
  }
  Network<float> net( spec, seed );
  const auto history = train( net, x, train_set.labels, options );
  identity["epochs"] = config.epochs;
  identity["final_loss"] = history.loss.back();
  identity["training_accuracy"] = history.accuracy.back();
  return { std::move( net ), identity };
}

nlohmann::json to_json( const AttackReport& r, bool with_timing )
{
  nlohmann::json j{ { "format", "lockml-attack-report" },
                    { "version", 1 },
                    { "scenario", to_string( r.scenario ) },
                    { "target", r.target },
                    { "scheme", to_string( r.scheme ) },
                    { "predicted_key", r.predicted.to_string() },
                    { "probabilities", r.probabilities },
                    { "model", r.model },
                    { "training_vectors", r.training_vectors },
                    { "seed", r.seed } };
  if ( r.truth && r.kpa )
  {
    j["truth"] = r.truth->to_string();
    j["kpa"] = *r.kpa;
  }
  if ( with_timing )
  {
    j["timing"] = r.timing;
  }
  return j;
}

namespace
{

struct Setup
{
  Netlist locked;
  LockRecord record;
};

Setup setup_target( const NamedNetlist& target, const AttackConfig& config, AttackReport& report,
                    const std::optional<std::filesystem::path>& artifacts )
{
  return stage( "setup", report.timing, [&] {
    const auto generic = to_generic( target.netlist );
    const auto s = derive_seed( config.seed, { truth_stream } );
    auto [locked, record] = lock( generic, keygen( config.key_bits, s ), s, config.pipeline.scheme );
    if ( artifacts )
    {
      std::filesystem::create_directories( *artifacts / "setup" );
      std::filesystem::create_directories( *artifacts / "truth" );
      write_bench_file( generic, *artifacts / "setup" / "target.bench" );
      write_bench_file( locked, *artifacts / "setup" / "locked.bench" );
      write_lock_record( record, *artifacts / "truth" / "lockrecord.json" );
    }
    return Setup{ std::move( locked ), std::move( record ) };
  } );
}

AttackModel model_stage( const LabeledDataset& train_set, Scenario scenario, const AttackConfig& config,
                         AttackReport& report, const std::optional<std::filesystem::path>& artifacts )
{
  return stage( "model", report.timing, [&] {
    auto m = fit_model( train_set, scenario, config,
                        artifacts ? std::optional<std::filesystem::path>( *artifacts / "model" ) : std::nullopt );
    if ( artifacts )
    {
      std::filesystem::create_directories( *artifacts / "model" );
      save_model( m.network, m.identity, *artifacts / "model" / "model.lmm" );
    }
    return m;
  } );
}

} // namespace

AttackReport run_srs_attack( const NamedNetlist& target, const AttackConfig& config,
                             const std::optional<std::filesystem::path>& artifacts )
{
  config.check();
  AttackReport report;
  report.scenario = Scenario::srs;
  report.target = target.id;
  report.scheme = config.pipeline.scheme;
  report.seed = config.seed;

  const auto setup = setup_target( target, config, report, artifacts );
  const auto data = stage( "dataset", report.timing, [&] {
    auto d = gen_srs( setup.locked, setup.record, config.relocks,
                      config.relock_bits ? config.relock_bits : config.key_bits,
                      derive_seed( config.seed, { data_stream } ), config.pipeline, target.id );
    if ( artifacts )
    {
      save_dataset( d.train, *artifacts / "dataset" / "train" );
      save_dataset( d.test, *artifacts / "dataset" / "test" );
    }
    return d;
  } );
  report.training_vectors = data.train.size();
  const auto model = model_stage( data.train, Scenario::srs, config, report, artifacts );
  report.model = model.identity;
  finish( report, model.network, prepare_locked( setup.locked, config.pipeline ), config, setup.record, artifacts );
  return report;
}

AttackReport run_gss_attack( const std::vector<NamedNetlist>& train_set, const NamedNetlist& target,
                             const AttackConfig& config, const std::optional<std::filesystem::path>& artifacts )
{
  config.check();
  AttackReport report;
  report.scenario = Scenario::gss;
  report.target = target.id;
  report.scheme = config.pipeline.scheme;
  report.seed = config.seed;

  for ( const auto& n : train_set )
  {
    if ( n.id == target.id )
    {
      throw StageError( "dataset", Error( "target-leakage", "target '" + target.id + "' is among the training netlists" ) );
    }
  }
  const auto setup = setup_target( target, config, report, artifacts );
  const auto data = stage( "dataset", report.timing, [&] {
    auto d = gen_gss( train_set, target.id, config.locks, config.key_bits, derive_seed( config.seed, { data_stream } ),
                      config.pipeline );
    if ( artifacts )
    {
      save_dataset( d, *artifacts / "dataset" / "train" );
    }
    return d;
  } );
  report.training_vectors = data.size();
  const auto model = model_stage( data, Scenario::gss, config, report, artifacts );
  report.model = model.identity;
  finish( report, model.network, prepare_locked( setup.locked, config.pipeline ), config, setup.record, artifacts );
  return report;
}

} // namespace lockml
