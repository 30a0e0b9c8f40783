#include "lockml/neuroevo.hpp"

#include "lockml/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>

namespace lockml
{

namespace
{

constexpr std::uint64_t population_stream = 0x706f70;
constexpr std::uint64_t fitness_stream = 0x666974;
constexpr std::uint64_t holdout_stream = 0x686f6c64;

std::uint64_t key_hash( const std::string& key )
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for ( unsigned char c : key )
  {
    h = ( h ^ c ) * 0x100000001b3ull;
  }
  return h ^ key.size();
}

} // namespace

std::string Genotype::to_string() const
{
  std::string s;
  for ( std::size_t i = 0; i < genotype_length; ++i )
  {
    if ( i == max_internal_layers )
    {
      s.push_back( ' ' );
    }
    s.push_back( bits[i] ? '1' : '0' );
  }
  return s;
}

Genotype Genotype::from_string( std::string_view text )
{
  Genotype g;
  std::size_t n = 0;
  for ( char c : text )
  {
    if ( c == ' ' || c == ',' || c == '[' || c == ']' )
    {
      continue;
    }
    if ( ( c != '0' && c != '1' ) || n >= genotype_length )
    {
      throw Error( "format", "a genotype is 14 binary digits" );
    }
    g.bits[n++] = c == '1';
  }
  if ( n != genotype_length )
  {
    throw Error( "format", "a genotype is 14 binary digits" );
  }
  return g;
}

Genotype Genotype::from_index( std::uint32_t index )
{
  Genotype g;
  for ( std::size_t i = 0; i < genotype_length; ++i )
  {
    g.bits[i] = ( index >> ( genotype_length - 1 - i ) ) & 1u;
  }
  return g;
}

CnnArchitecture decode( const Genotype& genotype )
{
  CnnArchitecture a;
  for ( std::size_t i = 0; i < max_internal_layers; ++i )
  {
    if ( genotype.bits[i] )
    {
      a.internal.push_back( genotype.bits[i + max_internal_layers] ? InternalLayer::conv : InternalLayer::pool );
    }
  }
  return a;
}

std::vector<CnnArchitecture> enumerate_architectures()
{
  std::set<std::string> keys;
  for ( std::uint32_t i = 0; i < ( 1u << genotype_length ); ++i )
  {
    keys.insert( decode( Genotype::from_index( i ) ).key() );
  }
  std::vector<CnnArchitecture> out;
  for ( const auto& k : keys )
  {
    out.push_back( CnnArchitecture::from_key( k ) );
  }
  return out;
}

void EvolutionConfig::check() const
{
  if ( population < 2 || generations < 1 || tournament < 1 || epochs < 1 || batch < 1 )
  {
    throw Error( "config-schema", "GA needs population >= 2, generations >= 1, tournament >= 1, epochs >= 1" );
  }
  if ( mutation_rate < 0 || mutation_rate > 1 || crossover_rate < 0 || crossover_rate > 1 )
  {
    throw Error( "config-schema", "GA rates must lie in [0, 1]" );
  }
  if ( !( holdout_fraction > 0 && holdout_fraction < 1 ) )
  {
    throw Error( "config-schema", "holdout_fraction must lie in (0, 1)" );
  }
}

nlohmann::json to_json( const EvolutionConfig& c )
{
  return { { "population", c.population },
           { "generations", c.generations },
           { "mutation_rate", c.mutation_rate },
           { "crossover_rate", c.crossover_rate },
           { "tournament", c.tournament },
           { "elitism", c.elitism },
           { "epochs", c.epochs },
           { "batch", c.batch },
           { "fitness_mode", c.fitness_mode == FitnessMode::train_set ? "train_set" : "holdout" },
           { "holdout_fraction", c.holdout_fraction } };
}

EvolutionConfig evolution_config_from_json( const nlohmann::json& j )
{
  if ( !j.is_object() )
  {
    throw Error( "config-schema", "GA configuration must be an object" );
  }
  EvolutionConfig c;
  try
  {
    for ( const auto& [key, value] : j.items() )
    {
      if ( key == "population" )
        c.population = value.get<std::size_t>();
      else if ( key == "generations" )
        c.generations = value.get<std::size_t>();
      else if ( key == "mutation_rate" )
        c.mutation_rate = value.get<double>();
      else if ( key == "crossover_rate" )
        c.crossover_rate = value.get<double>();
      else if ( key == "tournament" )
        c.tournament = value.get<std::size_t>();
      else if ( key == "elitism" )
        c.elitism = value.get<bool>();
      else if ( key == "epochs" )
        c.epochs = value.get<std::size_t>();
      else if ( key == "batch" )
        c.batch = value.get<std::size_t>();
      else if ( key == "holdout_fraction" )
        c.holdout_fraction = value.get<double>();
      else if ( key == "fitness_mode" )
      {
        const auto s = value.get<std::string>();
        if ( s != "train_set" && s != "holdout" )
        {
          throw Error( "config-schema", "fitness_mode must be 'train_set' or 'holdout'" );
        }
        c.fitness_mode = s == "train_set" ? FitnessMode::train_set : FitnessMode::holdout;
      }
      else
        throw Error( "config-schema", "unknown GA key '" + key + "'" );
    }
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "config-schema", std::string( "GA configuration: " ) + e.what() );
  }
  c.check();
  return c;
}

std::size_t tournament_select( const std::vector<std::optional<double>>& fitness,
                               const std::vector<Genotype>& population, std::size_t size, Rng& rng )
{
  auto better = [&]( std::size_t a, std::size_t b ) {
    const auto fa = fitness[a].value_or( -std::numeric_limits<double>::infinity() );
    const auto fb = fitness[b].value_or( -std::numeric_limits<double>::infinity() );
    if ( fa != fb )
    {
      return fa > fb;
    }
    const auto da = decode( population[a] ).internal.size();
    const auto db = decode( population[b] ).internal.size();
    if ( da != db )
    {
      return da < db;
    }
    return a < b;
  };
  auto best = rng.uniform_index( population.size() );
  for ( std::size_t i = 1; i < size; ++i )
  {
    const auto c = rng.uniform_index( population.size() );
    if ( better( c, best ) )
    {
      best = c;
    }
  }
  return best;
}

std::pair<Genotype, Genotype> two_point_crossover( const Genotype& a, const Genotype& b, Rng& rng )
{
  auto i = rng.uniform_index( genotype_length + 1 );
  auto j = rng.uniform_index( genotype_length + 1 );
  if ( i > j )
  {
    std::swap( i, j );
  }
  auto x = a;
  auto y = b;
  for ( auto k = i; k < j; ++k )
  {
    std::swap( x.bits[k], y.bits[k] );
  }
  return { x, y };
}

Genotype mutate( const Genotype& g, double rate, Rng& rng )
{
  auto out = g;
  for ( auto& b : out.bits )
  {
    if ( rng.bernoulli( rate ) )
    {
      b ^= 1u;
    }
  }
  return out;
}

FitnessFunction cnn_fitness( const LabeledDataset& data, const EvolutionConfig& config )
{
  if ( !data.labeled || data.size() == 0 )
  {
    throw Error( "config-schema", "evolution needs a labelled, non-empty dataset" );
  }
  if ( data.vector_length != 400 )
  {
    throw Error( "shape-mismatch", "the CNN expects 400-entry vectors (20x20)" );
  }
  struct Split
  {
    Matrix<float> train_x, eval_x;
    std::vector<std::uint8_t> train_y, eval_y;
  };
  auto split_data = std::make_shared<Split>();
  if ( config.fitness_mode == FitnessMode::holdout )
  {
    const auto [tr, ho] = split( data, 1.0 - config.holdout_fraction, derive_seed( config.seed, { holdout_stream } ) );
    split_data->train_x = to_matrix( tr );
    split_data->train_y = tr.labels;
    split_data->eval_x = to_matrix( ho );
    split_data->eval_y = ho.labels;
  }
  else
  {
    split_data->train_x = to_matrix( data );
    split_data->train_y = data.labels;
  }
  const auto epochs = config.epochs;
  const auto batch = config.batch;
  const bool holdout = config.fitness_mode == FitnessMode::holdout;
  return [split_data, epochs, batch, holdout]( const CnnArchitecture& arch, std::uint64_t seed ) {
    Network<float> net( build_cnn( arch ), seed );
    TrainOptions o;
    o.epochs = epochs;
    o.batch = batch;
    o.seed = seed;
    train( net, split_data->train_x, split_data->train_y, o );
    FitnessOutcome out;
    out.epochs = epochs;
    out.kpa = holdout ? accuracy( net, split_data->eval_x, split_data->eval_y )
                      : accuracy( net, split_data->train_x, split_data->train_y );
    out.model = std::move( net );
    return out;
  };
}

nlohmann::json to_json( const Evaluation& e )
{
  nlohmann::json j{ { "generation", e.generation },
                    { "genotype", e.genotype.to_string() },
                    { "architecture", e.architecture },
                    { "architecture_hash", key_hash( e.architecture ) },
                    { "epochs", e.epochs },
                    { "seconds", e.seconds },
                    { "cached", e.cached } };
  j["kpa"] = e.fitness ? nlohmann::json( *e.fitness ) : nlohmann::json( nullptr );
  if ( !e.error.empty() )
  {
    j["error"] = e.error;
  }
  return j;
}

EvolutionResult evolve( const FitnessFunction& fitness, const EvolutionConfig& config,
                        const std::function<void( const Evaluation& )>& on_evaluation )
{
  config.check();
  Rng rng( derive_seed( config.seed, { population_stream } ) );

  struct Memo
  {
    std::optional<double> fitness;
    std::size_t epochs = 0;
    std::string error;
  };
  std::map<std::string, Memo> memo;
  EvolutionResult result;
  bool have_best = false;

  auto evaluate = [&]( std::size_t generation, const std::vector<Genotype>& pop ) {
    // train every architecture not seen before, possibly in parallel
    std::vector<std::string> fresh;
    for ( const auto& g : pop )
    {
      const auto key = decode( g ).key();
      if ( !memo.count( key ) && std::find( fresh.begin(), fresh.end(), key ) == fresh.end() )
      {
        fresh.push_back( key );
      }
    }
    std::vector<FitnessOutcome> outcomes( fresh.size() );
    std::vector<std::string> errors( fresh.size() );
    std::vector<double> seconds( fresh.size() );
    parallel_for( fresh.size(), config.jobs, [&]( std::size_t i ) {
      const auto start = std::chrono::steady_clock::now();
      try
      {
        outcomes[i] = fitness( CnnArchitecture::from_key( fresh[i] ),
                               derive_seed( config.seed, { fitness_stream, key_hash( fresh[i] ) } ) );
      }
      catch ( const std::exception& e )
      {
        errors[i] = e.what();
      }
      seconds[i] = std::chrono::duration<double>( std::chrono::steady_clock::now() - start ).count();
    } );
    std::map<std::string, double> fresh_seconds;
    for ( std::size_t i = 0; i < fresh.size(); ++i )
    {
      ++result.trainings;
      Memo m;
      m.error = errors[i];
      if ( errors[i].empty() )
      {
        m.fitness = outcomes[i].kpa;
        m.epochs = outcomes[i].epochs;
        if ( !have_best || outcomes[i].kpa > result.best_fitness )
        {
          have_best = true;
          result.best_fitness = outcomes[i].kpa;
          result.architecture = CnnArchitecture::from_key( fresh[i] );
          result.model = std::move( outcomes[i].model );
        }
      }
      memo[fresh[i]] = m;
      fresh_seconds[fresh[i]] = seconds[i];
    }

    std::vector<std::optional<double>> fit;
    std::set<std::string> logged_fresh;
    for ( const auto& g : pop )
    {
      const auto key = decode( g ).key();
      const auto& m = memo.at( key );
      Evaluation e;
      e.generation = generation;
      e.genotype = g;
      e.architecture = key;
      e.fitness = m.fitness;
      e.error = m.error;
      const bool first_use = fresh_seconds.count( key ) && logged_fresh.insert( key ).second;
      e.cached = !first_use;
      e.epochs = first_use ? m.epochs : 0;
      e.seconds = first_use ? fresh_seconds[key] : 0.0;
      ++result.evaluations;
      if ( on_evaluation )
      {
        on_evaluation( e );
      }
      result.log.push_back( e );
      fit.push_back( m.fitness );
      if ( m.fitness && decode( result.best ).key() != result.architecture.key() &&
           key == result.architecture.key() )
      {
        result.best = g;
      }
    }
    return fit;
  };

  auto record = [&]( const std::vector<std::optional<double>>& fit ) {
    GenerationStats s;
    double sum = 0;
    std::size_t valid = 0;
    s.best = -std::numeric_limits<double>::infinity();
    for ( const auto& f : fit )
    {
      if ( f )
      {
        s.best = std::max( s.best, *f );
        sum += *f;
        ++valid;
      }
    }
    if ( valid == 0 )
    {
      s.best = 0;
    }
    s.mean = valid ? sum / valid : 0.0;
    s.best_ever = result.best_fitness;
    result.history.push_back( s );
  };

  std::vector<Genotype> pop( config.population );
  for ( auto& g : pop )
  {
    for ( auto& b : g.bits )
    {
      b = rng.bit();
    }
  }
  result.best = pop.front();
  auto fit = evaluate( 1, pop );
  record( fit );

  for ( std::size_t gen = 2; gen <= config.generations; ++gen )
  {
    std::vector<Genotype> next;
    if ( config.elitism )
    {
      std::size_t elite = 0;
      for ( std::size_t i = 1; i < pop.size(); ++i )
      {
        const auto a = fit[i].value_or( -std::numeric_limits<double>::infinity() );
        const auto b = fit[elite].value_or( -std::numeric_limits<double>::infinity() );
        if ( a > b )
        {
          elite = i;
        }
      }
      next.push_back( pop[elite] );
    }
    while ( next.size() < config.population )
    {
      const auto& p1 = pop[tournament_select( fit, pop, config.tournament, rng )];
      const auto& p2 = pop[tournament_select( fit, pop, config.tournament, rng )];
      auto children = rng.bernoulli( config.crossover_rate ) ? two_point_crossover( p1, p2, rng )
                                                             : std::pair<Genotype, Genotype>{ p1, p2 };
      next.push_back( mutate( children.first, config.mutation_rate, rng ) );
      if ( next.size() < config.population )
      {
        next.push_back( mutate( children.second, config.mutation_rate, rng ) );
      }
    }
    pop = std::move( next );
    fit = evaluate( gen, pop );
    record( fit );
  }
  return result;
}

EvolutionResult evolve( const LabeledDataset& data, const EvolutionConfig& config,
                        const std::function<void( const Evaluation& )>& on_evaluation )
{
  return evolve( cnn_fitness( data, config ), config, on_evaluation );
}

} // namespace lockml
