#include "lockml/dataset.hpp"

#include "lockml/parallel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace lockml
{

namespace
{

constexpr std::uint64_t gss_stream = 0x677373;
constexpr std::uint64_t srs_stream = 0x737273;
constexpr std::uint64_t split_stream = 0x73706c;

std::string read_text( const std::filesystem::path& path )
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

std::vector<std::string> split_csv( const std::string& line )
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in( line );
  while ( std::getline( in, cell, ',' ) )
  {
    out.push_back( cell );
  }
  if ( !line.empty() && line.back() == ',' )
  {
    out.emplace_back();
  }
  return out;
}

LabeledDataset subset( const LabeledDataset& d, const std::vector<std::size_t>& rows )
{
  LabeledDataset out;
  out.scenario = d.scenario;
  out.vector_length = d.vector_length;
  out.labeled = d.labeled;
  out.info = d.info;
  for ( auto r : rows )
  {
    out.codes.push_back( d.codes[r] );
    if ( d.labeled )
    {
      out.labels.push_back( d.labels[r] );
    }
    out.provenance.push_back( d.provenance[r] );
  }
  return out;
}

} // namespace

std::string_view to_string( Scenario scenario )
{
  return scenario == Scenario::gss ? "gss" : "srs";
}

Scenario scenario_from_string( std::string_view name )
{
  if ( name == "gss" )
  {
    return Scenario::gss;
  }
  if ( name == "srs" )
  {
    return Scenario::srs;
  }
  throw Error( "config-schema", "unknown scenario '" + std::string( name ) + "'" );
}

std::vector<float> LabeledDataset::formatted( std::size_t i ) const
{
  std::vector<float> out( codes[i].size() );
  for ( std::size_t j = 0; j < out.size(); ++j )
  {
    out[j] = static_cast<float>( codes[i][j] ) / 9.0f;
  }
  return out;
}

void LabeledDataset::append( const LocalityVector& v, Provenance p )
{
  if ( v.formatted.size() != vector_length )
  {
    throw Error( "length-mismatch", "locality formatted to " + std::to_string( v.formatted.size() ) +
                                        " entries, dataset expects " + std::to_string( vector_length ) );
  }
  if ( labeled && !v.label )
  {
    throw Error( "length-mismatch", "unlabelled locality added to a labelled dataset" );
  }
  std::vector<std::uint8_t> row( vector_length );
  for ( std::size_t j = 0; j < vector_length; ++j )
  {
    row[j] = static_cast<std::uint8_t>( std::lround( v.formatted[j] * 9.0f ) );
  }
  codes.push_back( std::move( row ) );
  if ( labeled )
  {
    labels.push_back( *v.label );
  }
  provenance.push_back( std::move( p ) );
}

double LabeledDataset::balance() const
{
  if ( labels.empty() )
  {
    return 0.0;
  }
  return static_cast<double>( std::count( labels.begin(), labels.end(), 1 ) ) / static_cast<double>( labels.size() );
}

Netlist prepare_locked( const Netlist& locked, const PipelineOptions& options )
{
  if ( !options.optimize )
  {
    return to_generic( locked );
  }
  return to_generic( optimize( to_generic( locked ), options.passes ) );
}

LabeledDataset gen_gss( const std::vector<NamedNetlist>& train, std::string_view target_id, std::size_t locks,
                        std::size_t key_bits, std::uint64_t seed, const PipelineOptions& options )
{
  options.extraction.check();
  std::set<std::string> ids;
  for ( const auto& t : train )
  {
    if ( t.id == target_id )
    {
      throw Error( "target-leakage", "training netlist '" + t.id + "' is the declared target" );
    }
    if ( !ids.insert( t.id ).second )
    {
      throw Error( "duplicate-definition", "training netlist id '" + t.id + "' appears twice" );
    }
  }

  std::vector<Netlist> generic;
  for ( const auto& t : train )
  {
    generic.push_back( to_generic( t.netlist ) );
  }
  const auto jobs_total = train.size() * locks;
  std::vector<std::vector<LocalityVector>> results( jobs_total );
  std::vector<std::uint64_t> seeds( jobs_total );
  parallel_for( jobs_total, options.jobs, [&]( std::size_t job ) {
    const auto net = job / locks;
    const auto copy = job % locks;
    const auto s = derive_seed( seed, { gss_stream, net, copy } );
    seeds[job] = s;
    const auto key = keygen( key_bits, s );
    const auto locked = prepare_locked( lock( generic[net], key, s, options.scheme ).first, options );
    results[job] = lve( locked, options.extraction, key );
  } );

  LabeledDataset d;
  d.scenario = Scenario::gss;
  d.vector_length = options.extraction.vector_length;
  for ( std::size_t job = 0; job < jobs_total; ++job )
  {
    for ( const auto& v : results[job] )
    {
      d.append( v, { train[job / locks].id, options.scheme, seeds[job], v.key_index } );
    }
  }
  std::vector<std::string> names;
  for ( const auto& t : train )
  {
    names.push_back( t.id );
  }
  d.info = { { "netlists", names }, { "target", target_id },   { "locks", locks },
             { "key_bits", key_bits }, { "seed", seed },       { "scheme", to_string( options.scheme ) },
             { "optimize", options.optimize } };
  return d;
}

SrsData gen_srs( const Netlist& target_locked, const LockRecord& record, std::size_t copies, std::size_t key_bits,
                 std::uint64_t seed, const PipelineOptions& options, const std::string& target_id )
{
  options.extraction.check();
  const auto original = target_locked.key_inputs().size();
  if ( original == 0 )
  {
    throw Error( "extraction", "target netlist has no key inputs" );
  }

  std::vector<std::vector<LocalityVector>> results( copies );
  std::vector<std::uint64_t> seeds( copies );
  parallel_for( copies, options.jobs, [&]( std::size_t copy ) {
    const auto s = derive_seed( seed, { srs_stream, copy } );
    seeds[copy] = s;
    const auto key2 = keygen( key_bits, s );
    const auto relocked = prepare_locked( relock( target_locked, record, key2, s ).first, options );
    std::set<GateId> shared;
    if ( options.skip_shared_key_gates )
    {
      for ( std::size_t i = 0; i < original; ++i )
      {
        shared.insert( locate_key_gate( relocked, i ).first );
      }
    }
    std::vector<LocalityVector> out;
    for ( std::size_t i = 0; i < key_bits; ++i )
    {
      if ( shared.count( locate_key_gate( relocked, original + i ).first ) )
      {
        continue;
      }
      out.push_back( extract_locality( relocked, original + i, options.extraction, key2[i] ) );
    }
    results[copy] = std::move( out );
  } );

  SrsData data;
  data.train.scenario = Scenario::srs;
  data.train.vector_length = options.extraction.vector_length;
  for ( std::size_t copy = 0; copy < copies; ++copy )
  {
    for ( const auto& v : results[copy] )
    {
      data.train.append( v, { target_id + "/relock" + std::to_string( copy ), record.scheme, seeds[copy], v.key_index } );
    }
  }
  data.train.info = { { "target", target_id }, { "copies", copies }, { "key_bits", key_bits },
                      { "seed", seed },        { "scheme", to_string( record.scheme ) },
                      { "optimize", options.optimize } };

  data.test.scenario = Scenario::srs;
  data.test.vector_length = options.extraction.vector_length;
  data.test.labeled = false;
  for ( const auto& v : lve( prepare_locked( target_locked, options ), options.extraction ) )
  {
    data.test.append( v, { target_id, record.scheme, record.seed, v.key_index } );
  }
  data.test.info = { { "target", target_id }, { "key_bits", original } };
  return data;
}

std::pair<LabeledDataset, LabeledDataset> split( const LabeledDataset& dataset, double fraction, std::uint64_t seed )
{
  if ( !( fraction > 0.0 && fraction < 1.0 ) )
  {
    throw Error( "config-schema", "split fraction must lie strictly between 0 and 1" );
  }
  if ( !dataset.labeled )
  {
    throw Error( "config-schema", "cannot stratify an unlabelled dataset" );
  }
  std::map<int, std::vector<std::size_t>> by_label;
  for ( std::size_t i = 0; i < dataset.size(); ++i )
  {
    by_label[dataset.labels[i]].push_back( i );
  }
  // largest-remainder allocation of round(fraction * n) rows across labels
  const auto wanted = static_cast<std::size_t>( std::llround( fraction * static_cast<double>( dataset.size() ) ) );
  std::map<int, std::size_t> quota;
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for ( const auto& [label, rows] : by_label )
  {
    const double exact = fraction * static_cast<double>( rows.size() );
    quota[label] = static_cast<std::size_t>( std::floor( exact ) );
    assigned += quota[label];
    remainders.push_back( { exact - std::floor( exact ), label } );
  }
  std::stable_sort( remainders.begin(), remainders.end(),
                    []( const auto& a, const auto& b ) { return a.first > b.first; } );
  for ( std::size_t i = 0; assigned < wanted && i < remainders.size(); ++i )
  {
    ++quota[remainders[i].second];
    ++assigned;
  }

  Rng rng( derive_seed( seed, { split_stream } ) );
  std::vector<std::size_t> first, second;
  for ( auto& [label, rows] : by_label )
  {
    auto shuffled = rows;
    rng.shuffle( shuffled );
    first.insert( first.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>( quota[label] ) );
    second.insert( second.end(), shuffled.begin() + static_cast<std::ptrdiff_t>( quota[label] ), shuffled.end() );
  }
  if ( first.empty() || second.empty() )
  {
    throw Error( "degenerate-split", "split leaves one side empty" );
  }
  std::sort( first.begin(), first.end() );
  std::sort( second.begin(), second.end() );
  return { subset( dataset, first ), subset( dataset, second ) };
}

nlohmann::json to_json( const ExtractionParams& p )
{
  return { { "backward_depth", p.backward_depth },
           { "forward_depth", p.forward_depth },
           { "fan_in", p.fan_in },
           { "fan_out", p.fan_out },
           { "depth_mode", p.depth_mode == DepthMode::levels ? "levels" : "nodes" },
           { "vector_length", p.vector_length },
           { "overflow", p.overflow == OverflowPolicy::error ? "error" : "truncate" } };
}

ExtractionParams extraction_params_from_json( const nlohmann::json& j )
{
  if ( !j.is_object() )
  {
    throw Error( "config-schema", "extraction parameters must be an object" );
  }
  ExtractionParams p;
  try
  {
    for ( const auto& [key, value] : j.items() )
    {
      if ( key == "backward_depth" )
        p.backward_depth = value.get<std::size_t>();
      else if ( key == "forward_depth" )
        p.forward_depth = value.get<std::size_t>();
      else if ( key == "fan_in" )
        p.fan_in = value.get<std::size_t>();
      else if ( key == "fan_out" )
        p.fan_out = value.get<std::size_t>();
      else if ( key == "vector_length" )
        p.vector_length = value.get<std::size_t>();
      else if ( key == "depth_mode" )
      {
        const auto s = value.get<std::string>();
        if ( s != "levels" && s != "nodes" )
        {
          throw Error( "config-schema", "depth_mode must be 'levels' or 'nodes'" );
        }
        p.depth_mode = s == "levels" ? DepthMode::levels : DepthMode::nodes;
      }
      else if ( key == "overflow" )
      {
        const auto s = value.get<std::string>();
        if ( s != "error" && s != "truncate" )
        {
          throw Error( "config-schema", "overflow must be 'error' or 'truncate'" );
        }
        p.overflow = s == "error" ? OverflowPolicy::error : OverflowPolicy::truncate;
      }
      else
        throw Error( "config-schema", "unknown extraction key '" + key + "'" );
    }
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "config-schema", std::string( "extraction parameters: " ) + e.what() );
  }
  p.check();
  return p;
}

void save_dataset( const LabeledDataset& d, const std::filesystem::path& dir )
{
  std::filesystem::create_directories( dir );
  nlohmann::json manifest = {
      { "format", "lockml-dataset" },
      { "version", 1 },
      { "scenario", to_string( d.scenario ) },
      { "vector_length", d.vector_length },
      { "labeled", d.labeled },
      { "count", d.size() },
      { "info", d.info } };
  if ( d.labeled )
  {
    const auto ones = static_cast<std::size_t>( std::count( d.labels.begin(), d.labels.end(), 1 ) );
    manifest["labels"] = { { "0", d.size() - ones }, { "1", ones } };
  }
  std::ofstream( dir / "manifest.json" ) << manifest.dump( 2 ) << "\n";

  std::ofstream data( dir / "data.csv" );
  data << "label";
  for ( std::size_t j = 0; j < d.vector_length; ++j )
  {
    data << ",v" << j;
  }
  data << "\n" << std::fixed << std::setprecision( 6 );
  for ( std::size_t i = 0; i < d.size(); ++i )
  {
    if ( d.labeled )
    {
      data << static_cast<int>( d.labels[i] );
    }
    for ( auto c : d.codes[i] )
    {
      data << "," << static_cast<double>( c ) / 9.0;
    }
    data << "\n";
  }

  std::ofstream prov( dir / "provenance.csv" );
  prov << "row,netlist,scheme,seed,key_index\n";
  for ( std::size_t i = 0; i < d.size(); ++i )
  {
    const auto& p = d.provenance[i];
    prov << i << "," << p.netlist << "," << to_string( p.scheme ) << "," << p.seed << "," << p.key_index << "\n";
  }
  if ( !data || !prov )
  {
    throw Error( "io", "failed writing dataset to '" + dir.string() + "'" );
  }
}

LabeledDataset load_dataset( const std::filesystem::path& dir )
{
  LabeledDataset d;
  try
  {
    const auto manifest = nlohmann::json::parse( read_text( dir / "manifest.json" ) );
    if ( manifest.at( "format" ) != "lockml-dataset" )
    {
      throw Error( "format", "'" + dir.string() + "' is not a dataset directory" );
    }
    d.scenario = scenario_from_string( manifest.at( "scenario" ).get<std::string>() );
    d.vector_length = manifest.at( "vector_length" ).get<std::size_t>();
    d.labeled = manifest.at( "labeled" ).get<bool>();
    d.info = manifest.value( "info", nlohmann::json::object() );
  }
  catch ( const nlohmann::json::exception& e )
  {
    throw Error( "format", std::string( "malformed manifest: " ) + e.what() );
  }

  std::istringstream data( read_text( dir / "data.csv" ) );
  std::string line;
  std::getline( data, line );
  std::size_t row = 0;
  while ( std::getline( data, line ) )
  {
    ++row;
    const auto cells = split_csv( line );
    if ( cells.size() != d.vector_length + 1 )
    {
      throw Error( "format", "data.csv row " + std::to_string( row ) + " has " + std::to_string( cells.size() ) +
                                 " cells" );
    }
    if ( d.labeled )
    {
      if ( cells[0] != "0" && cells[0] != "1" )
      {
        throw Error( "format", "data.csv row " + std::to_string( row ) + " has label '" + cells[0] + "'" );
      }
      d.labels.push_back( cells[0] == "1" );
    }
    std::vector<std::uint8_t> codes( d.vector_length );
    for ( std::size_t j = 0; j < d.vector_length; ++j )
    {
      const auto v = std::stod( cells[j + 1] );
      codes[j] = static_cast<std::uint8_t>( std::lround( v * 9.0 ) );
    }
    d.codes.push_back( std::move( codes ) );
  }

  std::istringstream prov( read_text( dir / "provenance.csv" ) );
  std::getline( prov, line );
  while ( std::getline( prov, line ) )
  {
    const auto cells = split_csv( line );
    if ( cells.size() != 5 )
    {
      throw Error( "format", "malformed provenance row '" + line + "'" );
    }
    d.provenance.push_back(
        { cells[1], scheme_from_string( cells[2] ), std::stoull( cells[3] ), std::stoull( cells[4] ) } );
  }
  if ( d.provenance.size() != d.size() )
  {
    throw Error( "format", "provenance.csv and data.csv disagree on the number of rows" );
  }
  return d;
}

} // namespace lockml
