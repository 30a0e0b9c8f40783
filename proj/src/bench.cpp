#include "lockml/bench.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace lockml
{

namespace
{

constexpr std::string_view key_prefix = "keyinput";

struct SyntaxError
{
  std::size_t column;
  std::string message;
};

bool is_name_char( char c )
{
  return !std::isspace( static_cast<unsigned char>( c ) ) && c != '(' && c != ')' && c != ',' && c != '=' && c != '#';
}

class LineCursor
{
public:
  explicit LineCursor( std::string_view line ) : line_( line ) {}

  void skip_space()
  {
    while ( pos_ < line_.size() && std::isspace( static_cast<unsigned char>( line_[pos_] ) ) )
    {
      ++pos_;
    }
  }

  bool at_end()
  {
    skip_space();
    return pos_ >= line_.size();
  }

  std::size_t column() const { return pos_ + 1; }

  std::string_view name( const char* what )
  {
    skip_space();
    const auto start = pos_;
    while ( pos_ < line_.size() && is_name_char( line_[pos_] ) )
    {
      ++pos_;
    }
    if ( start == pos_ )
    {
      throw SyntaxError{ start + 1, std::string( "expected " ) + what };
    }
    return line_.substr( start, pos_ - start );
  }

  bool accept( char c )
  {
    skip_space();
    if ( pos_ < line_.size() && line_[pos_] == c )
    {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect( char c )
  {
    if ( !accept( c ) )
    {
      throw SyntaxError{ pos_ + 1, std::string( "expected '" ) + c + "'" };
    }
  }

private:
  std::string_view line_;
  std::size_t pos_ = 0;
};

bool iequals( std::string_view a, std::string_view b )
{
  return a.size() == b.size() && std::equal( a.begin(), a.end(), b.begin(), []( char x, char y ) {
           return std::toupper( static_cast<unsigned char>( x ) ) == std::toupper( static_cast<unsigned char>( y ) );
         } );
}

std::optional<std::size_t> key_index( std::string_view name )
{
  if ( name.size() <= key_prefix.size() || name.substr( 0, key_prefix.size() ) != key_prefix )
  {
    return std::nullopt;
  }
  const auto digits = name.substr( key_prefix.size() );
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars( digits.data(), digits.data() + digits.size(), value );
  if ( ec != std::errc{} || ptr != digits.data() + digits.size() )
  {
    return std::nullopt;
  }
  return value;
}

struct Location
{
  std::size_t line;
  std::size_t column;
};

struct GateDecl
{
  std::string name;
  GateType type;
  std::vector<std::pair<std::string, Location>> fanin;
  Location where;
};

[[noreturn]] void fail( const char* kind, const Location& at, const std::string& message )
{
  throw Error( kind, "line " + std::to_string( at.line ) + ", column " + std::to_string( at.column ) + ": " + message );
}

} // namespace

std::string key_input_name( std::size_t index )
{
  return std::string( key_prefix ) + std::to_string( index );
}

Netlist parse_bench( std::string_view text )
{
  std::vector<std::pair<std::string, Location>> inputs;
  std::vector<std::pair<std::string, Location>> outputs;
  std::vector<GateDecl> gates;
  std::map<std::string, Location, std::less<>> defined;

  auto define = [&]( const std::string& name, const Location& at ) {
    if ( auto [it, inserted] = defined.emplace( name, at ); !inserted )
    {
      fail( "duplicate-definition", at,
            "signal '" + name + "' already defined on line " + std::to_string( it->second.line ) );
    }
  };

  std::size_t line_no = 0;
  std::size_t start = 0;
  while ( start <= text.size() )
  {
    auto end = text.find( '\n', start );
    if ( end == std::string_view::npos )
    {
      end = text.size();
    }
    auto line = text.substr( start, end - start );
    start = end + 1;
    ++line_no;
    if ( auto hash = line.find( '#' ); hash != std::string_view::npos )
    {
      line = line.substr( 0, hash );
    }
    LineCursor cur( line );
    if ( cur.at_end() )
    {
      if ( end == text.size() )
      {
        break;
      }
      continue;
    }
    try
    {
      const auto head_col = cur.column();
      const auto head = cur.name( "a declaration" );
      if ( cur.accept( '(' ) )
      {
        const bool is_input = iequals( head, "INPUT" );
        if ( !is_input && !iequals( head, "OUTPUT" ) )
        {
          throw SyntaxError{ head_col, "unknown declaration '" + std::string( head ) + "'" };
        }
        const auto col = cur.column();
        const auto name = std::string( cur.name( "a signal name" ) );
        cur.expect( ')' );
        if ( !cur.at_end() )
        {
          throw SyntaxError{ cur.column(), "unexpected trailing text" };
        }
        const Location at{ line_no, col };
        if ( is_input )
        {
          define( name, at );
          inputs.emplace_back( name, at );
        }
        else
        {
          outputs.emplace_back( name, at );
        }
      }
      else
      {
        cur.expect( '=' );
        const auto type_col = cur.column();
        const auto keyword = cur.name( "a gate type" );
        const auto type = gate_type_from_keyword( keyword );
        if ( !type )
        {
          fail( "unsupported-gate", Location{ line_no, type_col }, "unsupported gate '" + std::string( keyword ) + "'" );
        }
        GateDecl decl{ std::string( head ), *type, {}, Location{ line_no, head_col } };
        cur.expect( '(' );
        if ( !cur.accept( ')' ) )
        {
          do
          {
            const auto col = cur.column();
            decl.fanin.emplace_back( std::string( cur.name( "a signal name" ) ), Location{ line_no, col } );
          } while ( cur.accept( ',' ) );
          cur.expect( ')' );
        }
        if ( !cur.at_end() )
        {
          throw SyntaxError{ cur.column(), "unexpected trailing text" };
        }
        const auto arity = decl.fanin.size();
        const bool ok = is_constant( *type ) ? arity == 0 : is_unary( *type ) ? arity == 1 : arity >= 2;
        if ( !ok )
        {
          fail( "arity", Location{ line_no, type_col },
                std::string( to_string( *type ) ) + " cannot take " + std::to_string( arity ) + " input(s)" );
        }
        define( decl.name, decl.where );
        gates.push_back( std::move( decl ) );
      }
    }
    catch ( const SyntaxError& e )
    {
      fail( "syntax", Location{ line_no, e.column }, e.message );
    }
  }

  Netlist netlist;
  std::vector<std::pair<std::size_t, std::pair<std::string, Location>>> keys;
  for ( auto& in : inputs )
  {
    if ( auto k = key_index( in.first ) )
    {
      keys.emplace_back( *k, in );
    }
    else
    {
      netlist.add_input( in.first );
    }
  }
  std::sort( keys.begin(), keys.end(), []( const auto& a, const auto& b ) { return a.first < b.first; } );
  for ( std::size_t i = 0; i < keys.size(); ++i )
  {
    if ( keys[i].first != i )
    {
      fail( "key-index", keys[i].second.second, "key inputs must be numbered 0.." + std::to_string( keys.size() - 1 ) +
                                                    " without gaps or repeats" );
    }
    netlist.add_key_input( keys[i].second.first );
  }
  std::vector<GateId> ids;
  ids.reserve( gates.size() );
  for ( const auto& g : gates )
  {
    ids.push_back( netlist.add_gate( g.name, g.type, {} ) );
  }
  for ( std::size_t i = 0; i < gates.size(); ++i )
  {
    std::vector<GateId> fanin;
    for ( const auto& [name, at] : gates[i].fanin )
    {
      const auto id = netlist.find( name );
      if ( !id )
      {
        fail( "undeclared-signal", at, "signal '" + name + "' is never defined" );
      }
      fanin.push_back( *id );
    }
    netlist.set_fanins( ids[i], std::move( fanin ) );
  }
  for ( const auto& [name, at] : outputs )
  {
    const auto id = netlist.find( name );
    if ( !id )
    {
      fail( "undeclared-signal", at, "output '" + name + "' is never defined" );
    }
    netlist.add_output( *id );
  }
  if ( auto violations = validate( netlist ); !violations.empty() )
  {
    const auto& v = violations.front();
    throw Error( v.rule == "cycle" ? "cycle" : "invalid-netlist", v.message );
  }
  return netlist;
}

std::string write_bench( const Netlist& netlist )
{
  std::ostringstream os;
  os << "# " << netlist.primary_inputs().size() << " inputs, " << netlist.key_inputs().size() << " key inputs, "
     << netlist.primary_outputs().size() << " outputs, " << netlist.flipflops().size() << " D-type flip-flops, "
     << netlist.gate_count() << " gates\n";
  for ( auto id : netlist.primary_inputs() )
  {
    os << "INPUT(" << netlist.gate( id ).name << ")\n";
  }
  for ( auto id : netlist.key_inputs() )
  {
    os << "INPUT(" << netlist.gate( id ).name << ")\n";
  }
  for ( auto id : netlist.primary_outputs() )
  {
    os << "OUTPUT(" << netlist.gate( id ).name << ")\n";
  }
  for ( GateId id = 0; id < netlist.slot_count(); ++id )
  {
    const auto& g = netlist.gate( id );
    if ( g.removed || g.type == GateType::Input || g.type == GateType::KeyInput )
    {
      continue;
    }
    os << g.name << " = " << ( g.type == GateType::Buf ? std::string_view( "BUFF" ) : to_string( g.type ) ) << "(";
    for ( std::size_t i = 0; i < g.fanin.size(); ++i )
    {
      os << ( i ? ", " : "" ) << netlist.gate( g.fanin[i] ).name;
    }
    os << ")\n";
  }
  return os.str();
}

Netlist read_bench_file( const std::filesystem::path& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
  {
    throw Error( "missing-input", "cannot open '" + path.string() + "'" );
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_bench( ss.str() );
}

void write_bench_file( const Netlist& netlist, const std::filesystem::path& path )
{
  std::ofstream out( path, std::ios::binary );
  if ( !out )
  {
    throw Error( "io", "cannot write '" + path.string() + "'" );
  }
  out << write_bench( netlist );
}

} // namespace lockml
