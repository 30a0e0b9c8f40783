/*!
  \file common.hpp
  \brief Error type and seeded random number generation shared by all modules.
*/

#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lockml
{

/*! \brief Exception carrying a machine-readable kind in addition to the message.
 *
 * The kind is a short kebab-case tag ("syntax", "length-mismatch", ...) that the
 * command line front end reports in its JSON error object.
 */
class Error : public std::runtime_error
{
public:
  Error( std::string kind, const std::string& message )
      : std::runtime_error( message ), kind_( std::move( kind ) )
  {
  }

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/*! \brief splitmix64 finaliser, used to derive independent sub-seeds. */
constexpr std::uint64_t mix64( std::uint64_t x ) noexcept
{
  x += 0x9e3779b97f4a7c15ull;
  x = ( x ^ ( x >> 30 ) ) * 0xbf58476d1ce4e5b9ull;
  x = ( x ^ ( x >> 27 ) ) * 0x94d049bb133111ebull;
  return x ^ ( x >> 31 );
}

/*! \brief Derives a child seed from a parent seed and a list of stream tags. */
inline std::uint64_t derive_seed( std::uint64_t seed, std::initializer_list<std::uint64_t> tags ) noexcept
{
  auto s = mix64( seed );
  for ( auto t : tags )
  {
    s = mix64( s ^ mix64( t + 0x632be59bd9b4e019ull ) );
  }
  return s;
}

/*! \brief Portable seeded generator.
 *
 * Distributions are implemented here rather than through <random>'s
 * distribution classes, whose output is implementation defined.
 */
class Rng
{
public:
  explicit Rng( std::uint64_t seed ) : engine_( seed ) {}

  std::uint64_t next() { return engine_(); }

  /*! \brief Uniform integer in [0, n). */
  std::uint64_t uniform_index( std::uint64_t n )
  {
    if ( n <= 1 )
    {
      return 0;
    }
    const auto limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do
    {
      x = engine_();
    } while ( x >= limit );
    return x % n;
  }

  /*! \brief Uniform double in [0, 1). */
  double uniform01() { return static_cast<double>( engine_() >> 11 ) * 0x1.0p-53; }

  double uniform( double lo, double hi ) { return lo + ( hi - lo ) * uniform01(); }

  bool bernoulli( double p ) { return uniform01() < p; }

  bool bit() { return ( engine_() >> 63 ) != 0; }

  template<typename T>
  void shuffle( std::vector<T>& values )
  {
    for ( std::size_t i = values.size(); i > 1; --i )
    {
      std::swap( values[i - 1], values[uniform_index( i )] );
    }
  }

private:
  std::mt19937_64 engine_;
};

} // namespace lockml
