/*!
  \file parallel.hpp
  \brief Index-parallel loop with deterministic result placement.
*/

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lockml
{

inline std::size_t default_jobs()
{
  return std::max( 1u, std::thread::hardware_concurrency() );
}

/*! \brief Calls f(i) for i in [0, n) on up to `jobs` threads; rethrows the first exception. */
template<typename F>
void parallel_for( std::size_t n, std::size_t jobs, F&& f )
{
  jobs = std::min( std::max<std::size_t>( jobs, 1 ), n );
  if ( jobs <= 1 )
  {
    for ( std::size_t i = 0; i < n; ++i )
    {
      f( i );
    }
    return;
  }
  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for ( std::size_t w = 0; w < jobs; ++w )
  {
    workers.emplace_back( [&] {
      for ( auto i = next++; i < n; i = next++ )
      {
        try
        {
          f( i );
        }
        catch ( ... )
        {
          std::lock_guard lock( error_mutex );
          if ( !error )
          {
            error = std::current_exception();
          }
          next = n;
        }
      }
    } );
  }
  for ( auto& t : workers )
  {
    t.join();
  }
  if ( error )
  {
    std::rethrow_exception( error );
  }
}

} // namespace lockml
