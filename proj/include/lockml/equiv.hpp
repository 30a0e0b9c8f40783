/*!
  \file equiv.hpp
  \brief Simulation-based combinational equivalence checking.

  Inputs (primary, key and flip-flop outputs) are matched by name; primary
  outputs are matched by position and flip-flop inputs by flip-flop name.
  Sequential designs are thereby compared at flip-flop boundaries only.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace lockml
{

struct EquivOptions
{
  enum class Mode
  {
    exhaustive,
    random
  };

  Mode mode = Mode::random;
  std::uint64_t vectors = 10000;
  std::uint64_t seed = 0;

  static EquivOptions exhaustive() { return { Mode::exhaustive, 0, 0 }; }
  static EquivOptions random( std::uint64_t vectors, std::uint64_t seed ) { return { Mode::random, vectors, seed }; }
};

/*! \brief Largest number of inputs accepted by exhaustive mode. */
inline constexpr std::size_t max_exhaustive_inputs = 24;

struct EquivResult
{
  bool equivalent = true;
  /*! Distinguishing assignment (input name to bit) when not equivalent. */
  std::map<std::string, bool> counterexample;
  /*! Index of the first differing compared point (outputs first, then flip-flop inputs). */
  std::optional<std::size_t> differing_point;
  std::uint64_t vectors_checked = 0;
};

EquivResult equiv_check( const Netlist& a, const Netlist& b, const EquivOptions& options );

} // namespace lockml
