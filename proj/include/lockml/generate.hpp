/*!
  \file generate.hpp
  \brief Synthetic benchmark circuits.

  Seeded random DAGs stand in for the ISCAS/ITC suites when no bench files are
  available; the arithmetic generators give structured circuits with a known
  function.
*/

#pragma once

#include "lockml/netlist.hpp"

#include <cstdint>

namespace lockml
{

struct RandomCircuitParams
{
  std::size_t inputs = 16;
  std::size_t gates = 200;
  /*! Upper bound on primary outputs; gates without readers are always outputs. */
  std::size_t outputs = 8;
  /*! Largest fanin drawn for AND/NAND/OR/NOR/XOR/XNOR gates (2 gives a generic netlist). */
  std::size_t max_fanin = 2;
  /*! Probability that a gate is a NOT or BUF. */
  double unary_fraction = 0.15;
  /*! Fanins are drawn from the most recent `locality` signals with probability 0.8. */
  std::size_t locality = 32;
};

Netlist random_circuit( const RandomCircuitParams& params, std::uint64_t seed );

/*! \brief n-bit ripple-carry adder: inputs a0.., b0.., cin; outputs s0.., cout. */
Netlist ripple_carry_adder( std::size_t bits );

/*! \brief n×n array multiplier built from AND partial products and full adders. */
Netlist array_multiplier( std::size_t bits );

/*! \brief The six-NAND c17 benchmark. */
Netlist c17();

} // namespace lockml
